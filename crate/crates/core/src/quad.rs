//! Gauss-Hermite quadrature and Gaussian-field expectations.
//!
//! All limiting formulas reduce to expectations of smooth functions of
//! `c z + s + h` with `z ~ N(0,1)` and `h` drawn from a small field law, so
//! one rule object serves every downstream module. Nodes and weights come
//! from Newton iteration on the orthonormal Hermite recurrence, which keeps
//! the crate free of an eigenvalue dependency and is stable well past the
//! orders used here.

use crate::error::{Error, Result};
use crate::model::FieldDist;

/// Default node count for outer integrals.
pub const DEFAULT_NODES: usize = 61;
/// Node count for nested inner integrals.
pub const NESTED_NODES: usize = 41;

/// Quadrature rule for `E[f(Z)]`, `Z ~ N(0,1)`: `sum_i w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Gauss-Hermite rule with `n` nodes, rescaled to the standard normal
    /// weight.
    pub fn gauss_hermite(n: usize) -> Result<QuadRule> {
        if n == 0 || n > 400 {
            return Err(Error::InvalidParams(format!(
                "node count {n} out of range 1..=400"
            )));
        }
        let (raw_nodes, raw_weights) = hermite_rule(n)?;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let sqrt2 = std::f64::consts::SQRT_2;
        let nodes: Vec<f64> = raw_nodes.iter().map(|&x| sqrt2 * x).collect();
        let weights: Vec<f64> = raw_weights.iter().map(|&w| w / sqrt_pi).collect();
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::QuadratureUnstable(format!(
                "weights sum to {total} for {n} nodes"
            )));
        }
        let second: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * x * x).sum();
        if (second - 1.0).abs() > 1e-10 {
            return Err(Error::QuadratureUnstable(format!(
                "second moment {second} for {n} nodes"
            )));
        }
        Ok(QuadRule { nodes, weights })
    }

    pub fn default_rule() -> QuadRule {
        QuadRule::gauss_hermite(DEFAULT_NODES).expect("default rule is well posed")
    }

    pub fn nested_rule() -> QuadRule {
        QuadRule::gauss_hermite(NESTED_NODES).expect("nested rule is well posed")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Physicists' Gauss-Hermite nodes and weights for weight `exp(-x^2)`.
/// Roots are found largest-first by Newton iteration on the orthonormal
/// recurrence, each seeded from the previously found roots.
fn hermite_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..half {
        let mut z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => nodes[0] - 1.14 * nf.powf(0.426) / nodes[0],
            2 => 1.86 * nodes[1] - 0.86 * nodes[0],
            3 => 1.91 * nodes[2] - 0.91 * nodes[1],
            _ => 2.0 * nodes[i - 1] - nodes[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..200 {
            // Orthonormal recurrence: p_{j+1} = x sqrt(2/(j+1)) p_j - sqrt(j/(j+1)) p_{j-1}.
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0f64;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * (1.0 + z.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::QuadratureUnstable(format!(
                "Newton failed to converge for node {i} of {n}"
            )));
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let w = 2.0 / (pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[half - 1] = 0.0;
    }
    Ok((nodes, weights))
}

/// Discretization of an external-field law as `(value, probability)` atoms.
/// Gaussian components use a nested Gauss-Hermite rule with `inner_nodes`
/// points.
pub fn field_atoms(field: &FieldDist, inner_nodes: usize) -> Result<Vec<(f64, f64)>> {
    field.validate()?;
    match *field {
        FieldDist::Zero => Ok(vec![(0.0, 1.0)]),
        FieldDist::TwoPoint(a) => Ok(vec![(-a, 0.5), (a, 0.5)]),
        FieldDist::CenteredGaussian(s) => {
            let rule = QuadRule::gauss_hermite(inner_nodes)?;
            Ok(rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| (s * x, w))
                .collect())
        }
        FieldDist::TwoPointPlusGaussian { a, s } => {
            let rule = QuadRule::gauss_hermite(inner_nodes)?;
            let mut atoms = Vec::with_capacity(2 * rule.len());
            for sign in [-1.0, 1.0] {
                for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                    atoms.push((sign * a + s * x, 0.5 * w));
                }
            }
            Ok(atoms)
        }
    }
}

/// Integrands appearing in the fixed-point and variance formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    /// `tanh(x)^p`.
    Tanh(u32),
    /// `sech(x)^2`.
    Sech2,
    /// `sech(x)^4`.
    Sech4,
    /// `log cosh(x)`.
    LogCosh,
}

impl Integrand {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Integrand::Tanh(p) => x.tanh().powi(p as i32),
            Integrand::Sech2 => sech2(x),
            Integrand::Sech4 => {
                let s = sech2(x);
                s * s
            }
            Integrand::LogCosh => log_cosh(x),
        }
    }
}

/// `sech(x)^2` computed in the overflow-free exponential form.
#[inline]
pub fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    let d = 1.0 + e;
    4.0 * e / (d * d)
}

/// `log cosh(x)` without overflow: `|x| - log 2 + log1p(exp(-2|x|))`.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    x.abs() - std::f64::consts::LN_2 + (-2.0 * x.abs()).exp().ln_1p()
}

/// `E[f(c Z + s + h)]` over `Z ~ N(0,1)` (rule) and field atoms.
pub fn expect_over(
    f: impl Fn(f64) -> f64,
    z_coef: f64,
    shift: f64,
    atoms: &[(f64, f64)],
    rule: &QuadRule,
) -> f64 {
    let mut total = 0.0;
    if z_coef == 0.0 {
        for &(hv, hw) in atoms {
            total += hw * f(shift + hv);
        }
    } else {
        for &(hv, hw) in atoms {
            let base = shift + hv;
            let mut inner = 0.0;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                inner += w * f(z_coef * x + base);
            }
            total += hw * inner;
        }
    }
    total
}

/// Tagged-integrand convenience wrapper over [`expect_over`].
pub fn expect(
    kind: Integrand,
    z_coef: f64,
    shift: f64,
    atoms: &[(f64, f64)],
    rule: &QuadRule,
) -> f64 {
    expect_over(|x| kind.eval(x), z_coef, shift, atoms, rule)
}
