//! Mean-field fixed points, regime classification, flatness order, and
//! replica-symmetry checks.
//!
//! Everything here is a deterministic function of the limit parameters
//! `(c, theta, theta1, field)` and a quadrature rule. The overlap `q` and
//! clique magnetization `mu` solve
//!
//! ```text
//! q  = c E[tanh^2(theta sqrt(q) z + theta1 mu + h)] + (1-c) E[tanh^2(theta sqrt(q) z + h)]
//! mu = E[tanh(theta sqrt(q) z + theta1 mu + h)]
//! ```
//!
//! and the classifier compares `psi = theta1 E[sech^2(theta sqrt(q0) z + h)]`
//! (evaluated on the symmetric branch `q0`, where `mu = 0`) against 1.

use crate::error::{Error, Result};
use crate::model::FieldDist;
use crate::quad::{expect, expect_over, field_atoms, log_cosh, Integrand, QuadRule};
use serde::{Deserialize, Serialize};

/// Residual tolerance for fixed-point solutions.
pub const FP_TOL: f64 = 1e-10;
/// Iteration cap for the damped fixed-point loops.
pub const MAX_ITERS: usize = 10_000;
/// Half-width of the critical window in `psi`.
pub const REGIME_TOL: f64 = 1e-8;
/// Tolerance below which an even derivative of the effective potential is
/// treated as vanishing.
pub const DERIV_TOL: f64 = 1e-8;
/// Slack for the numerically-zero direction in the overlap-derivative check.
pub const AT_TOL: f64 = 1e-7;

const DAMPING: f64 = 0.5;

/// Temperature regime of the planted term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    High,
    /// First non-vanishing even derivative has order `2 tau`; `sign` is its
    /// sign.
    Critical {
        tau: u32,
        sign: f64,
    },
    Low,
}

impl Regime {
    pub fn is_high(&self) -> bool {
        matches!(self, Regime::High)
    }
    pub fn is_low(&self) -> bool {
        matches!(self, Regime::Low)
    }
    pub fn is_critical(&self) -> bool {
        matches!(self, Regime::Critical { .. })
    }
    pub fn label(&self) -> String {
        match self {
            Regime::High => "high".into(),
            Regime::Low => "low".into(),
            Regime::Critical { tau, .. } => format!("critical(tau={tau})"),
        }
    }
}

/// Solved limit description at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    pub c: f64,
    pub theta: f64,
    pub theta1: f64,
    pub field: FieldDist,
    /// Overlap limit of `R_{1,2}`.
    pub q: f64,
    /// Clique magnetization limit; the nonnegative representative of `{-mu, mu}`.
    pub mu: f64,
    /// Classification value `theta1 E[sech^2]` on the symmetric branch.
    pub psi: f64,
    pub regime: Regime,
    /// Replica-symmetry inequality holds.
    pub rs_ok: bool,
    /// Overlap-derivative condition holds on the `q'` grid.
    pub at_ok: bool,
    pub iterations: usize,
    /// Largest fixed-point residual of the returned `(q, mu)`.
    pub residual: f64,
}

/// One evaluation of the overlap functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPoint {
    pub m: f64,
    pub q_prime: f64,
    pub value: f64,
    pub dvalue_dm: f64,
}

/// Flatness diagnostics at a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    pub tau: u32,
    pub sign: f64,
    /// `H^(4)(0), H^(6)(0), H^(8)(0)`.
    pub derivatives: [f64; 3],
}

fn check_limit_params(c: f64, theta: f64, theta1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParams(format!(
            "clique fraction c={c} outside [0,1]"
        )));
    }
    if !(theta.is_finite() && theta >= 0.0 && theta1.is_finite() && theta1 >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "need finite nonnegative couplings, got theta={theta}, theta1={theta1}"
        )));
    }
    Ok(())
}

/// Overlap of the symmetric branch (`mu = 0`): damped iteration on
/// `q = E[tanh^2(theta sqrt(q) z + h)]`, which is also the pure-null overlap.
pub fn null_overlap(theta: f64, field: &FieldDist, rule: &QuadRule) -> Result<f64> {
    check_limit_params(0.0, theta, 0.0)?;
    let atoms = field_atoms(field, rule.len())?;
    symmetric_overlap(theta, &atoms, rule)
}

fn symmetric_overlap(theta: f64, atoms: &[(f64, f64)], rule: &QuadRule) -> Result<f64> {
    let h2 = expect(Integrand::Tanh(2), 0.0, 0.0, atoms, rule);
    if theta <= 1.0 && h2 == 0.0 {
        return Ok(0.0);
    }
    // g(q) = E tanh^2(theta sqrt(q) Z + h) - q decreases through the root:
    // g(0) = E tanh^2(h) > 0, or g(0+) ~ (theta^2 - 1) q > 0 on the trivial
    // branch with theta > 1, and g(1) < 0. Bisection is immune to the
    // critical slowing that stalls damped iteration near theta = 1.
    let g = |q: f64| expect(Integrand::Tanh(2), theta * q.sqrt(), 0.0, atoms, rule) - q;
    let mut lo = if h2 > 0.0 { 0.0 } else { 1e-12 };
    let mut hi = 1.0f64;
    if h2 == 0.0 && g(lo) <= 0.0 {
        // theta is indistinguishably close to the transition.
        return Ok(0.0);
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = 0.5 * (lo + hi);
    if q < 1e-8 && h2 == 0.0 {
        // Collapse the numerically-vanishing branch onto the exact root.
        q = 0.0;
    }
    Ok(q)
}

/// Classification value `theta1 E[sech^2(theta sqrt(q0) z + h)]` at the
/// symmetric-branch overlap `q0`.
pub fn psi_value(theta: f64, theta1: f64, field: &FieldDist, rule: &QuadRule) -> Result<f64> {
    let atoms = field_atoms(field, rule.len())?;
    let q0 = symmetric_overlap(theta, &atoms, rule)?;
    Ok(theta1 * expect(Integrand::Sech2, theta * q0.sqrt(), 0.0, &atoms, rule))
}

/// Regime from `psi`, with the flatness order resolved in the critical
/// window.
pub fn classify_regime(
    theta: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<Regime> {
    let psi = psi_value(theta, theta1, field, rule)?;
    if psi < 1.0 - REGIME_TOL {
        Ok(Regime::High)
    } else if psi > 1.0 + REGIME_TOL {
        Ok(Regime::Low)
    } else {
        let atoms = field_atoms(field, rule.len())?;
        let q0 = symmetric_overlap(theta, &atoms, rule)?;
        let f = flatness(theta, theta1, q0, field, rule)?;
        Ok(Regime::Critical {
            tau: f.tau,
            sign: f.sign,
        })
    }
}

/// Even derivatives at the origin of
/// `H(x) = x^2/2 - E[log cosh(sqrt(theta1) x + theta sqrt(q) z + h)]`,
/// via the tanh-polynomial forms of the `log cosh` derivatives. Requires the
/// critical window (`H''(0) = 1 - psi` within tolerance); returns the
/// smallest order `2 tau` in `{4, 6, 8}` whose derivative exceeds tolerance.
pub fn flatness(
    theta: f64,
    theta1: f64,
    q: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<Flatness> {
    check_limit_params(0.0, theta, theta1)?;
    let atoms = field_atoms(field, rule.len())?;
    let zc = theta * q.sqrt();
    let e2 = expect(Integrand::Sech2, zc, 0.0, &atoms, rule);
    let h2 = 1.0 - theta1 * e2;
    if h2.abs() > REGIME_TOL {
        return Err(Error::RegimeMismatch {
            expected: "critical (second derivative ~ 0)".into(),
            found: format!("H''(0) = {h2:.3e}"),
        });
    }
    let t2 = expect(Integrand::Tanh(2), zc, 0.0, &atoms, rule);
    let t4 = expect(Integrand::Tanh(4), zc, 0.0, &atoms, rule);
    let t6 = expect(Integrand::Tanh(6), zc, 0.0, &atoms, rule);
    let t8 = expect(Integrand::Tanh(8), zc, 0.0, &atoms, rule);
    let h4 = theta1.powi(2) * (2.0 - 8.0 * t2 + 6.0 * t4);
    let h6 = -theta1.powi(3) * (16.0 - 136.0 * t2 + 240.0 * t4 - 120.0 * t6);
    let h8 = -theta1.powi(4) * (-272.0 + 3968.0 * t2 - 12096.0 * t4 + 13440.0 * t6 - 5040.0 * t8);
    let derivatives = [h4, h6, h8];
    for (idx, d) in derivatives.iter().enumerate() {
        if d.abs() > DERIV_TOL {
            return Ok(Flatness {
                tau: idx as u32 + 2,
                sign: d.signum(),
                derivatives,
            });
        }
    }
    Err(Error::InvalidParams(
        "flatness exceeds the supported order 4 (all tested derivatives vanish)".into(),
    ))
}

/// Left side of the replica-symmetry inequality
/// `theta^2 E[(1-c) sech^4(theta sqrt(q) z + h) + c sech^4(... + theta1 mu)]`.
pub fn replica_symmetry_value(
    c: f64,
    theta: f64,
    theta1: f64,
    q: f64,
    mu: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<f64> {
    check_limit_params(c, theta, theta1)?;
    let atoms = field_atoms(field, rule.len())?;
    let zc = theta * q.sqrt();
    let out = expect(Integrand::Sech4, zc, 0.0, &atoms, rule);
    let inn = expect(Integrand::Sech4, zc, theta1 * mu, &atoms, rule);
    Ok(theta * theta * ((1.0 - c) * out + c * inn))
}

/// True iff the replica-symmetry inequality holds strictly.
pub fn replica_symmetry_check(
    c: f64,
    theta: f64,
    theta1: f64,
    q: f64,
    mu: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<bool> {
    Ok(replica_symmetry_value(c, theta, theta1, q, mu, field, rule)? < 1.0)
}

/// Smallest `theta` in `[lo, hi]` where the replica-symmetry value crosses 1,
/// by bisection on the re-solved check function.
pub fn find_rs_crossing(
    c: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let value_at = |theta: f64| -> Result<f64> {
        let (q, mu) = solve_order_parameters(c, theta, theta1, field, rule)?;
        Ok(replica_symmetry_value(c, theta, theta1, q, mu, field, rule)? - 1.0)
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (value_at(a)?, value_at(b)?);
    if fa >= 0.0 || fb <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "crossing not bracketed: value-1 is {fa:.3e} at theta={a} and {fb:.3e} at theta={b}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-10 {
            return Ok(mid);
        }
        if value_at(mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Solve `(q, mu)` only, without the replica-symmetry or overlap-derivative
/// diagnostics. Cheap enough for inner loops.
pub fn solve_order_parameters(
    c: f64,
    theta: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<(f64, f64)> {
    let (q, mu, ..) = solve_core(c, theta, theta1, field, rule)?;
    Ok((q, mu))
}

#[allow(clippy::type_complexity)]
fn solve_core(
    c: f64,
    theta: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<(f64, f64, f64, Regime, usize, f64)> {
    check_limit_params(c, theta, theta1)?;
    let atoms = field_atoms(field, rule.len())?;
    let q0 = symmetric_overlap(theta, &atoms, rule)?;
    let psi = theta1 * expect(Integrand::Sech2, theta * q0.sqrt(), 0.0, &atoms, rule);
    let regime = if psi < 1.0 - REGIME_TOL {
        Regime::High
    } else if psi > 1.0 + REGIME_TOL {
        Regime::Low
    } else {
        let f = flatness(theta, theta1, q0, field, rule)?;
        Regime::Critical {
            tau: f.tau,
            sign: f.sign,
        }
    };
    if !regime.is_low() {
        let resid = residuals(c, theta, theta1, q0, 0.0, &atoms, rule);
        return Ok((q0, 0.0, psi, regime, 0, resid));
    }
    let (mut q, mut mu) = (0.5f64, 0.999f64);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let zc = theta * q.sqrt();
        let f_mu = expect(Integrand::Tanh(1), zc, theta1 * mu, &atoms, rule);
        let f_q = c * expect(Integrand::Tanh(2), zc, theta1 * mu, &atoms, rule)
            + (1.0 - c) * expect(Integrand::Tanh(2), zc, 0.0, &atoms, rule);
        let resid = (f_mu - mu).abs().max((f_q - q).abs());
        if resid < FP_TOL {
            return Ok((q, mu.abs(), psi, regime, iterations, resid));
        }
        mu += DAMPING * (f_mu - mu);
        q += DAMPING * (f_q - q);
        if iterations >= MAX_ITERS {
            return Err(Error::NoConvergence {
                iterations,
                residual: resid,
            });
        }
    }
}

fn residuals(
    c: f64,
    theta: f64,
    theta1: f64,
    q: f64,
    mu: f64,
    atoms: &[(f64, f64)],
    rule: &QuadRule,
) -> f64 {
    let zc = theta * q.sqrt();
    let f_mu = expect(Integrand::Tanh(1), zc, theta1 * mu, atoms, rule);
    let f_q = c * expect(Integrand::Tanh(2), zc, theta1 * mu, atoms, rule)
        + (1.0 - c) * expect(Integrand::Tanh(2), zc, 0.0, atoms, rule);
    (f_mu - mu).abs().max((f_q - q).abs())
}

/// Full solve: order parameters plus regime, replica-symmetry, and
/// overlap-derivative diagnostics.
pub fn solve_mean_field(
    c: f64,
    theta: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<MeanFieldSolution> {
    let (q, mu, psi, regime, iterations, residual) = solve_core(c, theta, theta1, field, rule)?;
    if residual >= FP_TOL {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    let rs_ok = replica_symmetry_check(c, theta, theta1, q, mu, field, rule)?;
    let at_ok = at_check_at(c, theta, theta1, q, field, rule)?;
    Ok(MeanFieldSolution {
        c,
        theta,
        theta1,
        field: *field,
        q,
        mu,
        psi,
        regime,
        rs_ok,
        at_ok,
        iterations,
        residual,
    })
}

/// Golden-section maximization on `[a, b]` to absolute tolerance `tol`.
fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let invphi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

struct PhiEvaluator<'a> {
    c: f64,
    theta: f64,
    theta1: f64,
    q: f64,
    atoms: Vec<(f64, f64)>,
    outer: &'a QuadRule,
    inner: &'a QuadRule,
    log_inner_w: Vec<f64>,
}

impl<'a> PhiEvaluator<'a> {
    fn new(
        c: f64,
        theta: f64,
        theta1: f64,
        q: f64,
        field: &FieldDist,
        outer: &'a QuadRule,
        inner: &'a QuadRule,
    ) -> Result<Self> {
        check_limit_params(c, theta, theta1)?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParams(format!("q={q} outside [0,1]")));
        }
        if inner.len() > 128 {
            return Err(Error::InvalidParams(
                "inner rule capped at 128 nodes".into(),
            ));
        }
        let atoms = field_atoms(field, outer.len())?;
        let log_inner_w = inner.weights.iter().map(|w| w.ln()).collect();
        Ok(PhiEvaluator {
            c,
            theta,
            theta1,
            q,
            atoms,
            outer,
            inner,
            log_inner_w,
        })
    }

    /// `E_{z,h} log E_{z'} cosh^m(theta sqrt(q) z + ex z' + shift + h)`,
    /// with the inner expectation done as a log-sum-exp over the nested rule.
    fn log_inner_cosh_m(&self, m: f64, ex: f64, shift: f64) -> f64 {
        let zc = self.theta * self.q.sqrt();
        if ex == 0.0 {
            return m * expect_over(log_cosh, zc, shift, &self.atoms, self.outer);
        }
        let mut total = 0.0;
        for &(hv, hw) in &self.atoms {
            let mut inner_acc = 0.0;
            for (&z, &w) in self.outer.nodes.iter().zip(&self.outer.weights) {
                let base = zc * z + shift + hv;
                let mut best = f64::NEG_INFINITY;
                let mut terms = [0.0f64; 128];
                for (j, &zp) in self.inner.nodes.iter().enumerate() {
                    let t = self.log_inner_w[j] + m * log_cosh(base + ex * zp);
                    terms[j] = t;
                    if t > best {
                        best = t;
                    }
                }
                let mut s = 0.0;
                for &t in terms.iter().take(self.inner.len()) {
                    s += (t - best).exp();
                }
                inner_acc += w * (best + s.ln());
            }
            total += hw * inner_acc;
        }
        total
    }

    fn value(&self, m: f64, q_prime: f64) -> f64 {
        let th2 = self.theta * self.theta;
        let ex = self.theta * (q_prime - self.q).max(0.0).sqrt();
        let mut phi = std::f64::consts::LN_2 + 0.25 * th2 * (1.0 - q_prime).powi(2)
            - 0.25 * th2 * m * (q_prime * q_prime - self.q * self.q);
        if self.c > 0.0 {
            let (_, sup) = golden_max(
                |mu| {
                    (self.c / m) * self.log_inner_cosh_m(m, ex, self.theta1 * mu)
                        - 0.5 * self.theta1 * mu * mu
                },
                0.0,
                1.0,
                1e-8,
            );
            phi += sup;
        }
        phi += ((1.0 - self.c) / m) * self.log_inner_cosh_m(m, ex, 0.0);
        phi
    }
}

/// Overlap functional `Phi(m, q')` with its `m`-derivative by central
/// differences. `q` is the solved overlap at the same parameters.
#[allow(clippy::too_many_arguments)]
pub fn phi(
    m: f64,
    q_prime: f64,
    c: f64,
    theta: f64,
    theta1: f64,
    q: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<PhiPoint> {
    if !(0.05..=1.0 + 1e-3).contains(&m) {
        return Err(Error::QuadratureUnstable(format!(
            "replica parameter m={m} outside the stable window [0.05, 1]"
        )));
    }
    if !(q - 1e-12..=1.0 + 1e-12).contains(&q_prime) {
        return Err(Error::InvalidParams(format!(
            "q'={q_prime} outside [q={q}, 1]"
        )));
    }
    let inner = QuadRule::nested_rule();
    let ev = PhiEvaluator::new(c, theta, theta1, q, field, rule, &inner)?;
    let value = ev.value(m, q_prime);
    let dm = 1e-4;
    let dvalue_dm = (ev.value(m + dm, q_prime) - ev.value(m - dm, q_prime)) / (2.0 * dm);
    Ok(PhiPoint {
        m,
        q_prime,
        value,
        dvalue_dm,
    })
}

fn at_check_at(
    c: f64,
    theta: f64,
    theta1: f64,
    q: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<bool> {
    if theta == 0.0 {
        return Ok(true);
    }
    let inner = QuadRule::nested_rule();
    let ev = PhiEvaluator::new(c, theta, theta1, q, field, rule, &inner)?;
    let dm = 1e-4;
    let points = 12;
    for idx in 0..points {
        // Geometric ladder from 1e-3 above q up to 1.
        let t = 1e-3 * (1000.0f64).powf(idx as f64 / (points - 1) as f64);
        let q_prime = q + (1.0 - q) * t;
        let slope = (ev.value(1.0 + dm, q_prime) - ev.value(1.0 - dm, q_prime)) / (2.0 * dm);
        if slope >= AT_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks `dPhi/dm at m=1` is negative for all `q'` strictly above `q` on a
/// geometric grid; the degenerate direction `q' = q` is excluded.
pub fn at_line_check(
    c: f64,
    theta: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<bool> {
    let (q, _) = solve_order_parameters(c, theta, theta1, field, rule)?;
    at_check_at(c, theta, theta1, q, field, rule)
}
