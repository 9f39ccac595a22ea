//! Limiting variances: small-clique high/low/critical formulas, the null
//! model variance, Stirling numbers, and the cavity-matrix linear systems
//! for the large-clique regime.

use crate::error::{Error, Result};
use crate::meanfield::REGIME_TOL;
use crate::model::FieldDist;
use crate::quad::{expect, expect_over, field_atoms, Integrand, QuadRule};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Tanh moments entering every cavity scalar: `q_hat[j-1] = E[tanh^j]` with
/// the clique shift `theta1 mu`, `q_tilde[j-1]` without it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub q_hat: [f64; 4],
    pub q_tilde: [f64; 4],
}

impl MomentVector {
    pub fn validate(&self) -> Result<()> {
        let ok = |m: &[f64; 4]| {
            m[0].abs() <= 1.0
                && (0.0..1.0).contains(&m[1])
                && m[2].abs() <= 1.0
                && (0.0..1.0).contains(&m[3])
                && m[3] <= m[1] + 1e-14
        };
        if ok(&self.q_hat) && ok(&self.q_tilde) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "moment vector out of range: {self:?}"
            )))
        }
    }
}

/// Quadrature evaluation of the eight tanh moments at a solved `(q, mu)`.
pub fn moment_vector(
    theta: f64,
    theta1: f64,
    q: f64,
    mu: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<MomentVector> {
    let atoms = field_atoms(field, rule.len())?;
    let zc = theta * q.sqrt();
    let m = |j: u32, shift: f64| expect(Integrand::Tanh(j), zc, shift, &atoms, rule);
    Ok(MomentVector {
        q_hat: [
            m(1, theta1 * mu),
            m(2, theta1 * mu),
            m(3, theta1 * mu),
            m(4, theta1 * mu),
        ],
        q_tilde: [m(1, 0.0), m(2, 0.0), m(3, 0.0), m(4, 0.0)],
    })
}

/// High-temperature clique-magnetization variance
/// `(1 - theta1 E[sech^2]^2) / (1 - theta1 E[sech^2])^2`.
pub fn var_small_high(
    theta: f64,
    theta1: f64,
    q: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<f64> {
    let atoms = field_atoms(field, rule.len())?;
    let e2 = expect(Integrand::Sech2, theta * q.sqrt(), 0.0, &atoms, rule);
    let psi = theta1 * e2;
    if psi >= 1.0 - REGIME_TOL {
        return Err(Error::RegimeMismatch {
            expected: "high temperature (psi < 1)".into(),
            found: format!("psi = {psi}"),
        });
    }
    Ok((1.0 - theta1 * e2 * e2) / ((1.0 - psi) * (1.0 - psi)))
}

/// Positive stationary point `x* = sqrt(theta1) mu` of the effective
/// potential, as the root of `x = sqrt(theta1) E[tanh(sqrt(theta1) x + theta
/// sqrt(q) z + h)]` by bisection.
pub fn x_star_root(
    theta: f64,
    theta1: f64,
    q: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<f64> {
    let atoms = field_atoms(field, rule.len())?;
    let zc = theta * q.sqrt();
    let st1 = theta1.sqrt();
    let f = |x: f64| x - st1 * expect(Integrand::Tanh(1), zc, st1 * x, &atoms, rule);
    let (mut lo, mut hi) = (1e-8, st1.max(1.0));
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::RegimeMismatch {
            expected: "low temperature (positive root exists)".into(),
            found: format!("no sign change on [{lo}, {hi}]"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Low-temperature conditional variance at the positive optimum `x*`; the
/// tanh/sech arguments are `sqrt(theta1) x* + theta sqrt(q) z + h`.
pub fn var_small_low(
    theta: f64,
    theta1: f64,
    q: f64,
    x_star: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<f64> {
    let atoms = field_atoms(field, rule.len())?;
    let zc = theta * q.sqrt();
    let psi = theta1 * expect(Integrand::Sech2, zc, 0.0, &atoms, rule);
    if psi <= 1.0 + REGIME_TOL {
        return Err(Error::RegimeMismatch {
            expected: "low temperature (psi > 1)".into(),
            found: format!("psi = {psi}"),
        });
    }
    let shift = theta1.sqrt() * x_star;
    let e2 = expect(Integrand::Sech2, zc, shift, &atoms, rule);
    let t1 = expect(Integrand::Tanh(1), zc, shift, &atoms, rule);
    let denom = 1.0 - theta1 * e2;
    if denom.abs() < 1e-10 {
        return Err(Error::SingularSystem(format!(
            "low-temperature variance denominator 1 - theta1 E[sech^2] = {denom:.3e}"
        )));
    }
    Ok((1.0 - theta1 * e2 * e2 - t1 * t1) / (denom * denom))
}

/// Null-model variance `1 - E[tanh(theta sqrt(q) z + h)]^2` at the solved
/// null overlap; equals 1 for every symmetric field law.
pub fn var_null_sk(theta: f64, field: &FieldDist, rule: &QuadRule) -> Result<f64> {
    let q = crate::meanfield::null_overlap(theta, field, rule)?;
    let atoms = field_atoms(field, rule.len())?;
    let t1 = expect(Integrand::Tanh(1), theta * q.sqrt(), 0.0, &atoms, rule);
    Ok(1.0 - t1 * t1)
}

/// Stirling number of the second kind by the defining recurrence
/// `S(n,k) = k S(n-1,k) + S(n-1,k-1)`.
pub fn stirling2(n: u32, k: u32) -> Result<u64> {
    if n > 64 {
        return Err(Error::InvalidParams(format!("need n <= 64, got n={n}")));
    }
    if k > n {
        return Ok(0);
    }
    if n == 0 {
        return Ok(1);
    }
    if k == 0 {
        return Ok(0);
    }
    let mut row: Vec<u128> = vec![0; k as usize + 1];
    row[0] = 1; // S(0,0)
    for m in 1..=n {
        let top = k.min(m) as usize;
        for j in (1..=top).rev() {
            row[j] = (j as u128)
                .checked_mul(row[j])
                .and_then(|v| v.checked_add(row[j - 1]))
                .ok_or_else(|| Error::Overflow(format!("stirling2({n},{k})")))?;
        }
        row[0] = 0; // S(m,0) = 0 for m >= 1
    }
    u64::try_from(row[k as usize])
        .map_err(|_| Error::Overflow(format!("stirling2({n},{k}) exceeds 64 bits")))
}

/// Critical-regime variance
/// `v = ((2 tau)!)^2 Var(tanh) E[sech^2]^(4 tau - 2) / D^2` with
/// `D = E[(1 + tanh) sum_k (k!/2^k) S(2 tau - 1, k)(tanh - 1)^k]`, all
/// expectations at argument `theta sqrt(q) z + h`.
pub fn var_critical(
    tau: u32,
    theta: f64,
    theta1: f64,
    q: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<f64> {
    if !(2..=4).contains(&tau) {
        return Err(Error::InvalidParams(format!(
            "flatness order tau={tau} outside 2..=4"
        )));
    }
    let atoms = field_atoms(field, rule.len())?;
    let zc = theta * q.sqrt();
    let e2 = expect(Integrand::Sech2, zc, 0.0, &atoms, rule);
    if (theta1 * e2 - 1.0).abs() > REGIME_TOL {
        return Err(Error::RegimeMismatch {
            expected: "critical (theta1 E[sech^2] = 1)".into(),
            found: format!("theta1 E[sech^2] = {}", theta1 * e2),
        });
    }
    let t1 = expect(Integrand::Tanh(1), zc, 0.0, &atoms, rule);
    let t2 = expect(Integrand::Tanh(2), zc, 0.0, &atoms, rule);
    let var_tanh = t2 - t1 * t1;
    if var_tanh < 1e-12 {
        return Err(Error::DegenerateField(
            "critical variance requires a random field (Var(tanh) > 0)".into(),
        ));
    }
    let order = 2 * tau - 1;
    let mut coeff = vec![0.0f64; order as usize + 1];
    let mut kfact = 1.0f64;
    for k in 0..=order {
        if k > 0 {
            kfact *= k as f64;
        }
        coeff[k as usize] = kfact / 2f64.powi(k as i32) * stirling2(order, k)? as f64;
    }
    let denom = expect_over(
        |x| {
            let t = x.tanh();
            let mut p = 0.0;
            let mut pw = 1.0;
            for &c in &coeff {
                p += c * pw;
                pw *= t - 1.0;
            }
            (1.0 + t) * p
        },
        zc,
        0.0,
        &atoms,
        rule,
    );
    if denom.abs() < 1e-12 {
        return Err(Error::SingularSystem(
            "critical variance denominator expectation vanishes".into(),
        ));
    }
    let fact2tau: u64 = (1..=u64::from(2 * tau)).product();
    let num = (fact2tau as f64).powi(2) * var_tanh * e2.powi(4 * tau as i32 - 2);
    Ok(num / (denom * denom))
}

/// Scalars of the cavity iteration; `a[j] = a(j)` etc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityScalars {
    pub a: [f64; 3],
    pub a_tilde: [f64; 3],
    pub b: [f64; 2],
    pub d: [f64; 2],
    pub e: [f64; 2],
}

impl CavityScalars {
    pub fn new(moments: &MomentVector, mu: f64, theta: f64, theta1: f64) -> Self {
        let th2 = theta * theta;
        let [_, qh, q3h, q4h] = moments.q_hat;
        let [_, qt, _, q4t] = moments.q_tilde;
        CavityScalars {
            a: [
                th2 * (q4h - qh * qh),
                th2 * (qh - qh * qh),
                th2 * (1.0 - qh * qh),
            ],
            a_tilde: [
                th2 * (q4t - qt * qt),
                th2 * (qt - qt * qt),
                th2 * (1.0 - qt * qt),
            ],
            b: [th2 * (q3h - qh * mu), th2 * mu * (1.0 - qh)],
            d: [theta1 * (qh - mu * mu), theta1 * (1.0 - mu * mu)],
            e: [theta1 * (q3h - qh * mu), theta1 * mu * (1.0 - qh)],
        }
    }
}

/// Assembled cavity system for one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityMatrices {
    pub c: f64,
    pub scalars: CavityScalars,
    pub a1: DMatrix<f64>,
    pub a1_tilde: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b1_tilde: DVector<f64>,
    pub b2: DVector<f64>,
}

/// Builds every scalar and assembles the displayed matrices.
pub fn cavity_matrices(
    c: f64,
    moments: &MomentVector,
    mu: f64,
    theta: f64,
    theta1: f64,
) -> Result<CavityMatrices> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParams(format!(
            "clique fraction c={c} outside [0,1]"
        )));
    }
    moments.validate()?;
    let s = CavityScalars::new(moments, mu, theta, theta1);
    let [a0, a1s, a2s] = s.a;
    let [ta0, ta1, ta2] = s.a_tilde;
    let [b0, b1s] = s.b;
    let [d0, d1] = s.d;
    let [e0, e1] = s.e;
    #[rustfmt::skip]
    let a1 = DMatrix::from_row_slice(5, 5, &[
        a2s,  -4.0 * a1s,              3.0 * a0,                      2.0 * e1,  -2.0 * e0,
        a1s,  a2s - 2.0 * a1s - 3.0 * a0, 6.0 * a0 - 3.0 * a1s,       e1 + e0,   e1 - 3.0 * e0,
        a0,   4.0 * a1s - 8.0 * a0,    a2s - 8.0 * a1s + 10.0 * a0,   2.0 * e0,  2.0 * e1 - 4.0 * e0,
        b1s,  -2.0 * b1s - 2.0 * b0,   3.0 * b0,                      d1 + d0,   -2.0 * d0,
        b0,   2.0 * b1s - 6.0 * b0,    6.0 * b0 - 3.0 * b1s,          2.0 * d0,  d1 - 3.0 * d0,
    ]);
    #[rustfmt::skip]
    let a1_tilde = DMatrix::from_row_slice(5, 5, &[
        ta2, -4.0 * ta1,               3.0 * ta0,                     0.0, 0.0,
        ta1, ta2 - 2.0 * ta1 - 3.0 * ta0, 6.0 * ta0 - 3.0 * ta1,      0.0, 0.0,
        ta0, 4.0 * ta1 - 8.0 * ta0,    ta2 - 8.0 * ta1 + 10.0 * ta0,  0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,
    ]);
    #[rustfmt::skip]
    let a2 = DMatrix::from_row_slice(4, 4, &[
        a2s - 2.0 * a1s,  3.0 * a0 - 2.0 * a1s,         e1,  e1 - 2.0 * e0,
        2.0 * a1s - 2.0 * a0, a2s - 6.0 * a1s + 6.0 * a0, e0, 2.0 * e1 - 3.0 * e0,
        -b1s,             b0,                            d1,  -d0,
        b1s - 2.0 * b0,   b0,                            d0,  d1 - 2.0 * d0,
    ]);
    let [_, qh, q3h, q4h] = moments.q_hat;
    let [_, qt, q3t, q4t] = moments.q_tilde;
    let b1 = DVector::from_row_slice(&[
        1.0 - qh * qh,
        qh - qh * qh,
        q4h - qh * qh,
        mu - mu * qh,
        q3h - mu * qh,
    ]);
    let b1_tilde = DVector::from_row_slice(&[1.0 - qt * qt, qt - qt * qt, q4t - qt * qt, 0.0, q3t]);
    let b2 = DVector::from_row_slice(&[mu - qh * mu, q3h - qh * mu, 1.0 - mu * mu, qh - mu * mu]);
    Ok(CavityMatrices {
        c,
        scalars: s,
        a1,
        a1_tilde,
        a2,
        b1,
        b1_tilde,
        b2,
    })
}

impl CavityMatrices {
    /// `c A1 + (1-c) A1~`, the replica-system iteration matrix.
    pub fn combined_a1(&self) -> DMatrix<f64> {
        &self.a1 * self.c + &self.a1_tilde * (1.0 - self.c)
    }

    pub fn combined_b1(&self) -> DVector<f64> {
        &self.b1 * self.c + &self.b1_tilde * (1.0 - self.c)
    }

    /// Largest eigenvalue modulus of the replica iteration matrix.
    pub fn replica_spectral_radius(&self) -> f64 {
        self.combined_a1()
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    /// Named invertibility diagnostics of both linear systems, via the Schur
    /// complements of the upper-left blocks.
    pub fn check_invertibility(&self) -> Result<()> {
        let c = self.c;
        let eye = |k: usize| DMatrix::<f64>::identity(k, k);
        let big_b = eye(3)
            - self.a1.view((0, 0), (3, 3)) * c
            - self.a1_tilde.view((0, 0), (3, 3)) * (1.0 - c);
        let b_inv = big_b.clone().try_inverse().ok_or_else(|| {
            Error::SingularSystem(
                "replica block B = I - c A1[1..3,1..3] - (1-c) A1~[1..3,1..3] is singular".into(),
            )
        })?;
        let schur1 = eye(2)
            - self.a1.view((3, 3), (2, 2)) * c
            - self.a1.view((3, 0), (2, 3)) * (c * c) * &b_inv * self.a1.view((0, 3), (3, 2));
        if schur1.determinant().abs() < 1e-12 {
            return Err(Error::SingularSystem(
                "replica Schur complement det(I - c A1[4..5,4..5] - c^2 A1[4..5,1..3] B^-1 A1[1..3,4..5]) = 0"
                    .into(),
            ));
        }
        let ul = eye(2) - self.a2.view((0, 0), (2, 2));
        let ul_inv = ul.clone().try_inverse().ok_or_else(|| {
            Error::SingularSystem("magnetization block I - A2[1..2,1..2] is singular".into())
        })?;
        let schur2 = eye(2)
            - self.a2.view((2, 2), (2, 2))
            - self.a2.view((2, 0), (2, 2)) * &ul_inv * self.a2.view((0, 2), (2, 2));
        if schur2.determinant().abs() < 1e-12 {
            return Err(Error::SingularSystem(
                "magnetization Schur complement det(I - A2[3..4,3..4] - A2[3..4,1..2](I - A2[1..2,1..2])^-1 A2[1..2,3..4]) = 0"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Solves the two cavity systems; returns `(V_r, V_m, V_tilde)` where `V_r`
/// is the first component of `(I - c A1 - (1-c) A1~) x = c b1 + (1-c) b1~`,
/// `V_m` the component of `(I - A2) y = b2` carrying the clique
/// magnetization (the third), and `V_tilde = 1` from the correction-free
/// out-of-clique recursion.
pub fn large_clique_variance(mats: &CavityMatrices) -> Result<(f64, f64, f64)> {
    mats.check_invertibility()?;
    let n5 = DMatrix::<f64>::identity(5, 5) - mats.combined_a1();
    let x = n5
        .lu()
        .solve(&mats.combined_b1())
        .ok_or_else(|| Error::SingularSystem("replica system I - c A1 - (1-c) A1~".into()))?;
    let n4 = DMatrix::<f64>::identity(4, 4) - &mats.a2;
    let y = n4
        .lu()
        .solve(&mats.b2)
        .ok_or_else(|| Error::SingularSystem("magnetization system I - A2".into()))?;
    Ok((x[0], y[2], 1.0))
}

/// All limiting variances that apply at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitingVariance {
    pub regime: String,
    pub q: f64,
    pub mu: f64,
    pub psi: f64,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Evaluates every formula applicable to the regime at `(c, theta, theta1,
/// field)`; inapplicable or failing components are reported in `notes`.
pub fn limiting_variances(
    c: f64,
    theta: f64,
    theta1: f64,
    field: &FieldDist,
    rule: &QuadRule,
) -> Result<LimitingVariance> {
    use crate::meanfield::{classify_regime, psi_value, solve_order_parameters, Regime};
    let (q, mu) = solve_order_parameters(c, theta, theta1, field, rule)?;
    let psi = psi_value(theta, theta1, field, rule)?;
    let regime = classify_regime(theta, theta1, field, rule)?;
    let mut values = BTreeMap::new();
    let mut notes = Vec::new();
    values.insert("V_null_sk".into(), var_null_sk(theta, field, rule)?);
    match regime {
        Regime::High => {
            values.insert(
                "V_small_high".into(),
                var_small_high(theta, theta1, q, field, rule)?,
            );
        }
        Regime::Low => {
            let x = x_star_root(theta, theta1, q, field, rule)?;
            values.insert("x_star".into(), x);
            values.insert(
                "V_small_low".into(),
                var_small_low(theta, theta1, q, x, field, rule)?,
            );
        }
        Regime::Critical { tau, .. } => match var_critical(tau, theta, theta1, q, field, rule) {
            Ok(v) => {
                values.insert("v_critical".into(), v);
            }
            Err(e) => notes.push(format!("v_critical unavailable: {e}")),
        },
    }
    if !regime.is_critical() {
        let moments = moment_vector(theta, theta1, q, mu, field, rule)?;
        match cavity_matrices(c, &moments, mu, theta, theta1)
            .and_then(|m| large_clique_variance(&m))
        {
            Ok((vr, vm, vt)) => {
                values.insert("V_r".into(), vr);
                values.insert("V_m".into(), vm);
                values.insert("V_tilde".into(), vt);
            }
            Err(e) => notes.push(format!("cavity variances unavailable: {e}")),
        }
    }
    Ok(LimitingVariance {
        regime: regime.label(),
        q,
        mu,
        psi,
        values,
        notes,
    })
}
