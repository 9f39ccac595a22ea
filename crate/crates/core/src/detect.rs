//! Hypothesis tests for a planted clique interaction: one test per
//! temperature regime plus a variant for cliques that take up a constant
//! fraction of the system.
//!
//! Every test compares a statistic of the sample batch against a threshold
//! `tau_delta = low + delta (high - low)` placed inside a regime-specific
//! open interval, and rejects the no-clique null when the statistic reaches
//! the threshold. Each test has two branches: a subset-scan branch for small
//! cliques and a global branch for large ones. The branch is picked from the
//! sizes at hand but can be forced through the `branch` argument.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::meanfield::{classify_regime, null_overlap, solve_mean_field, solve_order_parameters};
use crate::model::ModelParams;
use crate::quad::{expect, field_atoms, Integrand, QuadRule};
use crate::sampler::SampleBatch;
use crate::variance::{var_critical, var_small_high};

/// Subsets enumerated exhaustively before the scan falls back to the greedy
/// heuristic.
pub const DEFAULT_SCAN_BUDGET: u64 = 2_000_000;

/// Smallest clique fraction `k/n` accepted by [`large_clique_test`].
pub const MIN_CLIQUE_FRACTION: f64 = 0.05;

/// Fraction `k/n` above which the global low-temperature branch switches to
/// the folded-normal threshold interval.
const FOLDED_FRACTION: f64 = 0.25;

const IMPROVE_TOL: f64 = 1e-12;

/// Which sub-statistic of a test to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Maximize over candidate cliques.
    Scan,
    /// Aggregate over all spins at once.
    Global,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Scan => "scan",
            Branch::Global => "global",
        }
    }
}

/// Outcome of one hypothesis test. `reject` is `statistic >= threshold`;
/// every test uses this closed comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestDecision {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    /// Open interval the threshold was interpolated into.
    pub threshold_interval: (f64, f64),
    pub reject: bool,
    /// Which branch produced the statistic.
    pub branch: String,
    /// For scan branches, whether the scan enumerated every subset
    /// (`Some(false)` means the greedy heuristic ran); `None` for global
    /// and regime branches.
    pub exact_scan: Option<bool>,
}

/// Maximizing subset found by a scan, its objective value, and whether the
/// search was exhaustive.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    /// Sorted spin indices of the best subset found.
    pub subset: Vec<usize>,
    pub value: f64,
    pub exact: bool,
}

/// `C(n, k) <= budget`, evaluated without overflow.
fn subset_count_within(n: usize, k: usize, budget: u64) -> bool {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - k + i + 1) as u128 / (i + 1) as u128;
        if acc > budget as u128 {
            return false;
        }
    }
    true
}

fn check_inputs(batch: &SampleBatch, params: &ModelParams, delta: f64) -> Result<()> {
    params.validate()?;
    if batch.params.n != params.n {
        return Err(Error::InvalidParams(format!(
            "batch has n={} spins but the test parameters say n={}",
            batch.params.n, params.n
        )));
    }
    if batch.m == 0 {
        return Err(Error::InvalidParams("batch holds no observations".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "threshold placement delta={delta} must lie strictly inside (0, 1)"
        )));
    }
    Ok(())
}

fn decide(
    test_name: &str,
    branch: &str,
    statistic: f64,
    low: f64,
    high: f64,
    delta: f64,
    exact_scan: Option<bool>,
) -> Result<TestDecision> {
    if high.is_nan() || low.is_nan() || high <= low {
        return Err(Error::Precondition(format!(
            "threshold interval ({low}, {high}) for the {test_name} test is empty; \
             the test is vacuous at these parameters"
        )));
    }
    let threshold = low + delta * (high - low);
    Ok(TestDecision {
        test_name: test_name.into(),
        statistic,
        threshold,
        threshold_interval: (low, high),
        reject: statistic >= threshold,
        branch: branch.into(),
        exact_scan,
    })
}

/// Exhaustive maximization of the subset quadratic form `1_S^T E 1_S` over
/// all `k`-subsets, by depth-first enumeration in lexicographic order. Ties
/// keep the lexicographically first subset.
fn exact_scan_quadratic(e: &[f64], n: usize, k: usize) -> (Vec<usize>, f64) {
    fn rec(
        e: &[f64],
        n: usize,
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        cur_val: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if cur.len() == k {
            if cur_val > best.0 {
                best.0 = cur_val;
                best.1 = cur.clone();
            }
            return;
        }
        let remaining = k - cur.len();
        for j in start..=(n - remaining) {
            let mut add = e[j * n + j];
            for &i in cur.iter() {
                add += 2.0 * e[i * n + j];
            }
            cur.push(j);
            rec(e, n, k, j + 1, cur, cur_val + add, best);
            cur.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    rec(e, n, k, 0, &mut Vec::with_capacity(k), 0.0, &mut best);
    (best.1, best.0)
}

/// Seed order for the greedy scans: spins ranked by off-diagonal row sum of
/// the second-moment matrix, descending, index ascending on ties.
fn row_sum_order(e: &[f64], n: usize) -> Vec<usize> {
    let row_sum: Vec<f64> = (0..n)
        .map(|i| {
            let row = &e[i * n..(i + 1) * n];
            row.iter().sum::<f64>() - row[i]
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| row_sum[b].partial_cmp(&row_sum[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Greedy maximization of `1_S^T E 1_S`: row-sum seed, then first-improvement
/// single swaps with a bounded swap budget.
fn greedy_scan_quadratic(e: &[f64], n: usize, k: usize) -> (Vec<usize>, f64) {
    let order = row_sum_order(e, n);
    let mut subset: Vec<usize> = order[..k].to_vec();
    subset.sort_unstable();
    let mut in_set = vec![false; n];
    for &i in &subset {
        in_set[i] = true;
    }
    // t[j] = sum_{i in S} e[j][i], kept current across swaps.
    let mut t: Vec<f64> = (0..n)
        .map(|j| subset.iter().map(|&i| e[j * n + i]).sum())
        .collect();
    let swap_budget = 4 * k + 50;
    let mut swaps = 0;
    'ascent: while swaps < swap_budget {
        #[allow(clippy::needless_range_loop)]
        for si in 0..k {
            let i = subset[si];
            for o in 0..n {
                if in_set[o] {
                    continue;
                }
                let delta =
                    2.0 * (t[o] - e[o * n + i]) + e[o * n + o] - (2.0 * t[i] - e[i * n + i]);
                if delta > IMPROVE_TOL {
                    for (j, tj) in t.iter_mut().enumerate() {
                        *tj += e[j * n + o] - e[j * n + i];
                    }
                    in_set[i] = false;
                    in_set[o] = true;
                    subset[si] = o;
                    swaps += 1;
                    continue 'ascent;
                }
            }
        }
        break;
    }
    subset.sort_unstable();
    let value = subset
        .iter()
        .map(|&a| subset.iter().map(|&b| e[a * n + b]).sum::<f64>())
        .sum();
    (subset, value)
}

/// Maximize the subset quadratic form `phi_S = (1/k) 1_S^T E 1_S` of the
/// empirical second-moment matrix over `k`-subsets. Exhaustive when `C(n,k)`
/// fits the budget, greedy otherwise; the result records which ran.
pub fn scan_statistic(batch: &SampleBatch, k: usize, budget: u64) -> Result<ScanResult> {
    let n = batch.params.n;
    if k == 0 || k > n {
        return Err(Error::InvalidParams(format!(
            "scan needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if batch.m == 0 {
        return Err(Error::InvalidParams("batch holds no observations".into()));
    }
    let e = batch.second_moment_matrix();
    let exact = subset_count_within(n, k, budget);
    let (subset, raw) = if exact {
        exact_scan_quadratic(&e, n, k)
    } else {
        greedy_scan_quadratic(&e, n, k)
    };
    Ok(ScanResult {
        subset,
        value: raw / k as f64,
        exact,
    })
}

/// Exhaustive maximization of the mean absolute subset magnetization,
/// `(1/(k m)) sum_l |sum_{i in S} s_i^(l)|`.
fn exact_scan_abs_mean(batch: &SampleBatch, k: usize) -> (Vec<usize>, f64) {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        batch: &SampleBatch,
        n: usize,
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        u: &mut [i32],
        best: &mut (f64, Vec<usize>),
    ) {
        if cur.len() == k {
            let val: f64 = u.iter().map(|&x| f64::from(x.abs())).sum();
            if val > best.0 {
                best.0 = val;
                best.1 = cur.clone();
            }
            return;
        }
        let remaining = k - cur.len();
        for j in start..=(n - remaining) {
            for (l, ul) in u.iter_mut().enumerate() {
                *ul += i32::from(batch.config(l)[j]);
            }
            cur.push(j);
            rec(batch, n, k, j + 1, cur, u, best);
            cur.pop();
            for (l, ul) in u.iter_mut().enumerate() {
                *ul -= i32::from(batch.config(l)[j]);
            }
        }
    }
    let n = batch.params.n;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut u = vec![0i32; batch.m];
    rec(
        batch,
        n,
        k,
        0,
        &mut Vec::with_capacity(k),
        &mut u,
        &mut best,
    );
    let norm = (k * batch.m) as f64;
    (best.1, best.0 / norm)
}

/// Greedy counterpart of [`exact_scan_abs_mean`]: seeded by second-moment
/// row sums, improved by first-improvement single swaps on the absolute-mean
/// objective with per-observation subset sums kept incrementally.
fn greedy_scan_abs_mean(batch: &SampleBatch, k: usize) -> (Vec<usize>, f64) {
    let n = batch.params.n;
    let m = batch.m;
    let e = batch.second_moment_matrix();
    let order = row_sum_order(&e, n);
    let mut subset: Vec<usize> = order[..k].to_vec();
    subset.sort_unstable();
    let mut in_set = vec![false; n];
    for &i in &subset {
        in_set[i] = true;
    }
    let mut u: Vec<i32> = (0..m)
        .map(|l| subset.iter().map(|&i| i32::from(batch.config(l)[i])).sum())
        .collect();
    let swap_budget = 4 * k + 50;
    let mut swaps = 0;
    'ascent: while swaps < swap_budget {
        #[allow(clippy::needless_range_loop)]
        for si in 0..k {
            let i = subset[si];
            for o in 0..n {
                if in_set[o] {
                    continue;
                }
                let delta: f64 = (0..m)
                    .map(|l| {
                        let row = batch.config(l);
                        let next = u[l] - i32::from(row[i]) + i32::from(row[o]);
                        f64::from(next.abs() - u[l].abs())
                    })
                    .sum();
                if delta > IMPROVE_TOL {
                    for (l, ul) in u.iter_mut().enumerate() {
                        let row = batch.config(l);
                        *ul += i32::from(row[o]) - i32::from(row[i]);
                    }
                    in_set[i] = false;
                    in_set[o] = true;
                    subset[si] = o;
                    swaps += 1;
                    continue 'ascent;
                }
            }
        }
        break;
    }
    subset.sort_unstable();
    let value: f64 = u.iter().map(|&x| f64::from(x.abs())).sum::<f64>() / (k * m) as f64;
    (subset, value)
}

/// Maximize the mean absolute subset magnetization over `k`-subsets; the
/// low-temperature analogue of [`scan_statistic`].
pub fn scan_abs_mean(batch: &SampleBatch, k: usize, budget: u64) -> Result<ScanResult> {
    let n = batch.params.n;
    if k == 0 || k > n {
        return Err(Error::InvalidParams(format!(
            "scan needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if batch.m == 0 {
        return Err(Error::InvalidParams("batch holds no observations".into()));
    }
    let exact = subset_count_within(n, k, budget);
    let (subset, value) = if exact {
        exact_scan_abs_mean(batch, k)
    } else {
        greedy_scan_abs_mean(batch, k)
    };
    Ok(ScanResult {
        subset,
        value,
        exact,
    })
}

/// High-temperature test. Scan branch (default when `k^3 <= n^2`): the
/// centered subset quadratic form `sup_S phi_S - 1` against a threshold in
/// `(0, V)` with `V` the limiting clique-sum variance. Global branch: the
/// centered squared total sum `(1/(m k)) sum_j ((sum_i s_i)^2 - n)` against
/// `(0, (2 theta1 E - theta1 (1 + theta1) E^2) / (1 - theta1 E)^2)` where
/// `E = E[sech^2(theta sqrt(q) z + h)]`.
pub fn high_temp_test(
    batch: &SampleBatch,
    params: &ModelParams,
    delta: f64,
    branch: Option<Branch>,
) -> Result<TestDecision> {
    check_inputs(batch, params, delta)?;
    let rule = QuadRule::default_rule();
    let regime = classify_regime(params.theta, params.theta1, &params.field_dist, &rule)?;
    if !regime.is_high() {
        return Err(Error::RegimeMismatch {
            expected: "high temperature".into(),
            found: regime.label(),
        });
    }
    let q0 = null_overlap(params.theta, &params.field_dist, &rule)?;
    let (n, k, m) = (params.n, params.k, batch.m);
    let branch = branch.unwrap_or(if (k as u128).pow(3) <= (n as u128).pow(2) {
        Branch::Scan
    } else {
        Branch::Global
    });
    match branch {
        Branch::Scan => {
            let v = var_small_high(params.theta, params.theta1, q0, &params.field_dist, &rule)?;
            let scan = scan_statistic(batch, k, DEFAULT_SCAN_BUDGET)?;
            decide(
                "high_temp",
                "scan",
                scan.value - 1.0,
                0.0,
                v,
                delta,
                Some(scan.exact),
            )
        }
        Branch::Global => {
            let atoms = field_atoms(&params.field_dist, rule.len())?;
            let e2 = expect(
                Integrand::Sech2,
                params.theta * q0.sqrt(),
                0.0,
                &atoms,
                &rule,
            );
            let t1 = params.theta1;
            let upper =
                (2.0 * t1 * e2 - t1 * (1.0 + t1) * e2 * e2) / ((1.0 - t1 * e2) * (1.0 - t1 * e2));
            let nf = n as f64;
            let stat =
                batch.total_sums().iter().map(|&s| s * s - nf).sum::<f64>() / (m as f64 * k as f64);
            decide("high_temp", "global", stat, 0.0, upper, delta, None)
        }
    }
}

/// Low-temperature test. Scan branch (default when `k^2 < n`): the maximal
/// mean absolute subset magnetization against a threshold in `(0, x)`, with
/// `x` the positive mean-field magnetization. Global branch: the mean
/// absolute total sum scaled by `1/k`; for `k/n` above a quarter the
/// threshold interval is the folded-normal one, otherwise `(0, x)`.
pub fn low_temp_test(
    batch: &SampleBatch,
    params: &ModelParams,
    delta: f64,
    branch: Option<Branch>,
) -> Result<TestDecision> {
    check_inputs(batch, params, delta)?;
    let rule = QuadRule::default_rule();
    let regime = classify_regime(params.theta, params.theta1, &params.field_dist, &rule)?;
    if !regime.is_low() {
        return Err(Error::RegimeMismatch {
            expected: "low temperature".into(),
            found: regime.label(),
        });
    }
    let (n, k, m) = (params.n, params.k, batch.m);
    let (_, x) = solve_order_parameters(
        params.c(),
        params.theta,
        params.theta1,
        &params.field_dist,
        &rule,
    )?;
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Precondition(
            "mean-field magnetization is zero; the low-temperature statistic has no separation"
                .into(),
        ));
    }
    let branch = branch.unwrap_or(if k * k < n {
        Branch::Scan
    } else {
        Branch::Global
    });
    match branch {
        Branch::Scan => {
            let scan = scan_abs_mean(batch, k, DEFAULT_SCAN_BUDGET)?;
            decide(
                "low_temp",
                "scan",
                scan.value,
                0.0,
                x,
                delta,
                Some(scan.exact),
            )
        }
        Branch::Global => {
            let kf = k as f64;
            let stat = batch.total_sums().iter().map(|&s| s.abs()).sum::<f64>() / (m as f64 * kf);
            let (low, high) = if (k as f64) >= FOLDED_FRACTION * n as f64 {
                let nf = n as f64;
                let ratio = nf.sqrt() / kf;
                let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
                let low = (2.0 * nf / (std::f64::consts::PI * kf * kf)).sqrt();
                let high = ratio
                    * (2.0 / std::f64::consts::PI).sqrt()
                    * (-x * x * kf * kf / (2.0 * nf)).exp()
                    + x * (1.0 - 2.0 * std_normal.cdf(-x * kf / nf.sqrt()));
                (low, high)
            } else {
                (0.0, x)
            };
            decide("low_temp", "global", stat, low, high, delta, None)
        }
    }
}

/// Critical-temperature test for flatness order `tau`. Scan branch (default
/// when `k^(8 tau - 5) < n^(4 tau - 2)`): the scaled subset quadratic form
/// `k^(-(4 tau - 3)/(2 tau - 1)) 1_S^T E 1_S`. Global branch: the equally
/// scaled centered squared total sum. Both use a threshold inside
/// `(0, (2 v)^(1/(2 tau - 1)) Gamma((2 tau + 1)/(4 tau - 2)) / sqrt(pi))`
/// with `v` the critical-regime variance.
pub fn critical_test(
    batch: &SampleBatch,
    params: &ModelParams,
    tau: u32,
    delta: f64,
    branch: Option<Branch>,
) -> Result<TestDecision> {
    check_inputs(batch, params, delta)?;
    let rule = QuadRule::default_rule();
    let regime = classify_regime(params.theta, params.theta1, &params.field_dist, &rule)?;
    match regime {
        crate::meanfield::Regime::Critical { tau: t, .. } if t == tau => {}
        crate::meanfield::Regime::Critical { tau: t, .. } => {
            return Err(Error::InvalidParams(format!(
                "flatness order at these parameters is {t}, not the requested {tau}"
            )));
        }
        other => {
            return Err(Error::RegimeMismatch {
                expected: "critical temperature".into(),
                found: other.label(),
            });
        }
    }
    let q0 = null_overlap(params.theta, &params.field_dist, &rule)?;
    let v = var_critical(
        tau,
        params.theta,
        params.theta1,
        q0,
        &params.field_dist,
        &rule,
    )?;
    let tf = tau as f64;
    let upper = (2.0 * v).powf(1.0 / (2.0 * tf - 1.0)) * gamma((2.0 * tf + 1.0) / (4.0 * tf - 2.0))
        / std::f64::consts::PI.sqrt();
    let (n, k, m) = (params.n, params.k, batch.m);
    let branch = branch.unwrap_or(
        if (8.0 * tf - 5.0) * (k as f64).ln() < (4.0 * tf - 2.0) * (n as f64).ln() {
            Branch::Scan
        } else {
            Branch::Global
        },
    );
    let scale = (k as f64).powf(-(4.0 * tf - 3.0) / (2.0 * tf - 1.0));
    match branch {
        Branch::Scan => {
            let scan = scan_statistic(batch, k, DEFAULT_SCAN_BUDGET)?;
            let stat = scan.value * k as f64 * scale;
            decide(
                "critical",
                "scan",
                stat,
                0.0,
                upper,
                delta,
                Some(scan.exact),
            )
        }
        Branch::Global => {
            let nf = n as f64;
            let stat =
                batch.total_sums().iter().map(|&s| s * s - nf).sum::<f64>() * scale / m as f64;
            decide("critical", "global", stat, 0.0, upper, delta, None)
        }
    }
}

/// Test for cliques taking up a constant fraction `c = k/n` of the system.
/// Branches on the regime rather than on a scan budget: in the high
/// regime the normalized squared total sum `(1/(m n)) sum_j (sum_i s_i)^2`
/// against `(1, c V + (1 - c))`; in the low regime the mean absolute
/// magnetization `(1/(m n)) sum_j |sum_i s_i|` against `(0, mu)`. Requires
/// the replica-symmetry and stability-line checks to pass.
pub fn large_clique_test(
    batch: &SampleBatch,
    params: &ModelParams,
    delta: f64,
) -> Result<TestDecision> {
    check_inputs(batch, params, delta)?;
    let c = params.c();
    if c < MIN_CLIQUE_FRACTION {
        return Err(Error::Precondition(format!(
            "clique fraction c={c:.4} is below {MIN_CLIQUE_FRACTION}; \
             this test needs k comparable to n"
        )));
    }
    let rule = QuadRule::default_rule();
    let sol = solve_mean_field(c, params.theta, params.theta1, &params.field_dist, &rule)?;
    if !sol.rs_ok {
        return Err(Error::Precondition(
            "replica symmetry condition fails at the solved order parameters".into(),
        ));
    }
    if !sol.at_ok {
        return Err(Error::Precondition(
            "stability line check fails at the solved order parameters".into(),
        ));
    }
    let (n, m) = (params.n, batch.m);
    let nf = n as f64;
    if sol.regime.is_high() {
        let atoms = field_atoms(&params.field_dist, rule.len())?;
        let e2 = expect(
            Integrand::Sech2,
            params.theta * sol.q.sqrt(),
            params.theta1 * sol.mu,
            &atoms,
            &rule,
        );
        let t1 = params.theta1;
        let v = (1.0 - t1 * e2 * e2) / ((1.0 - t1 * e2) * (1.0 - t1 * e2));
        let stat = batch.total_sums().iter().map(|&s| s * s).sum::<f64>() / (m as f64 * nf);
        decide(
            "large_clique",
            "high",
            stat,
            1.0,
            c * v + (1.0 - c),
            delta,
            None,
        )
    } else if sol.regime.is_low() {
        let stat = batch.total_sums().iter().map(|&s| s.abs()).sum::<f64>() / (m as f64 * nf);
        decide("large_clique", "low", stat, 0.0, sol.mu, delta, None)
    } else {
        Err(Error::RegimeMismatch {
            expected: "high or low temperature".into(),
            found: sol.regime.label(),
        })
    }
}
