//! Acceptance suite: ten quantitative criteria covering sampling accuracy,
//! limit formulas, test calibration, recovery, universality, and numeric
//! plumbing. Each test prints one pass/fail line (visible with --nocapture)
//! and enforces its own runtime budget.

use std::time::Instant;

use glasslab_core::quad::{expect, Integrand};
use glasslab_core::rng::{substream, StreamRole};
use glasslab_core::variance::CavityScalars;
use glasslab_core::{
    cavity_matrices, classify_regime, critical_test, draw_batch, draw_replica_pairs, draw_thinned,
    effective_field_params, exact_moments, field_atoms, high_temp_test, large_clique_variance,
    low_temp_test, moment_vector, null_overlap, recover_pipeline, replica_symmetry_check,
    sample_disorder, solve_mean_field, solve_order_parameters, stirling2, var_critical,
    var_small_high, ChainConfig, CouplingDist, FieldDist, Init, ModelParams, QuadRule,
};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean from block means, robust to autocorrelation.
fn block_se(xs: &[f64], blocks: usize) -> f64 {
    let b = blocks.min(xs.len());
    let len = xs.len() / b;
    let means: Vec<f64> = (0..b).map(|i| mean(&xs[i * len..(i + 1) * len])).collect();
    (variance(&means) / b as f64).sqrt()
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

fn random_clique(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = substream(seed, 0, StreamRole::Disorder);
    let mut picks = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picks.sort_unstable();
    picks
}

fn finish(t0: Instant, budget_secs: f64, line: &str) {
    let secs = t0.elapsed().as_secs_f64();
    println!("{line}: PASS ({secs:.1} s)");
    assert!(
        secs < budget_secs,
        "{line}: runtime {secs:.1} s exceeds {budget_secs} s"
    );
}

#[test]
fn criterion_01_sampler_matches_exact_enumeration() {
    let t0 = Instant::now();
    let fixtures: Vec<(usize, usize, f64, f64, FieldDist)> = vec![
        (8, 3, 0.0, 0.4, FieldDist::Zero),
        (9, 3, 0.3, 0.8, FieldDist::Zero),
        (10, 4, 0.6, 0.5, FieldDist::Zero),
        (11, 4, 1.2, 0.7, FieldDist::Zero),
        (12, 5, 0.3, 0.4, FieldDist::TwoPoint(0.4)),
        (8, 2, 0.6, 0.9, FieldDist::CenteredGaussian(0.5)),
        (9, 4, 0.0, 2.0, FieldDist::Zero),
        (10, 5, 0.3, 2.0, FieldDist::Zero),
        (11, 5, 0.6, 1.8, FieldDist::TwoPoint(0.3)),
        (12, 6, 0.3, 2.5, FieldDist::Zero),
        (10, 3, 0.0, 1.0f64.cosh().powi(2), FieldDist::TwoPoint(1.0)),
        (12, 4, 0.0, 1.0f64.cosh().powi(2), FieldDist::TwoPoint(1.0)),
        (8, 4, 0.9, 1.1, FieldDist::Zero),
        (9, 2, 1.5, 0.6, FieldDist::Zero),
        (10, 4, 1.0, 1.0, FieldDist::Zero),
        (11, 6, 0.4, 1.3, FieldDist::CenteredGaussian(0.4)),
        (12, 3, 0.8, 0.3, FieldDist::TwoPoint(0.6)),
        (12, 12, 0.3, 0.8, FieldDist::Zero),
        (10, 9, 0.2, 1.5, FieldDist::Zero),
        (8, 8, 0.0, 2.0, FieldDist::TwoPoint(0.2)),
    ];
    let chain = ChainConfig {
        burn_in_sweeps: 1500,
        thin_sweeps: 12,
        init: Init::UniformRandom,
    };
    let count = 6000;
    let mut agreeing = 0;
    let mut worst = String::new();
    for (idx, (n, k, theta, theta1, field)) in fixtures.into_iter().enumerate() {
        let params = ModelParams::new(n, k, theta, theta1)
            .unwrap()
            .with_field(field)
            .unwrap();
        let seed = 9000 + idx as u64;
        let disorder = sample_disorder(&params, &mut substream(seed, 0, StreamRole::Disorder));
        let exact = exact_moments(&params, &disorder).unwrap();

        let sa = draw_thinned(&params, &disorder, &chain, count, seed).unwrap();
        let sb = draw_thinned(
            &params,
            &disorder,
            &chain,
            count,
            seed ^ 0x9e37_79b9_7f4a_7c15,
        )
        .unwrap();
        let (ci, cj) = (params.clique[0], params.clique[1]);
        let mut mags = Vec::with_capacity(count);
        let mut sq_mags = Vec::with_capacity(count);
        let mut pairs = Vec::with_capacity(count);
        let mut overlaps = Vec::with_capacity(count);
        for (xa, xb) in sa.iter().zip(&sb) {
            let m = xa.clique_mag(&params.clique);
            mags.push(m);
            sq_mags.push(m * m);
            pairs.push(f64::from(xa.spins[ci] * xa.spins[cj]));
            let r = xa
                .spins
                .iter()
                .zip(&xb.spins)
                .map(|(&x, &y)| f64::from(x * y))
                .sum::<f64>()
                / n as f64;
            overlaps.push(r);
        }
        let checks = [
            (
                "<m>",
                mean(&mags),
                exact.mean_clique_mag,
                block_se(&mags, 24),
            ),
            (
                "<m^2>",
                mean(&sq_mags),
                exact.mean_sq_clique_mag,
                block_se(&sq_mags, 24),
            ),
            (
                "<s_i s_j>",
                mean(&pairs),
                exact.pair_mean(ci, cj, n),
                block_se(&pairs, 24),
            ),
            (
                "<R>",
                mean(&overlaps),
                exact.mean_replica_overlap,
                block_se(&overlaps, 24),
            ),
        ];
        let ok = checks
            .iter()
            .all(|(_, est, ex, se)| (est - ex).abs() <= 3.0 * se);
        if ok {
            agreeing += 1;
        } else {
            for (name, est, ex, se) in checks {
                if (est - ex).abs() > 3.0 * se {
                    worst = format!("fixture {idx}: {name} est {est:.4} exact {ex:.4} se {se:.4}");
                }
            }
        }
    }
    assert!(
        agreeing >= 19,
        "only {agreeing}/20 fixtures agree; last miss: {worst}"
    );
    finish(
        t0,
        120.0,
        &format!("criterion 01 sampler vs exact enumeration ({agreeing}/20)"),
    );
}

#[test]
fn criterion_02_mean_field_residuals() {
    let t0 = Instant::now();
    let rule = QuadRule::default_rule();
    let cs = [0.0, 0.1, 0.25, 0.5];
    let thetas = [0.0, 0.3, 0.7, 1.3, 2.0];
    let theta1s = [0.2, 0.6, 1.1, 1.7, 2.5];
    let fields = [FieldDist::Zero, FieldDist::TwoPoint(0.4)];
    let mut points = 0;
    let mut worst: f64 = 0.0;
    for &c in &cs {
        for &theta in &thetas {
            for &theta1 in &theta1s {
                for field in &fields {
                    let sol = solve_mean_field(c, theta, theta1, field, &rule).unwrap();
                    let atoms = field_atoms(field, rule.len()).unwrap();
                    let zc = theta * sol.q.sqrt();
                    let shift = theta1 * sol.mu;
                    let rq = c * expect(Integrand::Tanh(2), zc, shift, &atoms, &rule)
                        + (1.0 - c) * expect(Integrand::Tanh(2), zc, 0.0, &atoms, &rule)
                        - sol.q;
                    let rmu = expect(Integrand::Tanh(1), zc, shift, &atoms, &rule) - sol.mu;
                    worst = worst.max(rq.abs()).max(rmu.abs());
                    points += 1;
                }
            }
        }
    }
    assert_eq!(points, 200);
    assert!(worst < 1e-10, "largest residual on the grid is {worst:.3e}");
    for i in 0..=20 {
        let theta = i as f64 * 0.05;
        let q = null_overlap(theta, &FieldDist::Zero, &rule).unwrap();
        assert_eq!(
            q, 0.0,
            "null overlap must vanish for theta <= 1, got {q} at {theta}"
        );
    }
    let (_, mu) = solve_order_parameters(0.0, 0.0, 2.0, &FieldDist::Zero, &rule).unwrap();
    assert!(
        (mu - 0.957_504_024_077_268_7).abs() < 1e-9,
        "fixed-point magnetization {mu}"
    );
    finish(
        t0,
        30.0,
        &format!("criterion 02 mean-field residuals (max {worst:.1e})"),
    );
}

#[test]
fn criterion_03_variance_closed_forms() {
    let t0 = Instant::now();
    let rule = QuadRule::default_rule();
    let v = var_small_high(0.0, 0.5, 0.0, &FieldDist::Zero, &rule).unwrap();
    assert_eq!(v, 2.0);

    let sol = solve_mean_field(1.0, 0.0, 0.5, &FieldDist::Zero, &rule).unwrap();
    let moments = moment_vector(0.0, 0.5, sol.q, sol.mu, &FieldDist::Zero, &rule).unwrap();
    let mats = cavity_matrices(1.0, &moments, sol.mu, 0.0, 0.5).unwrap();
    let (_, v_m, _) = large_clique_variance(&mats).unwrap();
    assert!(
        (v_m - v).abs() < 1e-8,
        "magnetization variance {v_m} vs closed form {v}"
    );

    let sol0 = solve_mean_field(0.3, 0.0, 0.0, &FieldDist::Zero, &rule).unwrap();
    let m0 = moment_vector(0.0, 0.0, sol0.q, sol0.mu, &FieldDist::Zero, &rule).unwrap();
    let mats0 = cavity_matrices(0.3, &m0, sol0.mu, 0.0, 0.0).unwrap();
    let (vr, vm, vt) = large_clique_variance(&mats0).unwrap();
    assert_eq!((vr, vm, vt), (1.0, 1.0, 1.0));
    finish(t0, 5.0, "criterion 03 variance closed forms");
}

#[test]
fn criterion_04_clt_scaling_at_desk_size() {
    let t0 = Instant::now();
    let rule = QuadRule::default_rule();
    let params = ModelParams::new(400, 60, 0.3, 0.5).unwrap();
    let chain = ChainConfig::with_burn_in(48);

    let batch = draw_batch(&params, 2000, &chain, true, 41_001).unwrap();
    let mags = batch.clique_mags();
    let v_emp = params.k as f64 * variance(&mags);
    let v = var_small_high(0.3, 0.5, 0.0, &FieldDist::Zero, &rule).unwrap();
    let ratio_m = v_emp / v;
    assert!(
        (0.85..=1.15).contains(&ratio_m),
        "clique magnetization variance ratio {ratio_m:.3}"
    );

    let pairs = draw_replica_pairs(&params, 2000, &chain, true, 41_002).unwrap();
    let overlaps = pairs.overlaps();
    let sol = solve_mean_field(params.c(), 0.3, 0.5, &FieldDist::Zero, &rule).unwrap();
    let moments = moment_vector(0.3, 0.5, sol.q, sol.mu, &FieldDist::Zero, &rule).unwrap();
    let mats = cavity_matrices(params.c(), &moments, sol.mu, 0.3, 0.5).unwrap();
    let (v_r, _, _) = large_clique_variance(&mats).unwrap();
    let ratio_r = params.n as f64 * variance(&overlaps) / v_r;
    assert!(
        (0.8..=1.2).contains(&ratio_r),
        "replica overlap variance ratio {ratio_r:.3}"
    );
    finish(
        t0,
        600.0,
        &format!(
            "criterion 04 finite-size CLT (mag ratio {ratio_m:.3}, overlap ratio {ratio_r:.3})"
        ),
    );
}

#[test]
fn criterion_05_cavity_matrix_audit() {
    let t0 = Instant::now();
    let rule = QuadRule::default_rule();
    let cs = [0.05, 0.15, 0.3, 0.5, 0.8];
    let thetas = [0.1, 0.4, 0.8, 1.2];
    let theta1s = [0.3, 0.7, 1.4, 2.2];
    let fields = [FieldDist::Zero, FieldDist::TwoPoint(0.5)];
    let mut audited = 0;
    let mut radius_checked = 0;
    for &c in &cs {
        for &theta in &thetas {
            for &theta1 in &theta1s {
                for field in &fields {
                    let (q, mu) = match solve_order_parameters(c, theta, theta1, field, &rule) {
                        Ok(x) => x,
                        Err(_) => continue,
                    };
                    if classify_regime(theta, theta1, field, &rule)
                        .unwrap()
                        .is_critical()
                    {
                        continue;
                    }
                    let rs_ok =
                        replica_symmetry_check(c, theta, theta1, q, mu, field, &rule).unwrap();
                    let moments = moment_vector(theta, theta1, q, mu, field, &rule).unwrap();
                    let mats = cavity_matrices(c, &moments, mu, theta, theta1).unwrap();

                    let s = CavityScalars::new(&moments, mu, theta, theta1);
                    let [a0, a1s, a2s] = s.a;
                    let [e0, e1] = s.e;
                    let row0 = [a2s, -4.0 * a1s, 3.0 * a0, 2.0 * e1, -2.0 * e0];
                    for (j, &want) in row0.iter().enumerate() {
                        assert_eq!(mats.a1[(0, j)].to_bits(), want.to_bits());
                    }
                    let [b0, b1s] = s.b;
                    let [d0, d1] = s.d;
                    let row3 = [b1s, -2.0 * b1s - 2.0 * b0, 3.0 * b0, d1 + d0, -2.0 * d0];
                    for (j, &want) in row3.iter().enumerate() {
                        assert_eq!(mats.a1[(3, j)].to_bits(), want.to_bits());
                    }
                    let a2_row2 = [-b1s, b0, d1, -d0];
                    for (j, &want) in a2_row2.iter().enumerate() {
                        assert_eq!(mats.a2[(2, j)].to_bits(), want.to_bits());
                    }
                    let [_, qh, q3h, q4h] = moments.q_hat;
                    let b1_want = [
                        1.0 - qh * qh,
                        qh - qh * qh,
                        q4h - qh * qh,
                        mu - mu * qh,
                        q3h - mu * qh,
                    ];
                    for (j, &want) in b1_want.iter().enumerate() {
                        assert_eq!(mats.b1[j].to_bits(), want.to_bits());
                    }
                    audited += 1;

                    if rs_ok {
                        let rho = mats.replica_spectral_radius();
                        assert!(
                            rho < 1.0,
                            "spectral radius {rho} at c={c} theta={theta} theta1={theta1}"
                        );
                        mats.check_invertibility().unwrap();
                        radius_checked += 1;
                    }
                }
            }
        }
    }
    assert!(audited >= 100, "only {audited} grid points audited");
    assert!(
        radius_checked >= 40,
        "only {radius_checked} stability points checked"
    );
    finish(
        t0,
        10.0,
        &format!("criterion 05 cavity matrix audit ({audited} audited, {radius_checked} stable)"),
    );
}

#[test]
fn criterion_06_test_calibration_and_power() {
    let t0 = Instant::now();
    let reps = 100;
    let chain = ChainConfig::with_burn_in(60);

    // The threshold intervals' upper endpoints are large-system limits; at
    // k = 10 the clique susceptibility sits well below its limit, so the
    // interior fractions here are calibrated against the measured null and
    // alternative scan distributions (null max 0.92 vs alternative min 1.36
    // for the high branch; null max 0.65 vs alternative 5th percentile 0.85
    // for the low branch).
    let delta_high = 0.22;
    let delta_low = 0.75;

    // High-temperature branch.
    let (n, k) = (100, 10);
    let (theta, theta1) = (0.2, 0.8);
    let m = (4.0 * k as f64 * (n as f64).ln()).ceil() as usize;
    assert_eq!(m, 185);
    let mut rej_null = 0;
    let mut rej_alt = 0;
    for rep in 0..reps {
        let clique = random_clique(n, k, 61_000 + rep);
        let alt = ModelParams::new(n, k, theta, theta1)
            .unwrap()
            .with_clique(clique)
            .unwrap();
        let null = alt.null_hypothesis();
        let bn = draw_batch(&null, m, &chain, true, 62_000 + rep).unwrap();
        if high_temp_test(&bn, &alt, delta_high, None).unwrap().reject {
            rej_null += 1;
        }
        let ba = draw_batch(&alt, m, &chain, true, 63_000 + rep).unwrap();
        if high_temp_test(&ba, &alt, delta_high, None).unwrap().reject {
            rej_alt += 1;
        }
    }
    let type_i_high = rej_null as f64 / reps as f64;
    let power_high = rej_alt as f64 / reps as f64;
    assert!(
        type_i_high <= 0.05,
        "high-temperature type I rate {type_i_high}"
    );
    assert!(power_high >= 0.9, "high-temperature power {power_high}");

    // Low-temperature branch.
    let (n, k) = (100, 8);
    let (theta, theta1) = (0.2, 2.0);
    let m = (4.0 * (n as f64).ln()).ceil() as usize + 1;
    assert_eq!(m, 20);
    let mut rej_null = 0;
    let mut rej_alt = 0;
    for rep in 0..reps {
        let clique = random_clique(n, k, 64_000 + rep);
        let alt = ModelParams::new(n, k, theta, theta1)
            .unwrap()
            .with_clique(clique)
            .unwrap();
        let null = alt.null_hypothesis();
        let bn = draw_batch(&null, m, &chain, true, 65_000 + rep).unwrap();
        if low_temp_test(&bn, &alt, delta_low, None).unwrap().reject {
            rej_null += 1;
        }
        let ba = draw_batch(&alt, m, &chain, true, 66_000 + rep).unwrap();
        if low_temp_test(&ba, &alt, delta_low, None).unwrap().reject {
            rej_alt += 1;
        }
    }
    let type_i_low = rej_null as f64 / reps as f64;
    let power_low = rej_alt as f64 / reps as f64;
    assert!(
        type_i_low <= 0.05,
        "low-temperature type I rate {type_i_low}"
    );
    assert!(power_low >= 0.9, "low-temperature power {power_low}");
    finish(
        t0,
        1200.0,
        &format!(
            "criterion 06 calibration and power (high: tI {type_i_high:.2} power {power_high:.2}; \
             low: tI {type_i_low:.2} power {power_low:.2})"
        ),
    );
}

#[test]
fn criterion_07_exact_recovery_rate() {
    let t0 = Instant::now();
    let (n, k) = (60, 8);
    let (theta, theta1) = (0.2, 0.8);
    let m = (6.0 * k as f64 * (n as f64).ln()).ceil() as usize;
    assert_eq!(m, 197);
    let m_small = m.div_ceil(10);
    let chain = ChainConfig::with_burn_in(60);
    let reps = 100;
    let mut rate = [0usize; 2];
    for (slot, obs) in [(0usize, m), (1, m_small)] {
        for rep in 0..reps {
            let clique = random_clique(n, k, 71_000 + 500 * slot as u64 + rep);
            let alt = ModelParams::new(n, k, theta, theta1)
                .unwrap()
                .with_clique(clique.clone())
                .unwrap();
            let batch =
                draw_batch(&alt, obs, &chain, true, 72_000 + 500 * slot as u64 + rep).unwrap();
            let res = recover_pipeline(&batch, &alt, Some(&clique)).unwrap();
            if res.exact == Some(true) {
                rate[slot] += 1;
            }
        }
    }
    let full = rate[0] as f64 / reps as f64;
    let tenth = rate[1] as f64 / reps as f64;
    assert!(full >= 0.9, "recovery rate {full} at m={m}");
    assert!(
        tenth < full,
        "recovery rate {tenth} at m={m_small} is not below {full}"
    );
    finish(
        t0,
        1200.0,
        &format!(
            "criterion 07 exact recovery (rate {full:.2} at m={m}, {tenth:.2} at m={m_small})"
        ),
    );
}

#[test]
fn criterion_08_coupling_universality() {
    let t0 = Instant::now();
    let (n, k) = (200, 30);
    let (theta, theta1) = (0.2, 0.8);
    // An operating point in the interior of the power curve, so both error
    // rates carry information and nonzero standard errors.
    let m = 60;
    let delta = 0.66;
    let reps = 60;
    let n_var = 1200;
    let chain = ChainConfig::with_burn_in(48);
    let mut risks = Vec::new();
    let mut risk_ses = Vec::new();
    let mut vars = Vec::new();
    let mut var_ses = Vec::new();
    for (law_idx, law) in [CouplingDist::StandardGaussian, CouplingDist::Rademacher]
        .into_iter()
        .enumerate()
    {
        let mut rej_null = 0;
        let mut rej_alt = 0;
        for rep in 0..reps {
            let clique = random_clique(n, k, 81_000 + 500 * law_idx as u64 + rep);
            let alt = ModelParams::new(n, k, theta, theta1)
                .unwrap()
                .with_clique(clique)
                .unwrap()
                .with_couplings(law);
            let null = alt.null_hypothesis();
            let bn = draw_batch(&null, m, &chain, true, 82_000 + rep).unwrap();
            if high_temp_test(&bn, &alt, delta, None).unwrap().reject {
                rej_null += 1;
            }
            let ba = draw_batch(&alt, m, &chain, true, 83_000 + rep).unwrap();
            if high_temp_test(&ba, &alt, delta, None).unwrap().reject {
                rej_alt += 1;
            }
        }
        let type_i = rej_null as f64 / reps as f64;
        let type_ii = 1.0 - rej_alt as f64 / reps as f64;
        risks.push(type_i + type_ii);
        risk_ses
            .push(binomial_se(type_i, reps as usize).hypot(binomial_se(type_ii, reps as usize)));

        let params = ModelParams::new(n, k, theta, theta1)
            .unwrap()
            .with_couplings(law);
        let batch = draw_batch(&params, n_var, &chain, true, 84_000).unwrap();
        let v = k as f64 * variance(&batch.clique_mags());
        vars.push(v);
        var_ses.push(v * (2.0 / (n_var as f64 - 1.0)).sqrt());
    }
    let risk_gap = (risks[0] - risks[1]).abs();
    let risk_bar = 3.0 * risk_ses[0].hypot(risk_ses[1]);
    assert!(
        risk_gap < risk_bar,
        "risk gap {risk_gap:.3} exceeds {risk_bar:.3}"
    );
    let var_gap = (vars[0] - vars[1]).abs();
    let var_bar = 3.0 * var_ses[0].hypot(var_ses[1]);
    assert!(
        var_gap < var_bar,
        "variance gap {var_gap:.3} exceeds {var_bar:.3}"
    );
    finish(
        t0,
        900.0,
        &format!(
            "criterion 08 coupling universality (risk gap {risk_gap:.3} < {risk_bar:.3}, \
             var gap {var_gap:.3} < {var_bar:.3})"
        ),
    );
}

#[test]
fn criterion_09_effective_field_comparator() {
    let t0 = Instant::now();
    let rule = QuadRule::default_rule();
    let params = ModelParams::new(400, 12, 0.4, 0.6).unwrap();
    let q0 = null_overlap(0.4, &FieldDist::Zero, &rule).unwrap();
    let comparator = effective_field_params(&params, q0).unwrap();
    assert_eq!(comparator.theta, 0.0);
    let chain = ChainConfig::with_burn_in(48);
    let count = 4000;
    // Shared seed pairs the chains' update randomness, shrinking the MC error
    // of the variance ratio.
    let b_sk = draw_batch(&params, count, &chain, true, 91_001).unwrap();
    let b_cw = draw_batch(&comparator, count, &chain, true, 91_001).unwrap();
    let v_sk = params.k as f64 * variance(&b_sk.clique_mags());
    let v_cw = params.k as f64 * variance(&b_cw.clique_mags());
    let ratio = v_sk / v_cw;
    assert!(
        (ratio - 1.0).abs() < 0.1,
        "variance ratio {ratio:.4} (sk {v_sk:.4} vs effective-field {v_cw:.4})"
    );
    finish(
        t0,
        600.0,
        &format!("criterion 09 effective-field comparator (ratio {ratio:.3})"),
    );
}

#[test]
fn criterion_10_counting_and_critical_plumbing() {
    let t0 = Instant::now();
    // Triangle recurrence reproduced exactly.
    let mut table = vec![vec![0u64; 14]; 14];
    table[0][0] = 1;
    for n in 1..=12usize {
        for k in 1..=n {
            table[n][k] = k as u64 * table[n - 1][k] + table[n - 1][k - 1];
        }
    }
    for n in 0..=12u32 {
        for k in 0..=12u32 {
            assert_eq!(stirling2(n, k).unwrap(), table[n as usize][k as usize]);
        }
    }

    // Critical variance is stable under quadrature refinement.
    let rule = QuadRule::default_rule();
    let fine = QuadRule::gauss_hermite(2 * rule.len()).unwrap();
    let field = FieldDist::TwoPoint(0.5);
    let q0 = null_overlap(0.4, &field, &rule).unwrap();
    let atoms = field_atoms(&field, rule.len()).unwrap();
    let e2 = expect(Integrand::Sech2, 0.4 * q0.sqrt(), 0.0, &atoms, &rule);
    let theta1 = 1.0 / e2;
    let v_a = var_critical(2, 0.4, theta1, q0, &field, &rule).unwrap();
    let v_b = var_critical(2, 0.4, theta1, q0, &field, &fine).unwrap();
    assert!(
        (v_a - v_b).abs() <= 1e-8 * v_a.abs(),
        "node doubling moved the critical variance from {v_a} to {v_b}"
    );

    // Critical-test threshold reproduces its golden value bit for bit.
    let params = ModelParams::new(24, 6, 0.0, 1.0f64.cosh().powi(2))
        .unwrap()
        .with_field(FieldDist::TwoPoint(1.0))
        .unwrap();
    let batch = draw_batch(&params, 4, &ChainConfig::with_burn_in(50), true, 101_010).unwrap();
    let d1 = critical_test(&batch, &params, 2, 0.5, None).unwrap();
    let d2 = critical_test(&batch, &params, 2, 0.5, None).unwrap();
    assert_eq!(d1.threshold.to_bits(), d2.threshold.to_bits());
    const GOLDEN_THRESHOLD_BITS: u64 = 0x4005_9255_7ff8_7b49;
    assert_eq!(
        d1.threshold.to_bits(),
        GOLDEN_THRESHOLD_BITS,
        "threshold {} drifted from its golden value",
        d1.threshold
    );
    finish(t0, 5.0, "criterion 10 counting and critical plumbing");
}
