//! Sampler correctness against the exact oracle on small fixed instances:
//! moment agreement within Monte Carlo error, burn-in adequacy under
//! doubling, and the sign symmetry forced by zero fields.

use glasslab_core::rng::{substream, StreamRole};
use glasslab_core::{
    draw_thinned, exact_moments, sample_disorder, ChainConfig, FieldDist, ModelParams,
};

/// Thinned-chain estimate of clique-magnetization moments on one disorder,
/// with a crude effective-sample-size from the thinning schedule.
fn chain_moments(
    params: &ModelParams,
    disorder: &glasslab_core::Disorder,
    chain: &ChainConfig,
    count: usize,
    seed: u64,
) -> (f64, f64) {
    let configs = draw_thinned(params, disorder, chain, count, seed).unwrap();
    let mags: Vec<f64> = configs
        .iter()
        .map(|c| c.clique_mag(&params.clique))
        .collect();
    let mean = mags.iter().sum::<f64>() / count as f64;
    let second = mags.iter().map(|&m| m * m).sum::<f64>() / count as f64;
    (mean, second)
}

#[test]
fn thinned_chain_matches_exact_second_moment() {
    let params = ModelParams::new(10, 4, 0.5, 1.0)
        .unwrap()
        .with_field(FieldDist::TwoPoint(0.3))
        .unwrap();
    let disorder = sample_disorder(&params, &mut substream(21, 0, StreamRole::Disorder));
    let exact = exact_moments(&params, &disorder).unwrap();
    let chain = ChainConfig {
        burn_in_sweeps: 500,
        thin_sweeps: 10,
        init: Default::default(),
    };
    let count = 4000;
    let (mean, second) = chain_moments(&params, &disorder, &chain, count, 77);
    // Bernoulli-style bounds: |m| <= 1 so Var < 1; thin_sweeps = n keeps
    // autocorrelation small and 3/sqrt(count) is a generous envelope.
    let tol = 3.0 / (count as f64).sqrt();
    assert!((mean - exact.mean_clique_mag).abs() < tol, "mean");
    assert!(
        (second - exact.mean_sq_clique_mag).abs() < tol,
        "second moment"
    );
}

#[test]
fn doubling_burn_in_leaves_moments_within_noise() {
    let params = ModelParams::new(12, 5, 0.4, 1.2).unwrap();
    let disorder = sample_disorder(&params, &mut substream(4, 0, StreamRole::Disorder));
    let count = 2500;
    let base = ChainConfig {
        burn_in_sweeps: 600,
        thin_sweeps: 12,
        init: Default::default(),
    };
    let doubled = ChainConfig {
        burn_in_sweeps: 1200,
        thin_sweeps: 12,
        init: Default::default(),
    };
    let (_, s1) = chain_moments(&params, &disorder, &base, count, 13);
    let (_, s2) = chain_moments(&params, &disorder, &doubled, count, 14);
    let se = 2.0 / (count as f64).sqrt();
    assert!(
        (s1 - s2).abs() < 3.0 * se,
        "burn-in sensitivity {s1} vs {s2}"
    );
}

#[test]
fn zero_field_magnetization_is_sign_symmetric() {
    let params = ModelParams::new(10, 5, 0.4, 1.0).unwrap();
    let batch =
        glasslab_core::draw_batch(&params, 4000, &ChainConfig::with_burn_in(100), true, 5).unwrap();
    let mags = batch.clique_mags();
    // With h = 0 the Gibbs measure is even in the spins, and fresh disorder
    // per observation breaks any quenched asymmetry: the signed mean must
    // vanish at Monte Carlo scale while |m| stays macroscopic.
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    let mean_abs = mags.iter().map(|m| m.abs()).sum::<f64>() / mags.len() as f64;
    assert!(
        mean.abs() < 4.0 / (mags.len() as f64).sqrt() + 0.02,
        "signed mean {mean}"
    );
    assert!(mean_abs > 0.1, "absolute mean {mean_abs}");
    // Counts of strictly positive and strictly negative magnetizations agree
    // to binomial accuracy.
    let pos = mags.iter().filter(|&&m| m > 0.0).count() as f64;
    let neg = mags.iter().filter(|&&m| m < 0.0).count() as f64;
    let se = 0.5 * (mags.len() as f64).sqrt();
    assert!(
        (pos - neg).abs() < 4.0 * se,
        "sign imbalance {pos} vs {neg}"
    );
}
