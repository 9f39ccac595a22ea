//! Simulation and inference laboratory for a Sherrington-Kirkpatrick spin
//! glass with a planted Curie-Weiss clique.
//!
//! The crate covers the full desk-scale workflow: exact Gibbs summation for
//! small systems, heat-bath Markov chain sampling, mean-field and replica
//! machinery (order parameters, regime classification, stability checks),
//! closed-form limiting variances, hypothesis tests for the presence of the
//! clique, recovery of its support, and a reproducible experiment harness.

pub mod detect;
pub mod error;
pub mod exact;
pub mod harness;
pub mod meanfield;
pub mod model;
pub mod quad;
pub mod recovery;
pub mod rng;
pub mod sampler;
pub mod variance;

pub use detect::{
    critical_test, high_temp_test, large_clique_test, low_temp_test, scan_abs_mean, scan_statistic,
    Branch, ScanResult, TestDecision, DEFAULT_SCAN_BUDGET,
};
pub use error::{Error, Result};
pub use exact::{
    exact_moments, quenched_average, ExactMoments, MomentFixture, QuenchedMoments, MAX_EXACT_N,
};
pub use harness::{
    fit_tail_exponent, regime_test, run_clt_check, run_phase_diagram, run_power_curve,
    run_prfcw_comparison, run_tail_check, run_universality_check, ExperimentConfig, GridPoint,
    MSchedule, MetricRow, ResultRecord, OUTPUT_DIR_ENV, VERSION_TAG,
};
pub use meanfield::{
    at_line_check, classify_regime, find_rs_crossing, flatness, null_overlap, phi, psi_value,
    replica_symmetry_check, solve_mean_field, solve_order_parameters, Flatness, MeanFieldSolution,
    Regime, FP_TOL, REGIME_TOL,
};
pub use model::{
    effective_field_params, hamiltonian, sample_disorder, CouplingDist, Disorder, FieldDist,
    ModelParams, SpinConfig,
};
pub use quad::{expect, field_atoms, log_cosh, sech2, Integrand, QuadRule};
pub use recovery::{almost_exact_recover, recover_pipeline, screen, RecoveryResult};
pub use sampler::{
    draw_batch, draw_replica_pairs, draw_thinned, ChainConfig, Init, ReplicaPairs, SampleBatch,
};
pub use variance::{
    cavity_matrices, large_clique_variance, limiting_variances, moment_vector, stirling2,
    var_critical, var_null_sk, var_small_high, var_small_low, x_star_root, CavityMatrices,
    LimitingVariance, MomentVector,
};
