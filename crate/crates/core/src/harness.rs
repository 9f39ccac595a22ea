//! Experiment driver: power and calibration sweeps, limit-law diagnostics,
//! phase maps, coupling-universality and comparator checks, with CSV and
//! JSON persistence.
//!
//! Every operation takes an [`ExperimentConfig`], walks its parameter grid,
//! and returns a [`ResultRecord`] embedding the config, a version tag, and
//! one metric row per (grid point, metric). Identical configs give identical
//! rows; only the recorded wall-clock time varies between runs.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::detect::{critical_test, high_temp_test, low_temp_test, TestDecision};
use crate::error::{Error, Result};
use crate::meanfield::{classify_regime, solve_order_parameters, Regime};
use crate::model::{effective_field_params, CouplingDist, FieldDist, ModelParams};
use crate::quad::QuadRule;
use crate::recovery::recover_pipeline;
use crate::sampler::{draw_batch, draw_replica_pairs, ChainConfig, SampleBatch};
use crate::variance::{
    cavity_matrices, large_clique_variance, moment_vector, var_small_high, var_small_low,
    x_star_root,
};

/// Version tag embedded in every result record.
pub const VERSION_TAG: &str = concat!("glasslab-core ", env!("CARGO_PKG_VERSION"));

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "GLASSLAB_OUT";

/// Placements used to approximate the worst case over clique positions.
pub const SUP_PLACEMENTS: usize = 10;

/// Sample-size schedule, either a formula tag or an explicit count. The
/// formula constants are free knobs; the theory fixes only the growth rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MSchedule {
    /// `m = ceil(constant * k * ln n)`.
    KLogN { constant: f64 },
    /// `m = ceil(constant * ln n) + 1`.
    LogN { constant: f64 },
    /// `m = ceil(constant * k^(1/(2 tau - 1)) * ln n)`.
    CriticalKLogN { constant: f64, tau: u32 },
    /// Fixed sample count.
    Constant { m: usize },
}

impl MSchedule {
    pub const DEFAULT_CONSTANT: f64 = 4.0;

    /// Observations per batch at system size `n` with clique size `k`.
    pub fn sample_size(&self, n: usize, k: usize) -> Result<usize> {
        let nf = n as f64;
        let m = match *self {
            MSchedule::KLogN { constant } => (constant * k as f64 * nf.ln()).ceil() as usize,
            MSchedule::LogN { constant } => (constant * nf.ln()).ceil() as usize + 1,
            MSchedule::CriticalKLogN { constant, tau } => {
                if !(2..=4).contains(&tau) {
                    return Err(Error::InvalidParams(format!(
                        "flatness order tau={tau} outside 2..=4"
                    )));
                }
                let root = (k as f64).powf(1.0 / (2.0 * tau as f64 - 1.0));
                (constant * root * nf.ln()).ceil() as usize
            }
            MSchedule::Constant { m } => m,
        };
        if m == 0 {
            return Err(Error::InvalidParams(format!(
                "schedule {self:?} gives zero observations at n={n}, k={k}"
            )));
        }
        Ok(m)
    }
}

fn default_fields() -> Vec<FieldDist> {
    vec![FieldDist::Zero]
}

fn default_coupling() -> CouplingDist {
    CouplingDist::StandardGaussian
}

fn default_replications() -> usize {
    100
}

fn default_delta() -> f64 {
    0.5
}

/// Declarative description of one experiment: a parameter grid, a sample
/// schedule, replication and seeding choices, and the chain schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub theta: Vec<f64>,
    pub theta1: Vec<f64>,
    #[serde(default = "default_fields")]
    pub fields: Vec<FieldDist>,
    pub schedule: MSchedule,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    pub chain: ChainConfig,
    /// Threshold placement inside the open interval, strictly in (0, 1).
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingDist,
    /// When set, power runs also attempt exact recovery on planted batches.
    #[serde(default)]
    pub with_recovery: bool,
    /// Output directory; falls back to `GLASSLAB_OUT`, then the working dir.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// One resolved grid point: full model parameters plus the scheduled m.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub index: usize,
    pub params: ModelParams,
    pub m: usize,
}

impl GridPoint {
    fn describe(&self) -> String {
        format!(
            "point {} (n={}, k={}, theta={}, theta1={}, field={:?}, m={})",
            self.index,
            self.params.n,
            self.params.k,
            self.params.theta,
            self.params.theta1,
            self.params.field_dist,
            self.m
        )
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParams(
                "replications must be at least 1".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParams(format!(
                "delta={} must lie strictly inside (0, 1)",
                self.delta
            )));
        }
        if self.n.is_empty() || self.k.is_empty() || self.theta.is_empty() || self.theta1.is_empty()
        {
            return Err(Error::InvalidParams(
                "every grid axis needs at least one value".into(),
            ));
        }
        if self.fields.is_empty() {
            return Err(Error::InvalidParams("need at least one field law".into()));
        }
        self.chain.validate()?;
        if self.grid()?.is_empty() {
            return Err(Error::InvalidParams("parameter grid is empty".into()));
        }
        Ok(())
    }

    /// Cartesian product of the axes; combinations with `k > n` are skipped.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let mut points = Vec::new();
        let mut index = 0;
        for &n in &self.n {
            for &k in &self.k {
                if k > n {
                    continue;
                }
                for &theta in &self.theta {
                    for &theta1 in &self.theta1 {
                        for field in &self.fields {
                            let params = ModelParams::new(n, k, theta, theta1)?
                                .with_field(*field)?
                                .with_couplings(self.coupling);
                            let m = self.schedule.sample_size(n, k)?;
                            points.push(GridPoint { index, params, m });
                            index += 1;
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".")
    }
}

/// One metric at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub n: usize,
    pub k: usize,
    pub theta: f64,
    pub theta1: f64,
    pub field: String,
    pub m: usize,
    pub metric: String,
    pub value: f64,
    pub std_error: f64,
}

/// Output of one experiment run. `rows` and `notes` are deterministic given
/// the config; `runtime_seconds` is informational only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub runtime_seconds: f64,
    pub rows: Vec<MetricRow>,
    pub notes: Vec<String>,
}

impl ResultRecord {
    fn new(config: ExperimentConfig) -> Self {
        ResultRecord {
            config,
            version: VERSION_TAG.into(),
            runtime_seconds: 0.0,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, point: &GridPoint, metric: &str, value: f64, std_error: f64) {
        self.rows.push(MetricRow {
            n: point.params.n,
            k: point.params.k,
            theta: point.params.theta,
            theta1: point.params.theta1,
            field: format!("{:?}", point.params.field_dist),
            m: point.m,
            metric: metric.into(),
            value,
            std_error,
        });
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,k,theta,theta1,field,m,metric,value,std_error")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:?},{},{},{},{}",
                r.n, r.k, r.theta, r.theta1, r.field, r.m, r.metric, r.value, r.std_error
            )?;
        }
        Ok(())
    }

    /// Write `<stem>.csv` and `<stem>.json` into the configured output
    /// directory; returns both paths.
    pub fn persist(&self, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let dir = self.config.output_dir();
        std::fs::create_dir_all(&dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        std::fs::write(&csv_path, csv)?;
        std::fs::write(&json_path, serde_json::to_vec_pretty(self)?)?;
        Ok((csv_path, json_path))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ARM_NULL: u64 = 1;
const ARM_ALT: u64 = 2;
const ARM_PLACEMENT: u64 = 3;
const ARM_DRAWS: u64 = 4;
const ARM_PAIRS: u64 = 5;

/// Deterministic seed for one (grid point, replication, purpose) cell.
fn derived_seed(base: u64, point: usize, rep: usize, arm: u64) -> u64 {
    let mut s = splitmix(base);
    s = splitmix(s ^ point as u64);
    s = splitmix(s ^ rep as u64);
    splitmix(s ^ arm)
}

fn random_clique(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Dispatch to the regime-appropriate small-clique test.
pub fn regime_test(
    batch: &SampleBatch,
    params: &ModelParams,
    delta: f64,
    rule: &QuadRule,
) -> Result<TestDecision> {
    match classify_regime(params.theta, params.theta1, &params.field_dist, rule)? {
        Regime::High => high_temp_test(batch, params, delta, None),
        Regime::Low => low_temp_test(batch, params, delta, None),
        Regime::Critical { tau, .. } => critical_test(batch, params, tau, delta, None),
    }
}

/// Mean, variance (n-1 normalization), skewness, and kurtosis.
fn sample_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let var = m2 / (n - 1.0);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let sd = m2.sqrt();
    let skew = if sd > 0.0 { m3 / (sd * sd * sd) } else { 0.0 };
    let kurt = if sd > 0.0 { m4 / (m2 * m2) } else { 0.0 };
    (mean, var, skew, kurt)
}

/// Type-I rate of the regime test on fresh null batches.
fn type_i_rate(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
    reps: usize,
) -> Result<f64> {
    let null = point.params.null_hypothesis();
    let mut rejects = 0usize;
    for rep in 0..reps {
        let seed = derived_seed(config.seed, point.index, rep, ARM_NULL);
        let batch = draw_batch(&null, point.m, &config.chain, true, seed)?;
        if regime_test(&batch, &point.params, config.delta, rule)?.reject {
            rejects += 1;
        }
    }
    Ok(rejects as f64 / reps as f64)
}

/// Power sweep: type-I rate on null batches, worst type-II rate over random
/// clique placements, and their sum (the testing risk), one set of rows per
/// grid point. Points where the regime test is undefined are skipped with a
/// note.
pub fn run_power_curve(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let rule = QuadRule::default_rule();
    let mut rec = ResultRecord::new(config.clone());
    for point in config.grid()? {
        if let Err(e) = power_point(config, &point, &rule, &mut rec) {
            rec.notes.push(format!("{} skipped: {e}", point.describe()));
        }
    }
    rec.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn power_point(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
    rec: &mut ResultRecord,
) -> Result<()> {
    let reps = config.replications;
    let type_i = type_i_rate(config, point, rule, reps)?;

    let placements = SUP_PLACEMENTS.min(reps);
    let per = reps.div_ceil(placements);
    let mut worst_type_ii = 0.0f64;
    let (mut exact_hits, mut recovery_trials) = (0usize, 0usize);
    for placement in 0..placements {
        let clique_seed = derived_seed(config.seed, point.index, placement, ARM_PLACEMENT);
        let clique = random_clique(point.params.n, point.params.k, clique_seed);
        let planted = point.params.clone().with_clique(clique.clone())?;
        let mut accepts = 0usize;
        for rep in 0..per {
            let seed = derived_seed(config.seed, point.index, placement * per + rep, ARM_ALT);
            let batch = draw_batch(&planted, point.m, &config.chain, true, seed)?;
            if !regime_test(&batch, &point.params, config.delta, rule)?.reject {
                accepts += 1;
            }
            if config.with_recovery {
                let out = recover_pipeline(&batch, &point.params, Some(&clique))?;
                if out.exact == Some(true) {
                    exact_hits += 1;
                }
                recovery_trials += 1;
            }
        }
        worst_type_ii = worst_type_ii.max(accepts as f64 / per as f64);
    }

    let se_i = binomial_se(type_i, reps);
    let se_ii = binomial_se(worst_type_ii, per);
    rec.push(point, "type_i", type_i, se_i);
    rec.push(point, "type_ii_worst", worst_type_ii, se_ii);
    rec.push(point, "risk", type_i + worst_type_ii, se_i.hypot(se_ii));
    if recovery_trials > 0 {
        let rate = exact_hits as f64 / recovery_trials as f64;
        rec.push(
            point,
            "recovery_rate",
            rate,
            binomial_se(rate, recovery_trials),
        );
    }
    Ok(())
}

fn push_standardized_moments(rec: &mut ResultRecord, point: &GridPoint, label: &str, xs: &[f64]) {
    let n = xs.len() as f64;
    let (mean, var, skew, kurt) = sample_moments(xs);
    rec.push(point, &format!("{label}_mean"), mean, (var / n).sqrt());
    rec.push(
        point,
        &format!("{label}_var_ratio"),
        var,
        var * (2.0 / (n - 1.0)).sqrt(),
    );
    rec.push(point, &format!("{label}_skewness"), skew, (6.0 / n).sqrt());
    rec.push(point, &format!("{label}_kurtosis"), kurt, (24.0 / n).sqrt());
}

/// Limit-law diagnostics: standardized moments of the scaled clique
/// magnetization (and, for proportional cliques, of the centered replica
/// overlap) against the standard normal values (0, 1, 0, 3). The samples are
/// standardized by the closed-form limiting variances, so `*_var_ratio`
/// targets 1.
pub fn run_clt_check(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let rule = QuadRule::default_rule();
    let mut rec = ResultRecord::new(config.clone());
    for point in config.grid()? {
        if let Err(e) = clt_point(config, &point, &rule, &mut rec) {
            rec.notes.push(format!("{} skipped: {e}", point.describe()));
        }
    }
    rec.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn clt_point(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
    rec: &mut ResultRecord,
) -> Result<()> {
    let params = &point.params;
    let draws = config.replications.max(2);
    let regime = classify_regime(params.theta, params.theta1, &params.field_dist, rule)?;
    let (q, mu) = solve_order_parameters(
        params.c(),
        params.theta,
        params.theta1,
        &params.field_dist,
        rule,
    )?;
    let kf = params.k as f64;
    let seed = derived_seed(config.seed, point.index, 0, ARM_DRAWS);
    match regime {
        Regime::High => {
            let v = var_small_high(params.theta, params.theta1, q, &params.field_dist, rule)?;
            let batch = draw_batch(params, draws, &config.chain, true, seed)?;
            let xs: Vec<f64> = batch
                .clique_mags()
                .iter()
                .map(|&m| kf.sqrt() * m / v.sqrt())
                .collect();
            push_standardized_moments(rec, point, "mag", &xs);
            if params.c() >= 0.05 {
                let moments =
                    moment_vector(params.theta, params.theta1, q, mu, &params.field_dist, rule)?;
                let mats = cavity_matrices(params.c(), &moments, mu, params.theta, params.theta1)?;
                let (v_r, _, _) = large_clique_variance(&mats)?;
                let pair_seed = derived_seed(config.seed, point.index, 0, ARM_PAIRS);
                let pairs = draw_replica_pairs(params, draws, &config.chain, true, pair_seed)?;
                let nf = params.n as f64;
                let xs: Vec<f64> = pairs
                    .overlaps()
                    .iter()
                    .map(|&r| nf.sqrt() * (r - q) / v_r.sqrt())
                    .collect();
                push_standardized_moments(rec, point, "overlap", &xs);
            }
        }
        Regime::Low => {
            let x_star = x_star_root(params.theta, params.theta1, q, &params.field_dist, rule)?;
            let v = var_small_low(
                params.theta,
                params.theta1,
                q,
                x_star,
                &params.field_dist,
                rule,
            )?;
            let mu_pos = x_star / params.theta1.sqrt();
            let batch = draw_batch(params, draws, &config.chain, true, seed)?;
            let xs: Vec<f64> = batch
                .clique_mags()
                .iter()
                .map(|&m| kf.sqrt() * (m.abs() - mu_pos) / v.sqrt())
                .collect();
            push_standardized_moments(rec, point, "mag_folded", &xs);
        }
        Regime::Critical { .. } => {
            rec.notes.push(format!(
                "{}: critical-regime limit laws are non-normal; see the tail check",
                point.describe()
            ));
        }
    }
    Ok(())
}

/// Risk heat map over the grid under one fixed schedule: exactly one `risk`
/// row per grid point (the CSV is the heat map). Type II is averaged over
/// per-replication random placements here; undefined points are skipped
/// with a note.
pub fn run_phase_diagram(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let rule = QuadRule::default_rule();
    let mut rec = ResultRecord::new(config.clone());
    for point in config.grid()? {
        match phase_point(config, &point, &rule) {
            Ok((risk, se)) => rec.push(&point, "risk", risk, se),
            Err(e) => rec.notes.push(format!("{} skipped: {e}", point.describe())),
        }
    }
    rec.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn phase_point(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
) -> Result<(f64, f64)> {
    let reps = config.replications;
    let type_i = type_i_rate(config, point, rule, reps)?;
    let mut accepts = 0usize;
    for rep in 0..reps {
        let clique_seed = derived_seed(config.seed, point.index, rep, ARM_PLACEMENT);
        let clique = random_clique(point.params.n, point.params.k, clique_seed);
        let planted = point.params.clone().with_clique(clique)?;
        let seed = derived_seed(config.seed, point.index, rep, ARM_ALT);
        let batch = draw_batch(&planted, point.m, &config.chain, true, seed)?;
        if !regime_test(&batch, &point.params, config.delta, rule)?.reject {
            accepts += 1;
        }
    }
    let type_ii = accepts as f64 / reps as f64;
    let se = binomial_se(type_i, reps).hypot(binomial_se(type_ii, reps));
    Ok((type_i + type_ii, se))
}

/// Coupling-law universality: identical experiments under Gaussian and
/// Rademacher couplings with common seeds; reports the per-law values and
/// their difference with joint standard errors. All supported coupling laws
/// are standardized (mean zero, unit variance, finite fourth moment) by
/// construction.
pub fn run_universality_check(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let rule = QuadRule::default_rule();
    let mut rec = ResultRecord::new(config.clone());
    let laws = [CouplingDist::StandardGaussian, CouplingDist::Rademacher];
    let labels = ["gaussian", "rademacher"];
    for point in config.grid()? {
        let mut vars = [0.0f64; 2];
        let mut var_ses = [0.0f64; 2];
        let mut risks = [0.0f64; 2];
        let mut risk_ses = [0.0f64; 2];
        let mut failed = None;
        for (idx, law) in laws.iter().enumerate() {
            let law_point = GridPoint {
                index: point.index,
                params: point.params.clone().with_couplings(*law),
                m: point.m,
            };
            match universality_arm(config, &law_point, &rule) {
                Ok((var, var_se, risk, risk_se)) => {
                    vars[idx] = var;
                    var_ses[idx] = var_se;
                    risks[idx] = risk;
                    risk_ses[idx] = risk_se;
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            rec.notes.push(format!("{} skipped: {e}", point.describe()));
            continue;
        }
        for idx in 0..2 {
            rec.push(
                &point,
                &format!("var_sqrtk_mag_{}", labels[idx]),
                vars[idx],
                var_ses[idx],
            );
            rec.push(
                &point,
                &format!("risk_{}", labels[idx]),
                risks[idx],
                risk_ses[idx],
            );
        }
        rec.push(
            &point,
            "var_sqrtk_mag_diff",
            vars[0] - vars[1],
            var_ses[0].hypot(var_ses[1]),
        );
        rec.push(
            &point,
            "risk_diff",
            risks[0] - risks[1],
            risk_ses[0].hypot(risk_ses[1]),
        );
    }
    rec.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// One coupling law's arm: `Var(sqrt(k) m)` from fresh-disorder draws plus
/// the testing risk, under seeds shared across laws.
fn universality_arm(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
) -> Result<(f64, f64, f64, f64)> {
    let draws = config.replications.max(2);
    let seed = derived_seed(config.seed, point.index, 0, ARM_DRAWS);
    let batch = draw_batch(&point.params, draws, &config.chain, true, seed)?;
    let kf = point.params.k as f64;
    let xs: Vec<f64> = batch.clique_mags().iter().map(|&m| kf.sqrt() * m).collect();
    let (_, var, _, _) = sample_moments(&xs);
    let var_se = var * (2.0 / (draws as f64 - 1.0)).sqrt();

    let reps = config.replications;
    let type_i = type_i_rate(config, point, rule, reps)?;
    let mut accepts = 0usize;
    for rep in 0..reps {
        let clique_seed = derived_seed(config.seed, point.index, rep, ARM_PLACEMENT);
        let clique = random_clique(point.params.n, point.params.k, clique_seed);
        let planted = point.params.clone().with_clique(clique)?;
        let alt_seed = derived_seed(config.seed, point.index, rep, ARM_ALT);
        let alt = draw_batch(&planted, point.m, &config.chain, true, alt_seed)?;
        if !regime_test(&alt, &point.params, config.delta, rule)?.reject {
            accepts += 1;
        }
    }
    let type_ii = accepts as f64 / reps as f64;
    let risk = type_i + type_ii;
    let risk_se = binomial_se(type_i, reps).hypot(binomial_se(type_ii, reps));
    Ok((var, var_se, risk, risk_se))
}

/// Effective-field comparator: the model with couplings replaced by an
/// effective field of width `theta sqrt(q)` on top of the original field.
/// Compares clique-magnetization statistics between the two by paired
/// simulation and reports the discrepancy against the `theta^2 k ln k / n`
/// budget. Requires `k ln k <= n/4` at every grid point.
pub fn run_prfcw_comparison(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let rule = QuadRule::default_rule();
    let mut rec = ResultRecord::new(config.clone());
    let grid = config.grid()?;
    for point in &grid {
        let (n, k) = (point.params.n as f64, point.params.k as f64);
        if k * k.ln() > n / 4.0 {
            return Err(Error::Precondition(format!(
                "comparator needs k ln k <= n/4; {} violates it",
                point.describe()
            )));
        }
    }
    for point in &grid {
        if let Err(e) = comparator_point(config, point, &rule, &mut rec) {
            rec.notes.push(format!("{} skipped: {e}", point.describe()));
        }
    }
    rec.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn comparator_point(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
    rec: &mut ResultRecord,
) -> Result<()> {
    let params = &point.params;
    let (q, _) = solve_order_parameters(
        params.c(),
        params.theta,
        params.theta1,
        &params.field_dist,
        rule,
    )?;
    let comparator = effective_field_params(params, q)?;
    let draws = config.replications.max(2);
    let seed = derived_seed(config.seed, point.index, 0, ARM_DRAWS);
    let kf = params.k as f64;
    let stats = |p: &ModelParams| -> Result<(Vec<f64>, f64, f64)> {
        let batch = draw_batch(p, draws, &config.chain, true, seed)?;
        let mags = batch.clique_mags();
        let mean = mags.iter().sum::<f64>() / draws as f64;
        let second = mags.iter().map(|&m| m * m).sum::<f64>() / draws as f64;
        Ok((mags, mean, second))
    };
    let (mags_a, mean_a, second_a) = stats(params)?;
    let (mags_b, mean_b, second_b) = stats(&comparator)?;
    let scaled = |mags: &[f64]| -> (f64, f64) {
        let xs: Vec<f64> = mags.iter().map(|&m| kf.sqrt() * m).collect();
        let (_, var, _, _) = sample_moments(&xs);
        (var, var * (2.0 / (draws as f64 - 1.0)).sqrt())
    };
    let (var_a, se_a) = scaled(&mags_a);
    let (var_b, se_b) = scaled(&mags_b);
    let mean_se = |mags: &[f64]| {
        let (_, var, _, _) = sample_moments(mags);
        (var / draws as f64).sqrt()
    };
    rec.push(
        point,
        "mag_mean_diff",
        mean_a - mean_b,
        mean_se(&mags_a).hypot(mean_se(&mags_b)),
    );
    rec.push(point, "mag_second_moment_diff", second_a - second_b, {
        let se = |m: &[f64]| {
            let sq: Vec<f64> = m.iter().map(|&x| x * x).collect();
            let (_, var, _, _) = sample_moments(&sq);
            (var / draws as f64).sqrt()
        };
        se(&mags_a).hypot(se(&mags_b))
    });
    let ratio = if var_b > 0.0 { var_a / var_b } else { f64::NAN };
    let ratio_se = if var_b > 0.0 {
        ratio * ((se_a / var_a).powi(2) + (se_b / var_b).powi(2)).sqrt()
    } else {
        f64::NAN
    };
    rec.push(point, "var_sqrtk_ratio", ratio, ratio_se);
    let budget = params.theta * params.theta * kf * kf.max(2.0).ln() / params.n as f64;
    rec.push(point, "discrepancy_budget", budget, 0.0);
    if budget > 0.0 && ratio.is_finite() {
        rec.push(
            point,
            "budget_constant",
            (ratio - 1.0).abs() / budget,
            ratio_se / budget,
        );
    }
    Ok(())
}

/// Quantile-based fit of the tail exponent `alpha` in
/// `P(|X| > t) ~ exp(-b t^alpha)`: least squares of the nominal
/// `-ln p` levels against `a + b t^alpha` over a grid of `alpha`, with a
/// leave-one-level-out spread as the error estimate. `None` when the sample
/// is too small or the tail grid degenerates.
pub fn fit_tail_exponent(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    let mut abs: Vec<f64> = values
        .iter()
        .map(|v| v.abs())
        .filter(|v| v.is_finite())
        .collect();
    if abs.len() < 100 {
        return None;
    }
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let levels = [0.25, 0.15, 0.09, 0.05, 0.03, 0.018, 0.01];
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for &p in &levels {
        if p * (n as f64) < 8.0 {
            continue;
        }
        let idx = ((1.0 - p) * n as f64).ceil() as usize;
        let t = abs[idx.min(n - 1)];
        if t > 0.0 && pts.last().is_none_or(|&(prev, _)| t > prev * (1.0 + 1e-9)) {
            pts.push((t, -p.ln()));
        }
    }
    if pts.len() < 4 {
        return None;
    }
    let alpha = best_alpha(&pts)?;
    let mut jack = Vec::new();
    for skip in 0..pts.len() {
        let subset: Vec<(f64, f64)> = pts
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &p)| p)
            .collect();
        if let Some(a) = best_alpha(&subset) {
            jack.push(a);
        }
    }
    let se = if jack.len() > 1 {
        let (_, var, _, _) = sample_moments(&jack);
        (var * (jack.len() as f64 - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    Some((alpha, se))
}

/// Alpha minimizing the least-squares error of `y ~ a + b t^alpha`.
fn best_alpha(pts: &[(f64, f64)]) -> Option<f64> {
    let mut best = (f64::INFINITY, f64::NAN);
    let mut alpha = 0.4;
    while alpha <= 4.0 {
        let xs: Vec<f64> = pts.iter().map(|&(t, _)| t.powf(alpha)).collect();
        let ys: Vec<f64> = pts.iter().map(|&(_, y)| y).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
        if sxx <= 0.0 {
            alpha += 0.005;
            continue;
        }
        let b = sxy / sxx;
        let sse: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let fit = my + b * (x - mx);
                (y - fit) * (y - fit)
            })
            .sum();
        if sse < best.0 {
            best = (sse, alpha);
        }
        alpha += 0.005;
    }
    best.1.is_finite().then_some(best.1)
}

/// Concentration diagnostics: fitted tail exponents of the centered scaled
/// replica overlap and clique magnetization (a sub-Gaussian law fits
/// `alpha = 2`; exponential tails fit near 1). At `theta = theta1 = 0` the
/// empirical tails are additionally checked against the two-sided
/// sub-Gaussian bound `2 exp(-t^2/2)` with three binomial standard errors
/// of slack; the reported margin is nonnegative when the bound holds.
pub fn run_tail_check(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let rule = QuadRule::default_rule();
    let mut rec = ResultRecord::new(config.clone());
    for point in config.grid()? {
        if let Err(e) = tail_point(config, &point, &rule, &mut rec) {
            rec.notes.push(format!("{} skipped: {e}", point.describe()));
        }
    }
    rec.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn tail_point(
    config: &ExperimentConfig,
    point: &GridPoint,
    rule: &QuadRule,
    rec: &mut ResultRecord,
) -> Result<()> {
    let params = &point.params;
    let draws = config.replications.max(2);
    let (q, _) = solve_order_parameters(
        params.c(),
        params.theta,
        params.theta1,
        &params.field_dist,
        rule,
    )?;
    let regime = classify_regime(params.theta, params.theta1, &params.field_dist, rule)?;
    let nf = params.n as f64;
    let kf = params.k as f64;

    let pair_seed = derived_seed(config.seed, point.index, 0, ARM_PAIRS);
    let pairs = draw_replica_pairs(params, draws, &config.chain, true, pair_seed)?;
    let overlap_xs: Vec<f64> = pairs
        .overlaps()
        .iter()
        .map(|&r| nf.sqrt() * (r - q))
        .collect();
    if let Some((alpha, se)) = fit_tail_exponent(&overlap_xs) {
        rec.push(point, "overlap_tail_exponent", alpha, se);
    } else {
        rec.notes
            .push(format!("{}: overlap tail fit degenerate", point.describe()));
    }

    let seed = derived_seed(config.seed, point.index, 0, ARM_DRAWS);
    let batch = draw_batch(params, draws, &config.chain, true, seed)?;
    let mags = batch.clique_mags();
    let mag_xs: Vec<f64> = match regime {
        Regime::Low => {
            let x_star = x_star_root(params.theta, params.theta1, q, &params.field_dist, rule)?;
            let mu_pos = x_star / params.theta1.sqrt();
            mags.iter()
                .map(|&m| kf.sqrt() * (m.abs() - mu_pos))
                .collect()
        }
        _ => mags.iter().map(|&m| kf.sqrt() * m).collect(),
    };
    if let Some((alpha, se)) = fit_tail_exponent(&mag_xs) {
        rec.push(point, "mag_tail_exponent", alpha, se);
    } else {
        rec.notes.push(format!(
            "{}: magnetization tail fit degenerate",
            point.describe()
        ));
    }

    if params.theta == 0.0 && params.theta1 == 0.0 {
        let margin = hoeffding_margin(&mag_xs);
        rec.push(point, "hoeffding_margin", margin, 0.0);
    }
    Ok(())
}

/// Minimal slack of `2 exp(-t^2/2) + 3 SE - empirical P(|X| > t)` over a
/// quantile grid; nonnegative when the sub-Gaussian bound holds within
/// Monte Carlo error.
fn hoeffding_margin(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut abs: Vec<f64> = xs.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut margin = f64::INFINITY;
    for &p in &[0.3, 0.2, 0.1, 0.05, 0.02] {
        if p * (n as f64) < 5.0 {
            continue;
        }
        let idx = ((1.0 - p) * n as f64).ceil() as usize;
        let t = abs[idx.min(n - 1)];
        let bound = 2.0 * (-t * t / 2.0).exp();
        let slack = bound + 3.0 * binomial_se(p, n) - p;
        margin = margin.min(slack);
    }
    margin
}
