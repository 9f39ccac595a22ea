//! Command-line front end: single-point queries (mean-field solve, limiting
//! variances, batch simulation, hypothesis tests, clique recovery) and the
//! grid experiment drivers with CSV/JSON persistence.
//!
//! Machine-readable output goes to stdout (JSON for the single-point
//! commands, file paths for the experiment drivers); human-readable tables
//! and notes go to stderr.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glasslab_core::{
    classify_regime, draw_batch, high_temp_test, large_clique_test, limiting_variances,
    low_temp_test, recover_pipeline, regime_test, run_clt_check, run_phase_diagram,
    run_power_curve, run_prfcw_comparison, run_tail_check, run_universality_check,
    solve_mean_field, ChainConfig, CouplingDist, ExperimentConfig, FieldDist, Init, MSchedule,
    ModelParams, QuadRule, Regime, ResultRecord, SampleBatch,
};

#[derive(Parser)]
#[command(
    name = "glasslab",
    version,
    about = "Laboratory for an SK spin glass with a planted Curie-Weiss clique"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Gibbs sample batch and write it to a batch file.
    Simulate(SimulateArgs),
    /// Solve the mean-field equations at one parameter point.
    Meanfield(MeanfieldArgs),
    /// Evaluate every applicable limiting variance at one parameter point.
    Variance(VarianceArgs),
    /// Run a clique-detection test on a stored batch.
    Test(TestArgs),
    /// Recover the clique support from a stored batch.
    Recover(RecoverArgs),
    /// Type-I/type-II/risk sweep over a parameter grid.
    PowerCurve(ExperimentArgs),
    /// Risk heat map over a (theta1, k) style grid under one sample schedule.
    PhaseDiagram(ExperimentArgs),
    /// Standardized-moment diagnostics against the limiting normal laws.
    CltCheck(ExperimentArgs),
    /// Paired Gaussian-vs-Rademacher coupling comparison.
    Universality(ExperimentArgs),
    /// Paired comparison against the effective-field Curie-Weiss surrogate.
    PrfcwCompare(ExperimentArgs),
    /// Tail-exponent and concentration diagnostics.
    TailCheck(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Gaussian,
    Rademacher,
    Uniform,
}

impl From<CouplingArg> for CouplingDist {
    fn from(a: CouplingArg) -> Self {
        match a {
            CouplingArg::Gaussian => CouplingDist::StandardGaussian,
            CouplingArg::Rademacher => CouplingDist::Rademacher,
            CouplingArg::Uniform => CouplingDist::ScaledUniform,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RegimeArg {
    /// Dispatch on the solved regime.
    Auto,
    High,
    Low,
    Critical,
    /// Proportional-clique test (k comparable to n).
    Large,
}

/// Field law syntax: `zero`, `twopoint:A`, `gauss:S`, `twopoint+gauss:A,S`.
fn parse_field(s: &str) -> Result<FieldDist> {
    let (kind, rest) = match s.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (s, None),
    };
    let field = match (kind, rest) {
        ("zero", None) => FieldDist::Zero,
        ("twopoint", Some(r)) => FieldDist::TwoPoint(r.parse()?),
        ("gauss", Some(r)) => FieldDist::CenteredGaussian(r.parse()?),
        ("twopoint+gauss", Some(r)) => {
            let (a, sdev) = r
                .split_once(',')
                .context("twopoint+gauss needs two comma-separated scales")?;
            FieldDist::TwoPointPlusGaussian {
                a: a.parse()?,
                s: sdev.parse()?,
            }
        }
        _ => bail!(
            "unknown field law {s:?}; expected zero, twopoint:A, gauss:S, or twopoint+gauss:A,S"
        ),
    };
    field.validate()?;
    Ok(field)
}

/// Schedule syntax: `klogn[:C]`, `logn[:C]`, `critical[:C[:TAU]]`, `const:M`.
fn parse_schedule(s: &str) -> Result<MSchedule> {
    let mut parts = s.split(':');
    let kind = parts.next().unwrap_or_default();
    let c_default = MSchedule::DEFAULT_CONSTANT;
    let schedule = match kind {
        "klogn" => MSchedule::KLogN {
            constant: parts
                .next()
                .map(str::parse)
                .transpose()?
                .unwrap_or(c_default),
        },
        "logn" => MSchedule::LogN {
            constant: parts
                .next()
                .map(str::parse)
                .transpose()?
                .unwrap_or(c_default),
        },
        "critical" => MSchedule::CriticalKLogN {
            constant: parts
                .next()
                .map(str::parse)
                .transpose()?
                .unwrap_or(c_default),
            tau: parts.next().map(str::parse).transpose()?.unwrap_or(2),
        },
        "const" | "constant" => MSchedule::Constant {
            m: parts
                .next()
                .context("const schedule needs a sample count, e.g. const:100")?
                .parse()?,
        },
        _ => bail!(
            "unknown schedule {s:?}; expected klogn[:C], logn[:C], critical[:C[:TAU]], or const:M"
        ),
    };
    if parts.next().is_some() {
        bail!("trailing fields in schedule {s:?}");
    }
    Ok(schedule)
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    theta1: f64,
    /// Field law: zero | twopoint:A | gauss:S | twopoint+gauss:A,S.
    #[arg(long, default_value = "zero")]
    field: String,
    #[arg(long, value_enum, default_value_t = CouplingArg::Gaussian)]
    coupling: CouplingArg,
    /// Planted clique as comma-separated zero-based indices; default 0..k.
    #[arg(long, value_delimiter = ',')]
    clique: Vec<usize>,
    /// Number of observations in the batch.
    #[arg(short, long)]
    draws: usize,
    /// Burn-in sweeps per chain; default 50 n.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Thinning sweeps between kept states; default n.
    #[arg(long)]
    thin: Option<usize>,
    /// Reuse one disorder realization for every observation instead of
    /// re-sampling couplings and fields per draw.
    #[arg(long)]
    shared_disorder: bool,
    #[arg(long)]
    seed: u64,
    /// Output batch file (binary container with embedded parameters).
    #[arg(short, long)]
    out: PathBuf,
    /// Also export the spin matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct MeanfieldArgs {
    /// Clique fraction k/n in the limit.
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    theta1: f64,
    #[arg(long, default_value = "zero")]
    field: String,
}

#[derive(Args)]
struct VarianceArgs {
    /// Clique fraction k/n in the limit.
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    theta1: f64,
    #[arg(long, default_value = "zero")]
    field: String,
}

#[derive(Args)]
struct TestArgs {
    /// Batch file written by `simulate`.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
    regime: RegimeArg,
    /// Threshold placement inside the open interval, strictly in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Flatness order for the critical regime (required with --regime critical).
    #[arg(long)]
    tau: Option<u32>,
    /// Alternative-hypothesis clique size; default from the batch.
    #[arg(long)]
    k: Option<usize>,
    /// Alternative-hypothesis SK coupling strength; default from the batch.
    #[arg(long)]
    theta: Option<f64>,
    /// Alternative-hypothesis inverse temperature; default from the batch.
    #[arg(long)]
    theta1: Option<f64>,
    /// Alternative-hypothesis field law; default from the batch.
    #[arg(long)]
    field: Option<String>,
}

#[derive(Args)]
struct RecoverArgs {
    /// Batch file written by `simulate`.
    #[arg(short, long)]
    input: PathBuf,
    /// Clique size to recover; default from the batch.
    #[arg(long)]
    k: Option<usize>,
    /// Assert the solved regime instead of trusting the dispatch.
    #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
    regime: RegimeArg,
    /// Planted set for scoring, comma-separated zero-based indices.
    #[arg(long, value_delimiter = ',')]
    truth: Vec<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    field: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; grid flags are ignored when present, while
    /// --seed, --name, and --out-dir still override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name, used as the output file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    theta1: Vec<f64>,
    /// Field law axis; repeat the flag for several laws.
    #[arg(long = "field")]
    fields: Vec<String>,
    /// Sample schedule: klogn[:C] | logn[:C] | critical[:C[:TAU]] | const:M.
    #[arg(long)]
    schedule: Option<String>,
    /// Shorthand for a constant schedule with this many observations.
    #[arg(short = 'm', long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Burn-in sweeps per chain.
    #[arg(long, default_value_t = 60)]
    burn_in: usize,
    /// Thinning sweeps between kept states.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = CouplingArg::Gaussian)]
    coupling: CouplingArg,
    /// Also attempt exact recovery on planted batches (power curves only).
    #[arg(long)]
    recovery: bool,
    /// Output directory; default GLASSLAB_OUT, then the working directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Base RNG seed (mandatory unless the config file provides one).
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Meanfield(a) => meanfield(a),
        Command::Variance(a) => variance(a),
        Command::Test(a) => test(a),
        Command::Recover(a) => recover(a),
        Command::PowerCurve(a) => experiment("power-curve", a, run_power_curve),
        Command::PhaseDiagram(a) => experiment("phase-diagram", a, run_phase_diagram),
        Command::CltCheck(a) => experiment("clt-check", a, run_clt_check),
        Command::Universality(a) => experiment("universality", a, run_universality_check),
        Command::PrfcwCompare(a) => experiment("prfcw-compare", a, run_prfcw_comparison),
        Command::TailCheck(a) => experiment("tail-check", a, run_tail_check),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut params = ModelParams::new(a.n, a.k, a.theta, a.theta1)?
        .with_field(parse_field(&a.field)?)?
        .with_couplings(a.coupling.into());
    if !a.clique.is_empty() {
        params = params.with_clique(a.clique.clone())?;
    }
    let defaults = ChainConfig::for_size(a.n);
    let chain = ChainConfig {
        burn_in_sweeps: a.burn_in.unwrap_or(defaults.burn_in_sweeps),
        thin_sweeps: a.thin.unwrap_or(defaults.thin_sweeps),
        init: Init::UniformRandom,
    };
    let batch = draw_batch(&params, a.draws, &chain, !a.shared_disorder, a.seed)?;
    batch.write_binary(&a.out)?;
    if let Some(csv_path) = &a.csv {
        let mut buf = Vec::new();
        batch.write_csv(&mut buf)?;
        std::fs::write(csv_path, buf)?;
    }
    eprintln!(
        "wrote {} observations of n={} spins to {}",
        a.draws,
        a.n,
        a.out.display()
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "path": a.out,
            "n": a.n,
            "k": a.k,
            "theta": a.theta,
            "theta1": a.theta1,
            "draws": a.draws,
            "seed": a.seed,
            "fresh_disorder": !a.shared_disorder,
            "burn_in_sweeps": chain.burn_in_sweeps,
            "thin_sweeps": chain.thin_sweeps,
        }))?
    );
    Ok(())
}

fn meanfield(a: MeanfieldArgs) -> Result<()> {
    let rule = QuadRule::default_rule();
    let field = parse_field(&a.field)?;
    let sol = solve_mean_field(a.c, a.theta, a.theta1, &field, &rule)?;
    eprintln!(
        "point     c={} theta={} theta1={} field={:?}",
        a.c, a.theta, a.theta1, field
    );
    eprintln!("regime    {}", sol.regime.label());
    eprintln!("q         {:.15}", sol.q);
    eprintln!("mu        {:.15}", sol.mu);
    eprintln!("psi       {:.15}", sol.psi);
    eprintln!("rs_ok     {}", sol.rs_ok);
    eprintln!("at_ok     {}", sol.at_ok);
    eprintln!(
        "residual  {:.3e} after {} iterations",
        sol.residual, sol.iterations
    );
    println!("{}", serde_json::to_string_pretty(&sol)?);
    Ok(())
}

fn variance(a: VarianceArgs) -> Result<()> {
    let rule = QuadRule::default_rule();
    let field = parse_field(&a.field)?;
    let report = limiting_variances(a.c, a.theta, a.theta1, &field, &rule)?;
    eprintln!("regime    {}", report.regime);
    eprintln!("q         {:.15}", report.q);
    eprintln!("mu        {:.15}", report.mu);
    for (name, value) in &report.values {
        eprintln!("{name:<12} {value:.15}");
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn override_params(
    base: &ModelParams,
    k: Option<usize>,
    theta: Option<f64>,
    theta1: Option<f64>,
    field: Option<&str>,
) -> Result<ModelParams> {
    let field_dist = match field {
        Some(s) => parse_field(s)?,
        None => base.field_dist,
    };
    Ok(ModelParams::new(
        base.n,
        k.unwrap_or(base.k),
        theta.unwrap_or(base.theta),
        theta1.unwrap_or(base.theta1),
    )?
    .with_field(field_dist)?
    .with_couplings(base.coupling_dist))
}

fn test(a: TestArgs) -> Result<()> {
    let batch = SampleBatch::read_binary(&a.input)?;
    let params = override_params(&batch.params, a.k, a.theta, a.theta1, a.field.as_deref())?;
    let rule = QuadRule::default_rule();
    let decision = match a.regime {
        RegimeArg::Auto => regime_test(&batch, &params, a.delta, &rule)?,
        RegimeArg::High => high_temp_test(&batch, &params, a.delta, None)?,
        RegimeArg::Low => low_temp_test(&batch, &params, a.delta, None)?,
        RegimeArg::Critical => {
            let tau = a.tau.context("--regime critical needs --tau")?;
            glasslab_core::critical_test(&batch, &params, tau, a.delta, None)?
        }
        RegimeArg::Large => large_clique_test(&batch, &params, a.delta)?,
    };
    eprintln!(
        "{}: statistic {:.6} vs threshold {:.6} -> {}",
        decision.test_name,
        decision.statistic,
        decision.threshold,
        if decision.reject {
            "reject the null"
        } else {
            "accept the null"
        }
    );
    println!("{}", serde_json::to_string_pretty(&decision)?);
    Ok(())
}

fn recover(a: RecoverArgs) -> Result<()> {
    let batch = SampleBatch::read_binary(&a.input)?;
    let params = override_params(&batch.params, a.k, a.theta, a.theta1, a.field.as_deref())?;
    if a.regime != RegimeArg::Auto {
        let rule = QuadRule::default_rule();
        let solved = classify_regime(params.theta, params.theta1, &params.field_dist, &rule)?;
        let matches = matches!(
            (a.regime, &solved),
            (RegimeArg::High, Regime::High)
                | (RegimeArg::Low, Regime::Low)
                | (RegimeArg::Critical, Regime::Critical { .. })
        );
        if !matches {
            bail!(
                "requested regime does not match the solved regime {}; \
                 pass --regime auto or adjust the parameters",
                solved.label()
            );
        }
    }
    let truth = (!a.truth.is_empty()).then_some(a.truth.as_slice());
    let result = recover_pipeline(&batch, &params, truth)?;
    eprintln!(
        "recovered {} indices (scan {}){}",
        result.s_hat.len(),
        if result.scan_exhaustive {
            "exhaustive"
        } else {
            "greedy"
        },
        match result.exact {
            Some(true) => "; exact match with the planted set",
            Some(false) => "; differs from the planted set",
            None => "",
        }
    );
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn build_config(name: &str, a: &ExperimentArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &a.config {
        let mut config = ExperimentConfig::from_json_file(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        if let Some(seed) = a.seed {
            config.seed = seed;
        }
        if let Some(name) = &a.name {
            config.name = name.clone();
        }
        if let Some(dir) = &a.out_dir {
            config.output_dir = Some(dir.clone());
        }
        return Ok(config);
    }
    if a.n.is_empty() || a.k.is_empty() || a.theta.is_empty() || a.theta1.is_empty() {
        bail!("--n, --k, --theta, and --theta1 each need at least one value (or use --config)");
    }
    let schedule = match (&a.schedule, a.draws) {
        (Some(s), None) => parse_schedule(s)?,
        (None, Some(m)) => MSchedule::Constant { m },
        (None, None) => MSchedule::KLogN {
            constant: MSchedule::DEFAULT_CONSTANT,
        },
        (Some(_), Some(_)) => bail!("give either --schedule or --draws, not both"),
    };
    let fields = if a.fields.is_empty() {
        vec![FieldDist::Zero]
    } else {
        a.fields
            .iter()
            .map(|s| parse_field(s))
            .collect::<Result<_>>()?
    };
    let config = ExperimentConfig {
        name: a.name.clone().unwrap_or_else(|| name.to_string()),
        n: a.n.clone(),
        k: a.k.clone(),
        theta: a.theta.clone(),
        theta1: a.theta1.clone(),
        fields,
        schedule,
        replications: a.reps,
        seed: a.seed.expect("clap enforces --seed without --config"),
        chain: ChainConfig {
            burn_in_sweeps: a.burn_in,
            thin_sweeps: a.thin,
            init: Init::UniformRandom,
        },
        delta: a.delta,
        coupling: a.coupling.into(),
        with_recovery: a.recovery,
        output_dir: a.out_dir.clone(),
    };
    config.validate()?;
    Ok(config)
}

fn experiment(
    name: &str,
    args: ExperimentArgs,
    runner: fn(&ExperimentConfig) -> glasslab_core::Result<ResultRecord>,
) -> Result<()> {
    let config = build_config(name, &args)?;
    let record = runner(&config).with_context(|| format!("running {name}"))?;
    let (csv_path, json_path) = record.persist(&config.name)?;
    eprintln!(
        "{name}: {} metric rows in {:.1} s",
        record.rows.len(),
        record.runtime_seconds
    );
    eprintln!(
        "{:>5} {:>5} {:>7} {:>7} {:>18} {:>6}  {:<28} {:>14} {:>12}",
        "n", "k", "theta", "theta1", "field", "m", "metric", "value", "std_error"
    );
    const TABLE_LIMIT: usize = 40;
    for row in record.rows.iter().take(TABLE_LIMIT) {
        eprintln!(
            "{:>5} {:>5} {:>7} {:>7} {:>18} {:>6}  {:<28} {:>14.6} {:>12.6}",
            row.n,
            row.k,
            row.theta,
            row.theta1,
            row.field,
            row.m,
            row.metric,
            row.value,
            row.std_error
        );
    }
    if record.rows.len() > TABLE_LIMIT {
        eprintln!(
            "... {} more rows in the CSV",
            record.rows.len() - TABLE_LIMIT
        );
    }
    for note in &record.notes {
        eprintln!("note: {note}");
    }
    println!("{}", csv_path.display());
    println!("{}", json_path.display());
    Ok(())
}
