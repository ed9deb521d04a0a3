//! The `spd-manova` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (singular
//! scatter, degenerate variance, non-SPD intermediate), 3 input that cannot
//! be read or parsed.

pub mod dataset;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use spd_manova::estimation::{
    dispersion_estimate, frechet_mean, geodesic_regression, regression_dispersion, spherical_variance,
    DispersionEstimate, FitDiagnostics, GroupedSample,
};
use spd_manova::geometry::{tangent_dim, SpdMatrix};
use spd_manova::inference::{frechet_anova, riemannian_manova};
use spd_manova::normal::Dispersion;
use spd_manova::simulation::{
    geometry_audit, simulate_consistency, simulate_null, simulate_null_curve, simulate_power, AlternativeSpec,
    SimConfig,
};
use spd_manova::tolerances::{Tolerances, MEAN_MAX_ITER, MEAN_TOL};
use thiserror::Error;

use report::Envelope;

/// Environment variable capping the worker threads (0 or unset = all cores).
pub const THREADS_ENV: &str = "SPD_MANOVA_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Library(#[from] spd_manova::Error),

    #[error("{input}{}: {cause}", line.map(|l| format!(": line {l}")).unwrap_or_default())]
    Parse {
        input: String,
        line: Option<u64>,
        cause: String,
    },

    #[error("cannot write {path}: {cause}")]
    Output { path: String, cause: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Output { .. } => 1,
            CliError::Library(e) if e.is_usage() => 1,
            CliError::Library(_) => 2,
            CliError::Parse { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spd-manova", version, about = "Tests of equal means for samples of SPD matrices")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the JSON result envelope to this file ("-" for standard output).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Record wall time in the JSON envelope.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Grouped CSV file.
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// CSV with predictor columns x_1..x_k followed by matrix columns.
    #[arg(long, short)]
    input: PathBuf,
    /// Gradient-norm tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Matrix dimension.
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Number of groups.
    #[arg(long, default_value_t = 3)]
    g: usize,
    /// Observations per group.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Isotropic dispersion Γ = sigma2 · I.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
}

#[derive(Debug, Args)]
struct NullArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Also run the calibration at these per-group sizes.
    #[arg(long, value_delimiter = ',')]
    curve: Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Geodesic displacements of the moved group.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.4")]
    theta: Vec<f64>,
    /// Group moved under the alternative (1-based).
    #[arg(long, default_value_t = 1)]
    displaced: usize,
    /// Write long-format theta,test,power,se rows to this file.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "50,200,800")]
    n_grid: Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Matrix dimensions to audit.
    #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
    p: Vec<usize>,
    /// Random triples per dimension.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Subcommand)]
enum Simulate {
    /// Null calibration of both tests.
    Null(NullArgs),
    /// Power of both tests with one group displaced.
    Power(PowerArgs),
    /// Convergence of the mean and dispersion estimators.
    Consistency(ConsistencyArgs),
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Riemannian MANOVA (Wilks' Lambda) test of equal group means.
    Manova(InputArgs),
    /// Frechet ANOVA test based on distances only.
    FrechetAnova(InputArgs),
    /// Frechet mean, spherical variance and dispersion per group and pooled.
    Estimate(InputArgs),
    /// Geodesic regression with residual dispersion.
    Regress(RegressArgs),
    #[command(subcommand)]
    Simulate(Simulate),
    /// Numerical audit of the geometry layer.
    AuditGeometry(AuditArgs),
}

/// Mean, spread and dispersion of one set of observations.
#[derive(Debug, Serialize)]
pub struct Estimate {
    pub label: String,
    pub n: usize,
    pub mean: SpdMatrix,
    pub mean_fit: FitDiagnostics,
    pub spherical_variance: f64,
    pub dispersion: Option<DispersionEstimate>,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub groups: Vec<Estimate>,
    pub pooled: Estimate,
}

fn estimate(label: &str, sample: &[SpdMatrix]) -> Result<Estimate, CliError> {
    let (mean, mean_fit) = frechet_mean(sample, MEAN_TOL, MEAN_MAX_ITER)?;
    let dispersion = if sample.len() >= 2 {
        Some(dispersion_estimate(sample, &mean)?)
    } else {
        None
    };
    Ok(Estimate {
        label: label.to_string(),
        n: sample.len(),
        spherical_variance: spherical_variance(sample, &mean)?,
        mean,
        mean_fit,
        dispersion,
    })
}

pub fn estimate_all(sample: &GroupedSample) -> Result<EstimateReport, CliError> {
    let groups = sample
        .groups()
        .iter()
        .map(|g| estimate(&g.label, &g.observations))
        .collect::<Result<_, _>>()?;
    Ok(EstimateReport {
        groups,
        pooled: estimate("pooled", &sample.pooled())?,
    })
}

/// What a command produced: a table for the terminal and a JSON payload.
struct Outcome {
    table: String,
    config: Value,
    result: Value,
}

fn value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn base_config(seed: Option<u64>) -> Value {
    json!({ "seed": seed, "tolerances": Tolerances::default() })
}

fn with(mut config: Value, extra: Value) -> Value {
    if let (Value::Object(c), Value::Object(e)) = (&mut config, extra) {
        c.extend(e);
    }
    config
}

fn design(d: &DesignArgs, reps: usize) -> Result<SimConfig, CliError> {
    if d.p == 0 {
        return Err(CliError::Usage("--p must be positive".into()));
    }
    let gamma = Dispersion::isotropic(tangent_dim(d.p), d.sigma2)?;
    Ok(SimConfig::new(SpdMatrix::identity(d.p), gamma, vec![d.n; d.g], reps, d.seed, d.alpha)?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        cause: e.to_string(),
    })
}

fn input_outcome(name: &str, args: &InputArgs) -> Result<Outcome, CliError> {
    let sample = dataset::parse_dataset(&args.input)?;
    let config = with(
        base_config(None),
        json!({ "input": args.input.display().to_string(), "p": sample.p(), "g": sample.g(), "n": sample.n() }),
    );
    let labels: Vec<String> = sample.groups().iter().map(|g| g.label.clone()).collect();
    Ok(match name {
        "manova" => {
            let r = riemannian_manova(&sample)?;
            Outcome {
                table: report::manova_table(&r),
                config,
                result: with(value(&r), json!({ "labels": labels })),
            }
        }
        "frechet-anova" => {
            let r = frechet_anova(&sample)?;
            Outcome {
                table: report::frechet_table(&labels, &r),
                config,
                result: with(value(&r), json!({ "labels": labels })),
            }
        }
        _ => {
            let r = estimate_all(&sample)?;
            Outcome {
                table: report::estimate_table(&r),
                config,
                result: value(&r),
            }
        }
    })
}

fn execute(command: &Command) -> Result<(String, Outcome, &OutputArgs), CliError> {
    Ok(match command {
        Command::Manova(a) => ("manova".into(), input_outcome("manova", a)?, &a.output),
        Command::FrechetAnova(a) => ("frechet-anova".into(), input_outcome("frechet-anova", a)?, &a.output),
        Command::Estimate(a) => ("estimate".into(), input_outcome("estimate", a)?, &a.output),
        Command::Regress(a) => {
            let data = dataset::parse_regression(&a.input)?;
            let (model, fit) = geodesic_regression(&data.xs, &data.cs, a.tol, a.max_iter)?;
            let disp = regression_dispersion(&model, &data.xs, &data.cs)?;
            let coefficients: Vec<Value> = model
                .coefficients()
                .iter()
                .map(|v| value(v.matrix().row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()))
                .collect();
            let outcome = Outcome {
                table: report::regression_table(&model, &fit, &disp),
                config: with(
                    base_config(None),
                    json!({ "input": a.input.display().to_string(), "tol": a.tol, "max_iter": a.max_iter,
                            "n": data.cs.len(), "predictors": model.predictor_dim() }),
                ),
                result: json!({ "base": value(model.base()), "coefficients": coefficients,
                                "fit": value(fit), "dispersion": value(&disp) }),
            };
            ("regress".into(), outcome, &a.output)
        }
        Command::Simulate(Simulate::Null(a)) => {
            let cfg = design(&a.design, a.reps)?;
            let report = simulate_null(&cfg)?;
            let curve = if a.curve.is_empty() {
                None
            } else {
                Some(simulate_null_curve(&cfg, &a.curve)?)
            };
            let outcome = Outcome {
                table: report::null_table(&report, curve.as_deref()),
                config: with(base_config(Some(cfg.seed())), json!({ "sigma2": a.design.sigma2, "curve": a.curve })),
                result: with(value(&report), json!({ "curve": curve })),
            };
            ("simulate null".into(), outcome, &a.output)
        }
        Command::Simulate(Simulate::Power(a)) => {
            let cfg = design(&a.design, a.reps)?;
            if a.displaced == 0 || a.displaced > cfg.g() {
                return Err(CliError::Usage(format!("--displaced must lie in 1..={}", cfg.g())));
            }
            let alt = AlternativeSpec::new(
                a.displaced - 1,
                AlternativeSpec::uniform_direction(cfg.center()),
                a.theta.clone(),
            )?;
            let report = simulate_power(&cfg, &alt)?;
            if let Some(path) = &a.csv {
                write_file(path, &report::power_csv(&report))?;
            }
            let outcome = Outcome {
                table: report::power_table(&report),
                config: with(base_config(Some(cfg.seed())), json!({ "sigma2": a.design.sigma2 })),
                result: value(&report),
            };
            ("simulate power".into(), outcome, &a.output)
        }
        Command::Simulate(Simulate::Consistency(a)) => {
            if a.p == 0 {
                return Err(CliError::Usage("--p must be positive".into()));
            }
            let gamma = Dispersion::isotropic(tangent_dim(a.p), a.sigma2)?;
            let cfg = SimConfig::new(SpdMatrix::identity(a.p), gamma, vec![2], a.reps, a.seed, 0.05)?;
            let report = simulate_consistency(&cfg, &a.n_grid)?;
            let outcome = Outcome {
                table: report::consistency_table(&report),
                config: with(
                    base_config(Some(a.seed)),
                    json!({ "p": a.p, "sigma2": a.sigma2, "reps": a.reps, "n_grid": a.n_grid }),
                ),
                result: json!({ "rows": value(&report.rows),
                                "mean_error_decreasing": report.mean_error_decreasing,
                                "dispersion_error_decreasing": report.dispersion_error_decreasing }),
            };
            ("simulate consistency".into(), outcome, &a.output)
        }
        Command::AuditGeometry(a) => {
            let audit = geometry_audit(&a.p, a.trials, a.seed)?;
            let outcome = Outcome {
                table: report::audit_table(&audit),
                config: with(base_config(Some(a.seed)), json!({ "p": a.p, "trials": a.trials })),
                result: value(&audit),
            };
            ("audit-geometry".into(), outcome, &a.output)
        }
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (command, outcome, output) = thread_pool()?.install(|| execute(&cli.command))?;
    let to_stdout = output.json.as_deref() == Some(Path::new("-"));
    if !to_stdout {
        print!("{}", outcome.table);
    }
    if let Some(path) = &output.json {
        let envelope = Envelope {
            command,
            config: outcome.config,
            result: outcome.result,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: output.timing.then(|| start.elapsed().as_secs_f64()),
        };
        let text = report::to_json(&envelope);
        if to_stdout {
            print!("{text}");
        } else {
            write_file(path, &text)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
