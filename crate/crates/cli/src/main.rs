//! `resi`: robust effect size estimation, conversion, power and simulation.
//!
//! Exit status is 0 on success, 1 for invalid input or requests, and 2 when
//! the numerics fail on valid input (singular covariance, separation,
//! non-convergence).

mod ingest;
mod report;

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resi::convert::{self, IndexKind};
use resi::distributions::chisq_cdf;
use resi::power::{self, PowerSpec, Unknown};
use resi::sim::{self, ErrorModel, SimConfig};
use resi::{models, ConversionContext, Family};

use report::{Field, Report, Row};

#[derive(Parser)]
#[command(name = "resi", version, about = "Robust effect size index toolkit")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV file and estimate S for the target block.
    Estimate(EstimateArgs),
    /// Convert between S, d, f2 and R2.
    Convert(ConvertArgs),
    /// Solve the power relation for one unknown, or tabulate a power curve.
    Power(PowerArgs),
    /// Tabulate the asymptotic bias of classical indices.
    Bias(BiasArgs),
    /// Run the finite-sample simulation over a grid of designs.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Model family: two_means, linear or logistic.
    #[arg(long, default_value = "linear")]
    model: String,
    #[arg(long, default_value = "y")]
    outcome: String,
    /// Target columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    target: Vec<String>,
    /// Nuisance columns, comma separated. Linear and logistic models add an
    /// intercept on their own.
    #[arg(long, value_delimiter = ',')]
    nuisance: Vec<String>,
    /// Null values for the target parameters (default all zero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta0: Vec<f64>,
    /// Known group-1 proportion (two-means only); estimated when omitted.
    #[arg(long)]
    pi1: Option<f64>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, allow_hyphen_values = true)]
    value: f64,
    /// Group-1 proportion, needed whenever d is involved.
    #[arg(long)]
    pi1: Option<f64>,
    /// Whole-model R2 when it differs from the partial R2.
    #[arg(long = "r2-whole")]
    r2_whole: Option<f64>,
}

#[derive(Args)]
struct PowerArgs {
    /// Quantity to solve for: power, n, s or alpha. Inferred when exactly one
    /// of n, s and power is missing.
    #[arg(long)]
    solve: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Effect size; a comma-separated list with --curve.
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    /// Degrees of freedom (number of target parameters); a list with --curve.
    #[arg(long, value_delimiter = ',')]
    df: Vec<usize>,
    /// Test level (default 0.05 unless solving for it).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    /// Tabulate power over s, df and an n range instead of solving.
    #[arg(long)]
    curve: bool,
    #[arg(long, default_value_t = 10)]
    n_min: usize,
    #[arg(long, default_value_t = 500)]
    n_max: usize,
    #[arg(long, default_value_t = 10)]
    n_step: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BiasKind {
    D,
    R2,
}

#[derive(Args)]
struct BiasArgs {
    #[arg(long, value_enum)]
    kind: BiasKind,
    /// Points on the log2 variance-ratio axis over [-3, 3].
    #[arg(long, default_value_t = 25)]
    n_ratio: usize,
    /// Group proportions k/(n_pi + 1) for the d surface.
    #[arg(long, default_value_t = 19)]
    n_pi: usize,
    /// Slopes for the R2 surface.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.25,0.5,1")]
    betas: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ErrorKind {
    Gamma,
    Normal,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = sim::DESIGN_N)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = sim::DESIGN_S)]
    s: Vec<f64>,
    #[arg(long = "rho-sq", value_delimiter = ',', default_values_t = sim::DESIGN_RHO_SQ)]
    rho_sq: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = sim::DESIGN_M0)]
    m0: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = sim::DESIGN_M1)]
    m1: Vec<usize>,
    /// Gamma shape of the error distribution.
    #[arg(long, value_delimiter = ',', default_values_t = sim::DESIGN_SHAPE)]
    shape: Vec<f64>,
    #[arg(long, default_value_t = sim::DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size of the draw used to calibrate the slope to each target S.
    #[arg(long, default_value_t = sim::DEFAULT_CALIBRATION_N)]
    calibration_n: usize,
    #[arg(long, value_enum, default_value_t = ErrorKind::Gamma)]
    errors: ErrorKind,
    /// Standard deviation for normal errors.
    #[arg(long, default_value_t = 1.0)]
    error_sd: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "RESI_THREADS")]
    threads: Option<usize>,
    /// Directory for per-design replicate tables and summaries.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Core(resi::Error),
}

impl From<resi::Error> for Failure {
    fn from(e: resi::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<String> for Failure {
    fn from(e: String) -> Self {
        Failure::Usage(e)
    }
}

type Outcome = Result<Report, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Convert(a) => convert_cmd(a),
        Command::Power(a) => power_cmd(a),
        Command::Bias(a) => bias(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(mut report) => {
            report.config.insert(0, ("format".into(), cli.format.as_str().into()));
            let text = match cli.format {
                Format::Text => report.text(),
                Format::Csv => report.csv(),
                Format::Json => format!("{:#}\n", report.json()),
            };
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn list<T: ToString>(v: &[T]) -> Field {
    Field::Text(v.iter().map(T::to_string).collect::<Vec<_>>().join(","))
}

fn kv(key: &str, v: impl Into<Field>) -> (String, Field) {
    (key.to_string(), v.into())
}

fn estimate(a: &EstimateArgs) -> Outcome {
    let family: Family = a.model.parse()?;
    if a.pi1.is_some() && family != Family::TwoMeans {
        return Err(Failure::Usage("--pi1 only applies to the two_means model".into()));
    }
    let table = ingest::read_table(&a.data)?;
    let data = table
        .dataset(&a.outcome, &a.nuisance, &a.target)
        .map_err(|e| format!("{}: {e}", a.data.display()))?;
    let beta0 = if a.beta0.is_empty() {
        vec![0.0; a.target.len()]
    } else if a.beta0.len() == a.target.len() {
        a.beta0.clone()
    } else {
        return Err(Failure::Usage(format!(
            "--beta0 has {} values for {} target columns",
            a.beta0.len(),
            a.target.len()
        )));
    };

    let model = models::fit(family, &data, a.pi1)?;
    let analysis = resi::effectsize::analyze(&model, Some(&beta0))?;
    let est = &analysis.estimate;
    let df = analysis.wald.df;
    let p_value = 1.0 - chisq_cdf(est.t_squared, df as f64)?;

    let config = vec![
        kv("data", a.data.display().to_string()),
        kv("model", family.as_str()),
        kv("outcome", a.outcome.as_str()),
        kv("target", list(&a.target)),
        kv("nuisance", list(&a.nuisance)),
        kv("beta0", list(&beta0)),
        kv("pi1", a.pi1.map_or_else(|| "estimated".to_string(), |p| format!("{p:?}"))),
    ];
    let mut row: Row = vec![
        kv("n", est.n),
        kv("m", est.m),
        kv("df", df),
        kv("t_squared", est.t_squared),
        kv("p_value", p_value),
        kv("s_hat", est.s_hat),
        kv("s_sq_untruncated", est.s_sq_untruncated),
        kv("truncated", est.truncated),
        kv("category", convert::classify_effect(est.s_hat)?.as_str()),
    ];
    if let Some((p1, _)) = model.pi {
        row.push(kv("pi1_used", p1));
    }
    row.push(kv("iterations", model.iterations));
    let names = model.target_names().to_vec();
    for (name, b) in names.iter().zip(model.beta_hat()) {
        row.push(kv(&format!("beta_hat[{name}]"), *b));
    }
    let cov = &analysis.covariance;
    for (i, ni) in names.iter().enumerate() {
        for (j, nj) in names.iter().enumerate().skip(i) {
            row.push(kv(&format!("sigma_beta[{ni}:{nj}]"), cov.sigma_beta[(i, j)]));
        }
    }
    for (i, ni) in names.iter().enumerate() {
        for (j, nj) in names.iter().enumerate().skip(i) {
            row.push(kv(&format!("model_cov[{ni}:{nj}]"), cov.model_based_beta_cov[(i, j)]));
        }
    }
    let mut report = Report::new("estimate", config);
    report.rows.push(row);
    Ok(report)
}

fn convert_cmd(a: &ConvertArgs) -> Outcome {
    let from: IndexKind = a.from.parse()?;
    let to: IndexKind = a.to.parse()?;
    let ctx = ConversionContext {
        pi1: a.pi1,
        r2_whole: a.r2_whole,
    };
    let value = convert::convert(a.value, from, to, &ctx)?;
    let s = convert::convert(a.value, from, IndexKind::S, &ctx)?;
    let config = vec![
        kv("from", from.as_str()),
        kv("to", to.as_str()),
        kv("value", a.value),
        kv("pi1", a.pi1),
        kv("r2_whole", a.r2_whole),
    ];
    let mut report = Report::new("convert", config);
    report.rows.push(vec![
        kv("result", value),
        kv("s", s),
        kv("category", convert::classify_effect(s)?.as_str()),
    ]);
    Ok(report)
}

fn single<T: Copy>(v: &[T], name: &str) -> Result<Option<T>, Failure> {
    match v {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ => Err(Failure::Usage(format!("--{name} takes a single value unless --curve is set"))),
    }
}

fn power_cmd(a: &PowerArgs) -> Outcome {
    if a.curve {
        return power_curve(a);
    }
    let s = single(&a.s, "s")?;
    let df = single(&a.df, "df")?.unwrap_or(1);
    let unknown = match &a.solve {
        Some(u) => u.parse()?,
        None => match (a.n, s, a.power) {
            (_, _, None) => Unknown::Power,
            (None, Some(_), Some(_)) => Unknown::N,
            (Some(_), None, Some(_)) => Unknown::S,
            _ => return Err(Failure::Usage("nothing to solve for; pass --solve".into())),
        },
    };
    let alpha = match (unknown, a.alpha) {
        (Unknown::Alpha, Some(_)) => {
            return Err(Failure::Usage("--alpha cannot be given when solving for alpha".into()))
        }
        (Unknown::Alpha, None) => None,
        (_, a) => Some(a.unwrap_or(0.05)),
    };
    let unknown_name = match unknown {
        Unknown::Power => "power",
        Unknown::N => "n",
        Unknown::S => "s",
        Unknown::Alpha => "alpha",
    };
    let given = match unknown {
        Unknown::Power => a.power.is_some(),
        Unknown::N => a.n.is_some(),
        Unknown::S => s.is_some(),
        Unknown::Alpha => false,
    };
    if given {
        return Err(Failure::Usage(format!("--{unknown_name} cannot be given when solving for it")));
    }
    let spec = PowerSpec {
        n: a.n,
        s,
        df,
        alpha,
        power: a.power,
    };
    let solved = spec.solve()?;
    let config = vec![
        kv("solve", unknown_name),
        kv("n", spec.n),
        kv("s", spec.s),
        kv("df", df),
        kv("alpha", spec.alpha),
        kv("power", spec.power),
    ];
    let (n, s, alpha) = (solved.n.unwrap(), solved.s.unwrap(), solved.alpha.unwrap());
    let mut row = vec![
        kv("n", n),
        kv("s", s),
        kv("df", df),
        kv("alpha", alpha),
        kv("power", solved.power.unwrap()),
    ];
    if unknown == Unknown::N {
        row.push(kv("achieved_power", power::power_from(n, s, df, alpha)?));
    }
    let mut report = Report::new("power", config);
    report.rows.push(row);
    Ok(report)
}

fn power_curve(a: &PowerArgs) -> Outcome {
    if a.s.is_empty() {
        return Err(Failure::Usage("--curve needs --s".into()));
    }
    if a.solve.is_some() || a.n.is_some() || a.power.is_some() {
        return Err(Failure::Usage("--curve does not combine with --solve, --n or --power".into()));
    }
    let df = if a.df.is_empty() { vec![1] } else { a.df.clone() };
    let alpha = a.alpha.unwrap_or(0.05);
    let ns = power::n_grid(a.n_min, a.n_max, a.n_step)?;
    let rows = power::power_curve(&a.s, &df, alpha, &ns)?;
    let config = vec![
        kv("curve", true),
        kv("s", list(&a.s)),
        kv("df", list(&df)),
        kv("alpha", alpha),
        kv("n_min", a.n_min),
        kv("n_max", a.n_max),
        kv("n_step", a.n_step),
    ];
    let mut report = Report::new("power", config);
    report.rows = rows
        .iter()
        .map(|r| {
            vec![
                kv("n", r.n),
                kv("s", r.s),
                kv("df", r.df),
                kv("alpha", r.alpha),
                kv("power", r.power),
            ]
        })
        .collect();
    Ok(report)
}

fn bias(a: &BiasArgs) -> Outcome {
    let (points, second, kind) = match a.kind {
        BiasKind::D => (convert::cohens_d_bias_grid::<f64>(a.n_ratio, a.n_pi)?, "pi1", "d"),
        BiasKind::R2 => (convert::r2_bias_grid::<f64>(a.n_ratio, &a.betas)?, "beta", "r2"),
    };
    let mut config = vec![kv("kind", kind), kv("n_ratio", a.n_ratio)];
    match a.kind {
        BiasKind::D => config.push(kv("n_pi", a.n_pi)),
        BiasKind::R2 => config.push(kv("betas", list(&a.betas))),
    }
    let mut report = Report::new("bias", config);
    report.rows = points
        .iter()
        .map(|p| vec![kv("log2_ratio", p.log2_ratio), kv(second, p.second), kv("ratio", p.ratio)])
        .collect();
    Ok(report)
}

fn simulate(a: &SimulateArgs) -> Outcome {
    let errors = match a.errors {
        ErrorKind::Gamma => ErrorModel::Gamma,
        ErrorKind::Normal => ErrorModel::Normal { sd: a.error_sd },
    };
    if a.threads == Some(0) {
        return Err(Failure::Usage("thread count must be >= 1".into()));
    }
    let template = SimConfig::new(0, 0.0, 0.0, 0, 1, 1.0)
        .with_replicates(a.replicates)
        .with_seed(a.seed)
        .with_errors(errors)
        .with_calibration_n(a.calibration_n);
    let configs = sim::expand_grid(&a.n, &a.s, &a.rho_sq, &a.m0, &a.m1, &a.shape, &template);
    for c in &configs {
        c.validate()?;
    }
    let results = sim::run_grid(&configs, a.threads)?;

    if let Some(dir) = &a.out_dir {
        write_sim_outputs(dir, &results)?;
    }

    let mut config = vec![
        kv("n", list(&a.n)),
        kv("s", list(&a.s)),
        kv("rho_sq", list(&a.rho_sq)),
        kv("m0", list(&a.m0)),
        kv("m1", list(&a.m1)),
        kv("shape", list(&a.shape)),
        kv("replicates", a.replicates),
        kv("seed", a.seed),
        kv("calibration_n", a.calibration_n),
        kv("errors", match a.errors {
            ErrorKind::Gamma => "gamma",
            ErrorKind::Normal => "normal",
        }),
    ];
    if a.errors == ErrorKind::Normal {
        config.push(kv("error_sd", a.error_sd));
    }
    config.push(kv("out_dir", a.out_dir.as_ref().map(|d| d.display().to_string())));
    let mut report = Report::new("simulate", config);
    report.rows = results
        .iter()
        .map(|r| {
            let c = &r.config;
            vec![
                kv("config_id", r.config_id.as_str()),
                kv("n", c.n),
                kv("s_target", c.s_target),
                kv("rho_sq", c.rho_sq),
                kv("m0", c.m0),
                kv("m1", c.m1),
                kv("shape", c.shape),
                kv("beta", r.beta),
                kv("n_ok", r.summary.n_ok),
                kv("failures", r.summary.failures),
                kv("mean_s_hat", r.summary.mean_s_hat),
                kv("bias", r.summary.bias),
                kv("se", r.summary.se),
            ]
        })
        .collect();
    Ok(report)
}

fn write_sim_outputs(dir: &std::path::Path, results: &[sim::SimResult]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Usage(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir.join("replicates")).map_err(io)?;
    fs::create_dir_all(dir.join("summaries")).map_err(io)?;
    let version = format!("# schema_version={}\n", resi::SCHEMA_VERSION);
    let mut summary = format!("{version}{}\n", sim::SimResult::SUMMARY_CSV_HEADER);
    for r in results {
        fs::write(dir.join("replicates").join(format!("{}.csv", r.config_id)), format!("{version}{}", r.replicates_csv()))
            .map_err(io)?;
        let json = format!("{:#}\n", r.summary_json());
        fs::write(dir.join("summaries").join(format!("{}.json", r.config_id)), json).map_err(io)?;
        summary.push_str(&r.summary_csv_row());
        summary.push('\n');
    }
    fs::write(dir.join("summary.csv"), summary).map_err(io)?;
    Ok(())
}
