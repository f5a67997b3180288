//! `selinf` command line: analyze, simulate, calibrate.

pub mod input;
pub mod report;
pub mod svg;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::cv::{cv_lambda, CvOptions};
use crate::error::Error;
use crate::inference::{analyze, universal_lambda, AnalysisOptions, Method, SigmaSpec, TargetKind};
use crate::lasso::center_columns;
use crate::simulation::{calibrate_delta, run_study_with_threads, DesignScheme, StudyConfig};

use report::{AnalysisPayload, Metadata, Payload, ReportDocument};

pub const THREADS_ENV: &str = "SELINF_THREADS";

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: msg.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_NUMERICAL, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Input(_) | Error::Dimension(_) => EXIT_INPUT,
            _ => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "selinf", version, about = "Selection-adjusted inference after the lasso")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit the lasso to a delimited table and report selective intervals.
    Analyze(AnalyzeArgs),
    /// Run a simulation study from a JSON config.
    Simulate(SimulateArgs),
    /// Print the signal calibration and the universal threshold.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    /// Per-observation value.
    Value(f64),
    Cv,
}

impl FromStr for LambdaArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(Self::Cv);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Self::Value(v)),
            _ => Err(format!("expected a non-negative number or `cv`, got {s:?}")),
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Comma- or tab-delimited file with a header row.
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Per-observation penalty, or `cv` for 10-fold cross-validation.
    #[arg(long, default_value = "cv")]
    pub lambda: LambdaArg,
    #[arg(long, value_delimiter = ',', default_value = "naive,tz-v,tz-m,tz-ms")]
    pub method: Vec<Method>,
    #[arg(long, default_value = "partial")]
    pub target: TargetKind,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// known:<value>, ols, or reid. Defaults to ols when n > p + 1, else reid.
    #[arg(long)]
    pub sigma: Option<SigmaSpec>,
    /// |t| threshold of the stable-t screen.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Per-observation penalty of the stable-l1 screen.
    #[arg(long)]
    pub lambda_high: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write report.svg.
    #[arg(long)]
    pub svg: bool,
    /// Columns to drop from the predictors.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    /// Fit an unpenalized intercept (centers the data).
    #[arg(long)]
    pub intercept: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Worker threads; falls back to $SELINF_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write study.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// independent, block:<rho>:<blocks>, or toeplitz:<rho>.
    #[arg(long, default_value = "independent")]
    pub design: String,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn parse_design(s: &str) -> Result<DesignScheme, Error> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| Error::Input(format!("bad number {t:?} in design {s:?}")));
    match parts.as_slice() {
        ["independent"] => Ok(DesignScheme::Independent),
        ["toeplitz", rho] => Ok(DesignScheme::Toeplitz { rho: num(rho)? }),
        ["block", rho, blocks] => Ok(DesignScheme::BlockEquicorr {
            rho: num(rho)?,
            blocks: blocks.parse().map_err(|_| Error::Input(format!("bad block count in {s:?}")))?,
        }),
        _ => Err(Error::Input(format!("unknown design {s:?}"))),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn fmt_bound(v: f64) -> String {
    if v.is_finite() {
        format!("{v:9.4}")
    } else if v > 0.0 {
        format!("{:>9}", "inf")
    } else {
        format!("{:>9}", "-inf")
    }
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::input(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if a.method.is_empty() {
        return Err(CliError::input("--method is empty"));
    }
    let data = input::read_dataset(&a.input, &a.response, &a.exclude)?;
    let (n, p) = (data.x.n(), data.x.p());
    let lambda_per_obs = match a.lambda {
        LambdaArg::Value(v) => v,
        LambdaArg::Cv => {
            let opts = CvOptions { seed: a.seed, ..CvOptions::default() };
            if a.intercept {
                let (xc, _) = center_columns(data.x.matrix());
                cv_lambda(&xc, &data.y.add_scalar(-data.y.mean()), &opts)?.lambda
            } else {
                cv_lambda(data.x.matrix(), &data.y, &opts)?.lambda
            }
        }
    };
    let sigma = a.sigma.unwrap_or(if n > p + 1 { SigmaSpec::OlsFull } else { SigmaSpec::Reid });
    let opts = AnalysisOptions {
        alpha: a.alpha,
        cutoff: a.cutoff,
        lambda_high: a.lambda_high.map(|v| v * n as f64),
        include_intercept: a.intercept,
        seed: a.seed,
        ..AnalysisOptions::default()
    };
    let analysis = analyze(&data.x, &data.y, lambda_per_obs * n as f64, &a.method, a.target, sigma, &opts)?;
    let payload = AnalysisPayload::new(&analysis, &data.response, &|j| data.x.column_name(j), n, p);
    let doc = ReportDocument {
        metadata: Metadata::new("analyze", a.seed),
        input_digest: data.digest.clone(),
        payload: Payload::Analysis(payload),
    };

    ensure_dir(&a.out)?;
    write(&a.out.join("report.json"), &doc.to_json()?)?;
    write(&a.out.join("report.csv"), &report::report_csv(&analysis.results)?)?;
    if a.svg {
        let title = format!("{} ~ lasso, lambda = {lambda_per_obs:.4} per observation", data.response);
        write(&a.out.join("report.svg"), &svg::interval_plot(&analysis.results, &title))?;
    }

    println!(
        "n = {n}, p = {p}, lambda = {lambda_per_obs:.6} (sum scale {:.4}), sigma = {:.4}, {} selected",
        analysis.lambda,
        analysis.sigma,
        analysis.fit.active_set.len()
    );
    if let Some(h) = &analysis.high_value_t {
        let names: Vec<String> = h.iter().map(|&j| data.x.column_name(j)).collect();
        println!("high-value (t screen): {}", names.join(", "));
    }
    if let Some(h) = &analysis.high_value_l1 {
        let names: Vec<String> = h.iter().map(|&j| data.x.column_name(j)).collect();
        println!("high-value (l1 screen): {}", names.join(", "));
    }
    if !analysis.results.is_empty() {
        println!("{:<14} {:<11} {:>9} {:>9} {:>9} {:>9}  flags", "variable", "method", "estimate", "lower", "upper", "p");
    }
    for r in &analysis.results {
        println!(
            "{:<14} {:<11} {} {} {} {:9.4}  {}",
            r.name,
            r.method.as_str(),
            fmt_bound(r.point_estimate),
            fmt_bound(r.interval.lower),
            fmt_bound(r.interval.upper),
            r.p_value,
            r.error.as_deref().unwrap_or(&r.flags.join(","))
        );
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<(StudyConfig, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let cfg: StudyConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))?;
    Ok((cfg, input::digest(&bytes)))
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        _ => Ok(None),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (mut cfg, digest) = read_config(&a.config)?;
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(CliError::input(format!("invalid config:\n  {}", problems.join("\n  "))));
    }
    let report = run_study_with_threads(&cfg, thread_count(a.threads)?)?;
    let seed = cfg.seed;
    let csv = report.to_csv()?;
    let svg_doc = a.svg.then(|| {
        svg::length_boxplot(
            &report,
            &format!("n = {}, p = {}, {} replications", cfg.n, cfg.p, report.replications_run),
        )
    });
    println!(
        "{} replications ({} failed, {} with no selection), lambda = {:.4} per observation, mean |M| = {:.2}",
        report.replications_run,
        report.failed_replications,
        report.zero_selection_replications,
        report.calibration.lambda_per_obs,
        report.mean_selected
    );
    println!("{:<11} {:>9} {:>9} {:>11} {:>11} {:>9}", "method", "intervals", "coverage", "median_len", "finite_med", "infinite");
    for s in &report.methods {
        println!(
            "{:<11} {:>9} {:>9.3} {:>11.4} {:>11.4} {:>9.3}",
            s.method.as_str(),
            s.intervals,
            s.coverage,
            s.median_length,
            s.median_length_finite,
            s.infinite_proportion
        );
    }
    let doc = ReportDocument {
        metadata: Metadata::new("simulate", seed),
        input_digest: digest,
        payload: Payload::Study(Box::new(report)),
    };
    ensure_dir(&a.out)?;
    write(&a.out.join("study.json"), &doc.to_json()?)?;
    write(&a.out.join("study.csv"), &csv)?;
    if let Some(s) = svg_doc {
        write(&a.out.join("study.svg"), &s)?;
    }
    Ok(())
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    if a.n < 2 || a.p == 0 {
        return Err(CliError::input("--n must be >= 2 and --p >= 1"));
    }
    if a.reps < 100 {
        return Err(CliError::input(format!("--reps must be at least 100, got {}", a.reps)));
    }
    let design = parse_design(&a.design)?;
    design.validate(a.p)?;
    let (lo, hi) = calibrate_delta(a.n, a.p, &design, a.reps, a.seed)?;
    let univ = universal_lambda(a.n, a.p);
    println!("delta_low        {lo:.4}");
    println!("delta_high       {hi:.4}");
    println!("lambda_universal {univ:.4}  (per observation)");
    println!("lambda_universal {:.4}  (sum scale)", univ * a.n as f64);
    Ok(())
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
        }
    };
    let res = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
