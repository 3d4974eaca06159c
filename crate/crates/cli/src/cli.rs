//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use cfe_core::analysis::{heatmap_csv, report_file_name, write_csv, ReportFormat, Tabular, WeightsTable};
use cfe_core::metrics::hourly_heatmap;
use cfe_core::scenario::{load_scenarios, save_scenarios, synthesize_with_diagnostics, SynthConfig};
use cfe_core::structurer::{SolveOptions, Strategy, DEFAULT_EPSILON};
use cfe_core::{Bounds, CfeError, ScenarioSet};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::api::{self, ApiError, FrontierRequest, GridRequest, LoadRequest, MarginalRequest, MultiloadRequest, OptimizeRequest};
use crate::output::{core_exit_code, exit_code, render, Precision, EXIT_OK, EXIT_VALIDATION};
use crate::server::{self, ServiceConfig, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "cfe", version, about = "Least-cost 24/7 carbon-free energy portfolio structuring")]
pub struct Cli {
    /// JSON number output: 6 significant digits or full precision.
    #[arg(long, global = true, value_enum, default_value = "6")]
    pub precision: Precision,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a scenario set from a generator config.
    Simulate(SimulateArgs),
    /// Least-cost portfolio for one load.
    Optimize(OptimizeArgs),
    /// Cost grid over guarantee levels and targets.
    Sweep(SweepArgs),
    /// Assets supplying the next increment of load.
    Marginal(MarginalArgs),
    /// Portfolios for several loads sharing one universe.
    Multiload(MultiloadArgs),
    /// Cost and shortfall VaR over asset subsets.
    Frontier(FrontierArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the manifest and CSVs.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's scenario count.
    #[arg(long)]
    pub scenarios: Option<usize>,
}

#[derive(Debug, Args)]
pub struct UniverseArgs {
    /// Scenario manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Load index.
    #[arg(long, default_value_t = 0)]
    pub load: usize,
    /// Per-asset lower bounds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub lower: Option<Vec<f64>>,
    /// Per-asset upper bounds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub upper: Option<Vec<f64>>,
}

impl UniverseArgs {
    fn bounds(&self, set: &ScenarioSet) -> Option<Bounds> {
        if self.lower.is_none() && self.upper.is_none() {
            return None;
        }
        let dim = set.asset_count();
        Some(Bounds {
            lower: self.lower.clone().unwrap_or_else(|| vec![0.0; dim]),
            upper: self.upper.clone().unwrap_or_else(|| vec![1.0; dim]),
        })
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub universe: UniverseArgs,
    /// CFE target p_C in (0, 1].
    #[arg(long)]
    pub target: f64,
    /// Guarantee level in (0, 1].
    #[arg(long)]
    pub alpha: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the weights as CSV.
    #[arg(long)]
    pub weights_csv: Option<PathBuf>,
    /// Also write the hourly heatmap of the optimal portfolio as CSV.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FileFormat {
    Json,
    Csv,
}

impl From<FileFormat> for ReportFormat {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Json => ReportFormat::Json,
            FileFormat::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report path; defaults to `<kind>_<timestamp>.<ext>` in --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FileFormat,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub universe: UniverseArgs,
    /// Guarantee levels, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// CFE targets, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pcs: Vec<f64>,
    /// Start each cell from its neighbour's solution.
    #[arg(long)]
    pub warm_start: bool,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct MarginalArgs {
    #[command(flatten)]
    pub universe: UniverseArgs,
    #[arg(long)]
    pub target: f64,
    #[arg(long)]
    pub alpha: f64,
    /// Relative load bump.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MultiloadArgs {
    /// Scenario manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// JSON file with `[{"load": k, "target": p, "alpha": a, "priority": r}, ...]`.
    #[arg(long)]
    pub loads: PathBuf,
    /// Aggregate per-asset upper bounds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub upper: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Scenario manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub load: usize,
    #[arg(long)]
    pub target: f64,
    #[arg(long)]
    pub alpha: f64,
    /// Shortfall VaR level.
    #[arg(long)]
    pub beta: f64,
    /// Subset template, e.g. `solar:n,wind:n,hydro:1@1..3`.
    #[arg(long)]
    pub subsets: String,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Scenario manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, env = "CFE_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    /// Wall-clock budget per request, in seconds.
    #[arg(long, default_value_t = server::DEFAULT_TIMEOUT.as_secs_f64())]
    pub timeout: f64,
    /// Concurrent solves; defaults to half the hardware threads.
    #[arg(long)]
    pub max_concurrent: Option<usize>,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<CfeError> for Failure {
    fn from(e: CfeError) -> Self {
        Failure {
            code: core_exit_code(&e),
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: format!("i/o error on {}: {e}", path.display()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

/// JSON to `out`, or to `stdout` when no path is given.
fn emit_json<T: Serialize>(value: &T, precision: Precision, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult {
    let text = render(value, precision);
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()).map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn csv_bytes(table: &dyn Tabular) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    Ok(buf)
}

fn emit_report<T: Serialize + Tabular>(
    value: &T,
    kind: &str,
    args: &ReportArgs,
    precision: Precision,
    stdout: &mut dyn Write,
) -> CliResult {
    let format = ReportFormat::from(args.format);
    let path = args.out.clone().unwrap_or_else(|| {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
        args.out_dir.join(report_file_name(kind, &stamp, format))
    });
    let bytes = match format {
        ReportFormat::Json => render(value, precision).into_bytes(),
        ReportFormat::Csv => csv_bytes(value)?,
    };
    write_file(&path, &bytes)?;
    writeln!(stdout, "{}", path.display()).map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn simulate(args: &SimulateArgs, precision: Precision, stdout: &mut dyn Write) -> CliResult {
    let text = fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let mut config: SynthConfig = serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: format!("malformed config {}: {e}", args.config.display()),
    })?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.scenarios {
        config.scenarios = n;
    }
    let (set, calibration) = synthesize_with_diagnostics(&config)?;
    let manifest = save_scenarios(&set, &args.out)?;
    emit_json(&calibration, precision, Some(&args.out.join("calibration.json")), stdout)?;
    writeln!(stdout, "{}", manifest.display()).map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn optimize(args: &OptimizeArgs, precision: Precision, stdout: &mut dyn Write) -> CliResult {
    let set = load_scenarios(&args.universe.manifest)?;
    let req = OptimizeRequest {
        load: args.universe.load,
        target: args.target,
        alpha: args.alpha,
        bounds: args.universe.bounds(&set),
    };
    let report = api::optimize(&set, &req, &SolveOptions::default())?;
    if let Some(path) = &args.weights_csv {
        write_file(path, &csv_bytes(&WeightsTable(&report))?)?;
    }
    if let Some(path) = &args.heatmap {
        let map = hourly_heatmap(&set, report.load, &report.weights)?;
        write_file(path, heatmap_csv(&map)?.as_bytes())?;
    }
    emit_json(&report, precision, args.out.as_deref(), stdout)
}

fn sweep(args: &SweepArgs, precision: Precision, stdout: &mut dyn Write) -> CliResult {
    let set = load_scenarios(&args.universe.manifest)?;
    let req = GridRequest {
        load: args.universe.load,
        alphas: args.alphas.clone(),
        pcs: args.pcs.clone(),
        bounds: args.universe.bounds(&set),
        warm_start: args.warm_start,
    };
    let grid = api::grid(&set, &req, &SolveOptions::default())?;
    emit_report(&grid, "grid", &args.report, precision, stdout)
}

fn marginal(args: &MarginalArgs, precision: Precision, stdout: &mut dyn Write) -> CliResult {
    let set = load_scenarios(&args.universe.manifest)?;
    let req = MarginalRequest {
        load: args.universe.load,
        target: args.target,
        alpha: args.alpha,
        epsilon: Some(args.epsilon),
        bounds: args.universe.bounds(&set),
    };
    let m = api::marginal(&set, &req, &SolveOptions::default())?;
    emit_json(&m, precision, args.out.as_deref(), stdout)
}

fn multiload(args: &MultiloadArgs, precision: Precision, stdout: &mut dyn Write) -> CliResult {
    let set = load_scenarios(&args.manifest)?;
    let text = fs::read_to_string(&args.loads).map_err(|e| io_failure(&args.loads, e))?;
    let loads: Vec<LoadRequest> = api::parse_body(text.as_bytes())?;
    let req = MultiloadRequest {
        strategy: args.strategy,
        loads,
        bounds: args.upper.clone().map(|upper| Bounds {
            lower: vec![0.0; upper.len()],
            upper,
        }),
    };
    let report = api::multiload(&set, &req, &SolveOptions::default())?;
    emit_json(&report, precision, args.out.as_deref(), stdout)
}

fn frontier(args: &FrontierArgs, precision: Precision, stdout: &mut dyn Write) -> CliResult {
    let set = load_scenarios(&args.manifest)?;
    let req = FrontierRequest {
        load: args.load,
        target: args.target,
        alpha: args.alpha,
        beta: args.beta,
        subsets: args.subsets.clone(),
    };
    let frontier = api::frontier(&set, &req, &SolveOptions::default())?;
    emit_report(&frontier, "frontier", &args.report, precision, stdout)
}

fn serve(args: &ServeArgs, precision: Precision) -> CliResult {
    let set = load_scenarios(&args.manifest)?;
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("--timeout must be positive, got {}", args.timeout),
        });
    }
    let config = ServiceConfig {
        precision,
        timeout: Duration::from_secs_f64(args.timeout),
        max_concurrent: args.max_concurrent.unwrap_or_else(server::default_concurrency),
        solve: SolveOptions::default(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: format!("cannot start the async runtime: {e}"),
    })?;
    runtime
        .block_on(server::serve(set, config, args.port))
        .map_err(|e| Failure {
            code: EXIT_VALIDATION,
            message: format!("cannot serve on port {}: {e}", args.port),
        })
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult {
    let p = cli.precision;
    match &cli.command {
        Command::Simulate(a) => simulate(a, p, stdout),
        Command::Optimize(a) => optimize(a, p, stdout),
        Command::Sweep(a) => sweep(a, p, stdout),
        Command::Marginal(a) => marginal(a, p, stdout),
        Command::Multiload(a) => multiload(a, p, stdout),
        Command::Frontier(a) => frontier(a, p, stdout),
        Command::Serve(a) => serve(a, p),
    }
}

/// Parses `argv`, runs the command and returns the exit code. Messages go
/// to `stderr`, results to `stdout`.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
