//! Command-line front end: `noise`, `denoise`, `eval`, `inspect`, `bench`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::bench::{load_models, run_bench, BenchConfig};
use crate::bipartite::{approximate_bipartite_traced, Class};
use crate::cloud::{add_gaussian_noise, load_cloud, save_cloud_with_comments, CloudFormat, NoiseSpec, PointCloud, RNG_ALGORITHM};
use crate::config::{load_config, params_to_lines, apply_entries};
use crate::error::{Error, Result};
use crate::graph::build_knn_graph;
use crate::metrics::{evaluate, CSV_HEADER};
use crate::normals::normals_to_text;
use crate::solver::{denoise, partite_normals, DenoiseParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_CONVERGENCE: i32 = 5;
pub const EXIT_DEGENERATE: i32 = 6;

const AFTER_HELP: &str = "\
Exit codes:
  0  success
  1  other failure (e.g. a benchmark model failed)
  2  usage error or invalid parameter
  3  I/O error
  4  parse error in a cloud or config file
  5  solver divergence, or non-convergence with --require-convergence
  6  degenerate input (too few points, coincident points, no support pair)

Config files hold `key = value` lines with `#` comments; keys are the long
flag names with `_` for `-`. Flags override the file, the file overrides
defaults.

CSV schemas:
  eval:    model,sigma,c2c_unsq,c2c_sq,c2p,runtime_s
  bench:   model,sigma,seed,gamma,method,c2c_unsq,c2c_sq,c2p  (method = noise|proposed)
  timings: model,runtime_s

Set RUST_LOG or use -v/-q to control logging on standard error.";

#[derive(Debug, Parser)]
#[command(name = "pcdenoise", version, about = "Point cloud denoising by graph total variation of normals", after_help = AFTER_HELP)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Add seeded Gaussian noise to a cloud.
    Noise(NoiseArgs),
    /// Denoise a cloud and write diagnostics.
    Denoise(DenoiseArgs),
    /// Compare a test cloud against ground truth.
    Eval(EvalArgs),
    /// Dump an intermediate structure as text.
    Inspect(InspectArgs),
    /// Noise, denoise and evaluate every model in a directory.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    formats: FormatArgs,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Diagnostics file [default: <output>.diag.txt].
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Effective-config echo [default: <output>.cfg].
    #[arg(long)]
    echo: Option<PathBuf>,
    /// Exit with code 5 when any ADMM solve stops at its iteration cap.
    #[arg(long)]
    require_convergence: bool,
    #[command(flatten)]
    formats: FormatArgs,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    ground: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Neighbors for tangent-plane fits.
    #[arg(long, default_value_t = crate::metrics::DEFAULT_PLANE_K)]
    k: usize,
    /// Model label for the CSV row [default: test file stem].
    #[arg(long)]
    model: Option<String>,
    /// Noise level label for the CSV row.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum What {
    Graph,
    Bipartition,
    Normals,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassArg {
    Red,
    Blue,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    /// Class whose normals are dumped.
    #[arg(long, value_enum, default_value = "red")]
    class: ClassArg,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<CloudFormat>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory of ground-truth .ply/.xyz models.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3])]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Models processed concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Neighbors for tangent-plane fits.
    #[arg(long, default_value_t = crate::metrics::DEFAULT_PLANE_K)]
    eval_k: usize,
    /// Metrics CSV path (printed to standard output if omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-model runtime CSV path.
    #[arg(long)]
    timings: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct FormatArgs {
    /// Input format [default: from extension].
    #[arg(long)]
    input_format: Option<CloudFormat>,
    /// Output format [default: from extension].
    #[arg(long)]
    output_format: Option<CloudFormat>,
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// `key = value` parameter file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    sigma_p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    #[arg(long)]
    prox_tol: Option<f64>,
    #[arg(long)]
    prox_max_iter: Option<usize>,
    #[arg(long)]
    admm_tol: Option<f64>,
    /// Bound on the relative dual residual; `inf` disables it.
    #[arg(long)]
    admm_dual_tol: Option<f64>,
    #[arg(long)]
    admm_max_iter: Option<usize>,
    #[arg(long)]
    outer_tol: Option<f64>,
    #[arg(long)]
    outer_max_iter: Option<usize>,
    #[arg(long)]
    start_node: Option<usize>,
    /// Hop radius of the local KLD window, or `full`.
    #[arg(long)]
    kld_hops: Option<String>,
    #[arg(long)]
    recompute_bipartition: Option<bool>,
    #[arg(long)]
    window_budget: Option<usize>,
}

impl ParamArgs {
    /// Effective parameters and whether gamma was set explicitly.
    fn resolve(&self) -> Result<(DenoiseParams, bool)> {
        let mut p = DenoiseParams::default();
        let mut gamma_set = false;
        if let Some(path) = &self.config {
            let entries = load_config(path)?;
            gamma_set = entries.contains_key("gamma");
            let rest = apply_entries(&mut p, &entries)?;
            if let Some((key, (_, line))) = rest.iter().next() {
                return Err(Error::parse(*line, format!("unknown key '{key}'")));
            }
        }
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { p.$f = v; })*};
        }
        set!(gamma, rho, t, sigma_p, k, delta, cg_tol, cg_max_iter, prox_tol, prox_max_iter);
        set!(admm_tol, admm_dual_tol, admm_max_iter, outer_tol, outer_max_iter, start_node, recompute_bipartition, window_budget);
        if let Some(h) = &self.kld_hops {
            crate::config::apply_param(&mut p, "kld_hops", h, 0)
                .map_err(|_| Error::InvalidParameter(format!("--kld-hops expects a count or 'full', got '{h}'")))?;
        }
        gamma_set |= self.gamma.is_some();
        p.validate()?;
        Ok((p, gamma_set))
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Parse { .. } | Error::VertexCount { .. } => EXIT_PARSE,
        Error::Diverged { .. } | Error::NonFiniteIterate { .. } => EXIT_CONVERGENCE,
        Error::TooFewPoints { .. }
        | Error::NonFinite { .. }
        | Error::Degenerate(_)
        | Error::NoSupportPair { .. }
        | Error::Collinear { .. }
        | Error::NotPositiveDefinite => EXIT_DEGENERATE,
        Error::InvalidParameter(_) => EXIT_USAGE,
        Error::DimensionMismatch { .. } | Error::MissingNode { .. } => EXIT_FAILURE,
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = if quiet {
        "error"
    } else {
        match verbose {
            0 => "warn",
            1 => "info",
            2 => "debug",
            _ => "trace",
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args` (program name first), runs the command writing its data
/// to `out`, and returns the process exit code.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let result = match &cli.command {
        Command::Noise(a) => cmd_noise(a, out),
        Command::Denoise(a) => cmd_denoise(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn fmt_of(path: &Path, explicit: Option<CloudFormat>) -> CloudFormat {
    explicit.unwrap_or_else(|| CloudFormat::from_path(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Sample standard deviation of the displacement along each axis.
pub fn per_axis_std(before: &PointCloud, after: &PointCloud) -> [f64; 3] {
    let n = before.len() as f64;
    let d: Vec<_> = before.positions().iter().zip(after.positions()).map(|(a, b)| b - a).collect();
    let mean = d.iter().sum::<crate::cloud::Vec3>() / n;
    let mut out = [0.0; 3];
    for (axis, o) in out.iter_mut().enumerate() {
        let ss: f64 = d.iter().map(|v| (v[axis] - mean[axis]).powi(2)).sum();
        *o = (ss / (n - 1.0).max(1.0)).sqrt();
    }
    out
}

fn cmd_noise<W: Write>(a: &NoiseArgs, out: &mut W) -> Result<i32> {
    let input = load_cloud(&a.input, fmt_of(&a.input, a.formats.input_format))?;
    let noisy = add_gaussian_noise(&input, NoiseSpec { sigma: a.sigma, seed: a.seed })?;
    let comments = vec![
        format!("sigma = {}", a.sigma),
        format!("seed = {}", a.seed),
        format!("rng = {RNG_ALGORITHM}"),
    ];
    save_cloud_with_comments(&noisy, &a.output, fmt_of(&a.output, a.formats.output_format), &comments)?;
    let s = per_axis_std(&input, &noisy);
    writeln!(out, "points: {}", noisy.len()).map_err(io_out)?;
    writeln!(out, "sigma: {}", a.sigma).map_err(io_out)?;
    writeln!(out, "seed: {}", a.seed).map_err(io_out)?;
    writeln!(out, "rng: {RNG_ALGORITHM}").map_err(io_out)?;
    writeln!(out, "achieved_std: {:.6} {:.6} {:.6}", s[0], s[1], s[2]).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_denoise<W: Write>(a: &DenoiseArgs, out: &mut W) -> Result<i32> {
    let (params, _) = a.params.resolve()?;
    let input = load_cloud(&a.input, fmt_of(&a.input, a.formats.input_format))?;
    let (denoised, report) = denoise(&input, &params)?;
    let echo = params_to_lines(&params);

    let mut comments = vec!["effective configuration:".to_string()];
    comments.extend(echo.iter().cloned());
    save_cloud_with_comments(&denoised, &a.output, fmt_of(&a.output, a.formats.output_format), &comments)?;
    let diag_path = a.diagnostics.clone().unwrap_or_else(|| with_suffix(&a.output, ".diag.txt"));
    write_text(&diag_path, &report.to_text())?;
    let echo_path = a.echo.clone().unwrap_or_else(|| with_suffix(&a.output, ".cfg"));
    write_text(&echo_path, &(echo.join("\n") + "\n"))?;

    writeln!(out, "# effective configuration").map_err(io_out)?;
    for line in &echo {
        writeln!(out, "{line}").map_err(io_out)?;
    }
    let unsupported = report.unsupported_nodes().len();
    writeln!(out, "# points: {}", report.points).map_err(io_out)?;
    writeln!(out, "# outer_passes: {}", report.outer_changes.len()).map_err(io_out)?;
    writeln!(out, "# admm_converged: {}", report.all_admm_converged()).map_err(io_out)?;
    writeln!(out, "# unsupported_nodes: {unsupported}").map_err(io_out)?;
    writeln!(out, "# diagnostics: {}", diag_path.display()).map_err(io_out)?;
    info!("denoised {} points in {:.2}s", report.points, report.total_seconds);
    if unsupported > 0 {
        warn!("{unsupported} nodes had no support pair and kept their positions");
    }
    if !report.all_admm_converged() {
        warn!("some ADMM solves stopped at admm_max_iter = {}", params.admm_max_iter);
        if a.require_convergence {
            return Ok(EXIT_CONVERGENCE);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_eval<W: Write>(a: &EvalArgs, out: &mut W) -> Result<i32> {
    let started = Instant::now();
    let ground = load_cloud(&a.ground, CloudFormat::from_path(&a.ground))?;
    let test = load_cloud(&a.test, CloudFormat::from_path(&a.test))?;
    let report = evaluate(&ground, &test, a.k)?;
    let model = a
        .model
        .clone()
        .unwrap_or_else(|| a.test.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    write!(out, "{}", report.to_table()).map_err(io_out)?;
    writeln!(out, "{CSV_HEADER}").map_err(io_out)?;
    writeln!(out, "{}", report.csv_row(&model, a.sigma, started.elapsed().as_secs_f64())).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn cmd_inspect<W: Write>(a: &InspectArgs, out: &mut W) -> Result<i32> {
    let (params, _) = a.params.resolve()?;
    let cloud = load_cloud(&a.input, fmt_of(&a.input, a.format))?;
    let k = params.k.min(cloud.len().saturating_sub(1));
    let graph = build_knn_graph(&cloud, k, params.sigma_p)?;
    let text = match a.what {
        What::Graph => graph.to_edge_list(),
        What::Bipartition => approximate_bipartite_traced(&graph, &params.bipartite_options())?.0.to_text(),
        What::Normals => {
            let (bp, _) = approximate_bipartite_traced(&graph, &params.bipartite_options())?;
            let class = match a.class {
                ClassArg::Red => Class::Red,
                ClassArg::Blue => Class::Blue,
            };
            let pn = partite_normals(&graph, &bp, cloud.positions(), class, k)?;
            if !pn.unsupported.is_empty() {
                warn!("{} nodes have no support pair", pn.unsupported.len());
            }
            let raw: Vec<_> = pn.raw.iter().map(|r| r.normal).collect();
            normals_to_text(&pn.pairs, &raw, &pn.alphas)
        }
    };
    match &a.output {
        Some(p) => write_text(p, &text)?,
        None => write!(out, "{text}").map_err(io_out)?,
    }
    Ok(EXIT_OK)
}

fn cmd_bench<W: Write>(a: &BenchArgs, out: &mut W) -> Result<i32> {
    let (params, gamma_set) = a.params.resolve()?;
    let models = load_models(&a.models)?;
    let cfg = BenchConfig {
        sigmas: a.sigmas.clone(),
        seed: a.seed,
        params,
        eval_k: a.eval_k,
        workers: a.workers,
        auto_gamma: !gamma_set,
    };
    let outcome = run_bench(&models, &cfg)?;
    write!(out, "{}", outcome.to_table()).map_err(io_out)?;
    match &a.csv {
        Some(p) => write_text(p, &outcome.to_csv())?,
        None => write!(out, "{}", outcome.to_csv()).map_err(io_out)?,
    }
    if let Some(p) = &a.timings {
        write_text(p, &outcome.timings_csv())?;
    }
    Ok(if outcome.failures.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("p.cfg");
        fs::write(&cfg, "gamma = 0.2\nrho = 3\n").unwrap();
        let cli = Cli::try_parse_from(["pcdenoise", "inspect", "--input", "x.xyz", "--what", "graph", "--config"])
            .err();
        assert!(cli.is_some());
        let cli = Cli::try_parse_from([
            "pcdenoise",
            "inspect",
            "--input",
            "x.xyz",
            "--what",
            "graph",
            "--config",
            cfg.to_str().unwrap(),
            "--rho",
            "7",
        ])
        .unwrap();
        let Command::Inspect(a) = cli.command else { panic!() };
        let (p, gamma_set) = a.params.resolve().unwrap();
        assert_eq!(p.gamma, 0.2);
        assert_eq!(p.rho, 7.0);
        assert!(gamma_set);
    }

    #[test]
    fn unknown_config_key_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("p.cfg");
        fs::write(&cfg, "gamma = 0.2\nbogus = 1\n").unwrap();
        let args = ParamArgs::try_from_config(&cfg);
        assert!(matches!(args.resolve(), Err(Error::Parse { line: 2, .. })));
    }

    impl ParamArgs {
        fn try_from_config(path: &Path) -> Self {
            let cli = Cli::try_parse_from([
                "pcdenoise",
                "bench",
                "--models",
                ".",
                "--config",
                path.to_str().unwrap(),
            ])
            .unwrap();
            match cli.command {
                Command::Bench(b) => b.params,
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_CONVERGENCE, EXIT_DEGENERATE];
        let mut sorted = codes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), codes.len());
        assert_eq!(exit_code(&Error::parse(1, "x")), EXIT_PARSE);
        assert_eq!(exit_code(&Error::Diverged { iteration: 3, residual: 1.0 }), EXIT_CONVERGENCE);
        assert_eq!(exit_code(&Error::TooFewPoints { required: 4, actual: 1 }), EXIT_DEGENERATE);
    }
}
