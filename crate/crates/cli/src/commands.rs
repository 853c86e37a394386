//! Subcommands and their exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use dra_core::dynamics::{max_delay_bound, step_rate_bound, BoundInputs};
use dra_core::graph::{erdos_renyi, DEFAULT_WEIGHT_RANGE};
use dra_core::numeric::format_float;
use dra_core::percolation::{er_threshold_with, mc_union_connectivity, min_window, DegreeConvention};
use dra_core::scenario::{apply_overrides, preset, run, scaling_benchmark, ScenarioConfig, KNOWN_KEYS, PRESET_NAMES};

use crate::config_file::{parse_config, serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "DRA_SIM_THREADS";

/// A failure and the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad arguments, configuration, or unusable output paths.
    Config(String),
    /// A run in `run` mode diverged; its outputs were still written.
    Diverged(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Diverged(_) => EXIT_DIVERGED,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Diverged(m) => write!(f, "diverged: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<dra_core::Error> for CliError {
    fn from(e: dra_core::Error) -> Self {
        use dra_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) | E::Infeasible(_) => CliError::Config(e.to_string()),
            E::Numeric(_) => CliError::Numeric(e.to_string()),
            E::Diverged { .. } => CliError::Diverged(e.to_string()),
        }
    }
}

impl From<crate::config_file::ConfigError> for CliError {
    fn from(e: crate::config_file::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "dra-sim", version, about = "Resilient distributed resource-allocation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv, summary.txt and config.txt.
    Run(RunArgs),
    /// Run a named preset and each of its variants.
    Preset(PresetArgs),
    /// Run one scenario per value of a key and write sweep_summary.csv.
    Sweep(SweepArgs),
    /// Percolation threshold, minimal union window and a Monte-Carlo table.
    Percolation(CalcArgs),
    /// Step-rate bound and delay budget for given constants.
    Bounds(CalcArgs),
    /// Per-step cost against network size on dense graphs.
    Bench(CalcArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory, created if absent.
    #[arg(long, short, default_value = "dra-sim-out")]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Seed override, applied after every other setting.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
    /// `key=value` overrides; `preset=<name>` selects the base configuration.
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Preset name; omit with `--list`.
    pub name: Option<String>,
    /// List preset names and exit.
    #[arg(long)]
    pub list: bool,
    /// Print the base configuration instead of running.
    #[arg(long)]
    pub print: bool,
    #[command(flatten)]
    pub output: OutputArgs,
    /// `key=value` overrides applied to the base and every variant.
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Dotted key to vary.
    #[arg(long, short)]
    pub key: String,
    /// Comma-separated values of the key.
    #[arg(long, conflicts_with = "value")]
    pub values: Option<String>,
    /// One value of the key, taken verbatim; repeatable.
    #[arg(long)]
    pub value: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// `key = value` header lines followed by the CSV table.
    Text,
    /// The CSV table only.
    Csv,
}

#[derive(Debug, Args)]
pub struct CalcArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// `key=value` parameters.
    pub params: Vec<String>,
}

/// Parses arguments, runs the command and returns the exit code. Messages go
/// to stderr, results to stdout.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = String::new();
    let result = execute(&cli.command, &mut stdout);
    print!("{stdout}");
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Runs `command`, appending everything meant for stdout to `out`.
pub fn execute(command: &Command, out: &mut String) -> CliResult<()> {
    let pool = worker_pool()?;
    pool.install(|| match command {
        Command::Run(a) => cmd_run(a, out),
        Command::Preset(a) => cmd_preset(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Percolation(a) => cmd_percolation(a, out),
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    })
}

fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

fn split_pairs(args: &[String]) -> CliResult<Vec<(String, String)>> {
    args.iter()
        .map(|a| match a.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(CliError::Config(format!("argument `{a}`: expected key=value"))),
        })
        .collect()
}

fn apply_args(cfg: &mut ScenarioConfig, pairs: &[(String, String)]) -> CliResult<()> {
    apply_overrides(cfg, pairs).map_err(|(idx, e)| {
        let (k, v) = &pairs[idx];
        CliError::Config(format!("argument `{k}={v}`: {}", strip(e)))
    })
}

fn strip(e: dra_core::Error) -> String {
    match e {
        dra_core::Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// Base configuration (file, `preset=` argument or defaults), then argument
/// overrides, then the seed flag.
fn build_config(config: Option<&Path>, overrides: &[String], seed: Option<u64>) -> CliResult<ScenarioConfig> {
    let mut pairs = split_pairs(overrides)?;
    let preset_arg = pairs.iter().position(|(k, _)| k == "preset").map(|i| pairs.remove(i));
    let mut cfg = match (config, preset_arg) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("`preset=` cannot be combined with --config; set `preset` in the file".into()))
        }
        (Some(path), None) => parse_config(path)?,
        (None, Some((_, name))) => {
            preset(&name).map_err(|e| CliError::Config(format!("argument `preset={name}`: {}", strip(e))))?.config
        }
        (None, None) => ScenarioConfig::default(),
    };
    apply_args(&mut cfg, &pairs)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Creates `dir` and refuses to proceed if any of `files` exists without `force`.
fn prepare_output(dir: &Path, files: &[PathBuf], force: bool) -> CliResult<()> {
    if !force {
        if let Some(existing) = files.iter().find(|f| f.exists()) {
            return Err(CliError::Config(format!("{} exists; pass --force to overwrite", existing.display())));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

const RUN_FILES: [&str; 3] = ["trace.csv", "summary.txt", "config.txt"];

fn run_files(dir: &Path) -> Vec<PathBuf> {
    RUN_FILES.iter().map(|f| dir.join(f)).collect()
}

/// Runs `cfg` and writes its three files into `dir`.
fn run_into(cfg: &ScenarioConfig, dir: &Path) -> CliResult<dra_core::scenario::RunSummary> {
    let output = run(cfg)?;
    write_file(&dir.join("trace.csv"), &output.trace.to_csv())?;
    write_file(&dir.join("summary.txt"), &output.summary.to_key_values())?;
    write_file(&dir.join("config.txt"), &serialize(cfg))?;
    Ok(output.summary)
}

fn cmd_run(a: &RunArgs, out: &mut String) -> CliResult<()> {
    let cfg = build_config(a.config.as_deref(), &a.overrides, a.output.seed)?;
    let dir = &a.output.out;
    prepare_output(dir, &run_files(dir), a.output.force)?;
    let summary = run_into(&cfg, dir)?;
    writeln!(out, "wrote {}", dir.display()).expect("write to string");
    out.push_str(&summary.to_key_values());
    match &summary.divergence {
        Some(d) => Err(CliError::Diverged(format!("step {} agent {}: {}", d.step, d.agent, d.detail))),
        None => Ok(()),
    }
}

/// Columns shared by the sweep and preset summaries.
const POINT_COLUMNS: &str =
    "steps,early_stopped,diverged,final_residual,steps_to_threshold,oracle_gap,max_feasibility_gap,final_spread,eta_bar,eta_ratio";

fn point_row(s: &dra_core::scenario::RunSummary) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), format_float);
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        s.steps,
        s.early_stopped,
        s.diverged(),
        format_float(s.final_residual),
        s.steps_to_threshold.map_or_else(|| "none".into(), |k| k.to_string()),
        format_float(s.oracle_gap),
        format_float(s.max_feasibility_gap),
        format_float(s.final_spread),
        opt(s.eta_bar),
        opt(s.eta_ratio()),
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs labelled configurations in the worker pool, each into its own directory.
fn run_points(points: &[(String, ScenarioConfig)], root: &Path) -> CliResult<Vec<dra_core::scenario::RunSummary>> {
    points.par_iter().map(|(label, cfg)| run_into(cfg, &root.join(label))).collect()
}

fn cmd_preset(a: &PresetArgs, out: &mut String) -> CliResult<()> {
    if a.list {
        for name in PRESET_NAMES {
            writeln!(out, "{name}").expect("write to string");
        }
        return Ok(());
    }
    let name = a.name.as_deref().ok_or_else(|| CliError::Config("preset name required (or --list)".into()))?;
    let p = preset(name).map_err(|e| CliError::Config(strip(e)))?;
    let user = split_pairs(&a.overrides)?;
    let mut base = p.config.clone();
    apply_args(&mut base, &user)?;
    let seeded = |mut cfg: ScenarioConfig| -> CliResult<ScenarioConfig> {
        if let Some(s) = a.output.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    };
    if a.print {
        out.push_str(&serialize(&seeded(base)?));
        return Ok(());
    }
    let mut points = vec![("base".to_string(), seeded(base.clone())?)];
    for (i, overrides) in p.variants.iter().enumerate() {
        let mut cfg = base.clone();
        apply_overrides(&mut cfg, overrides).map_err(|(_, e)| CliError::from(e))?;
        points.push((format!("variant_{:02}", i + 1), seeded(cfg)?));
    }
    let dir = &a.output.out;
    let mut files: Vec<PathBuf> = points.iter().flat_map(|(label, _)| run_files(&dir.join(label))).collect();
    files.push(dir.join("preset_summary.csv"));
    prepare_output(dir, &files, a.output.force)?;

    let summaries = run_points(&points, dir)?;
    let mut table = format!("point,overrides,{POINT_COLUMNS}\n");
    for (i, ((label, _), s)) in points.iter().zip(&summaries).enumerate() {
        let described = if i == 0 {
            String::new()
        } else {
            p.variants[i - 1].iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
        };
        writeln!(table, "{label},{},{}", csv_field(&described), point_row(s)).expect("write to string");
    }
    write_file(&dir.join("preset_summary.csv"), &table)?;
    writeln!(out, "wrote {} ({} runs)", dir.display(), points.len()).expect("write to string");
    out.push_str(&table);
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut String) -> CliResult<()> {
    if !KNOWN_KEYS.contains(&a.key.as_str()) {
        return Err(CliError::Config(format!("--key: unknown key `{}`", a.key)));
    }
    let values: Vec<String> = match &a.values {
        Some(list) => list.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect(),
        None => a.value.clone(),
    };
    if values.is_empty() {
        return Err(CliError::Config("sweep needs --values or at least one --value".into()));
    }
    let base = build_config(a.config.as_deref(), &a.overrides, None)?;
    let points: Vec<(String, ScenarioConfig)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = base.clone();
            apply_args(&mut cfg, &[(a.key.clone(), v.clone())])?;
            if let Some(s) = a.output.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            Ok((format!("point_{i:03}"), cfg))
        })
        .collect::<CliResult<_>>()?;
    let dir = &a.output.out;
    let mut files: Vec<PathBuf> = points.iter().flat_map(|(label, _)| run_files(&dir.join(label))).collect();
    files.push(dir.join("sweep_summary.csv"));
    prepare_output(dir, &files, a.output.force)?;

    let summaries = run_points(&points, dir)?;
    let mut table = format!("point,{},{POINT_COLUMNS}\n", a.key);
    for (((label, _), v), s) in points.iter().zip(&values).zip(&summaries) {
        writeln!(table, "{label},{},{}", csv_field(v), point_row(s)).expect("write to string");
    }
    write_file(&dir.join("sweep_summary.csv"), &table)?;
    writeln!(out, "wrote {} ({} points)", dir.display(), points.len()).expect("write to string");
    out.push_str(&table);
    Ok(())
}

/// `key=value` calculator parameters with typed lookups and unknown-key detection.
struct Params {
    pairs: Vec<(String, String)>,
    allowed: &'static [&'static str],
}

impl Params {
    fn new(args: &[String], allowed: &'static [&'static str]) -> CliResult<Self> {
        let pairs = split_pairs(args)?;
        for (i, (k, _)) in pairs.iter().enumerate() {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown parameter `{k}` (expected one of {})",
                    allowed.join(", ")
                )));
            }
            if pairs[..i].iter().any(|(p, _)| p == k) {
                return Err(CliError::Config(format!("parameter `{k}` given twice")));
            }
        }
        Ok(Self { pairs, allowed })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(self.allowed.contains(&key));
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`"))))
            .transpose()
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("missing parameter `{key}`")))
    }
}

const PERCOLATION_PARAMS: &[&str] = &["n", "p", "p_fail", "trials", "seed", "graph_seed", "max_window", "convention"];

fn cmd_percolation(a: &CalcArgs, out: &mut String) -> CliResult<()> {
    let params = Params::new(&a.params, PERCOLATION_PARAMS)?;
    let n: usize = params.or("n", 50)?;
    let p: f64 = params.or("p", 0.2)?;
    let p_fail: f64 = params.or("p_fail", 0.85)?;
    let trials: usize = params.or("trials", 500)?;
    let seed: u64 = params.or("seed", 0)?;
    let graph_seed: u64 = params.or("graph_seed", 0)?;
    let max_window: u32 = params.or("max_window", 5)?;
    let convention = match params.raw("convention").unwrap_or("halved") {
        "halved" => DegreeConvention::Halved,
        "standard" => DegreeConvention::Standard,
        other => return Err(CliError::Config(format!("convention: expected halved or standard, got `{other}`"))),
    };
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(CliError::Config(format!("p_fail: must be in [0,1], got {p_fail}")));
    }
    let profile = er_threshold_with(n, p, convention)?;
    let window_star = match profile.p_c {
        Some(p_c) if p_fail < 1.0 => Some(min_window(p_fail, p_c)?),
        _ => None,
    };
    let graph = erdos_renyi(n, p, DEFAULT_WEIGHT_RANGE, graph_seed)?;
    let rows = (0..=max_window)
        .map(|w| mc_union_connectivity(&graph, p_fail, w, trials, seed))
        .collect::<Result<Vec<_>, _>>()?;

    let opt_f = |v: Option<f64>| v.map_or_else(|| "none".to_string(), format_float);
    let opt_u = |v: Option<u32>| v.map_or_else(|| "none".to_string(), |t| t.to_string());
    if a.format == Format::Text {
        let conv = match convention {
            DegreeConvention::Halved => "halved",
            DegreeConvention::Standard => "standard",
        };
        let header = [
            ("n", n.to_string()),
            ("p", format_float(p)),
            ("convention", conv.to_string()),
            ("d_bar", format_float(profile.d_bar)),
            ("p_c", opt_f(profile.p_c)),
            ("p_fail", format_float(p_fail)),
            ("window_star", opt_u(window_star)),
            ("graph_edges", graph.edge_count().to_string()),
            ("graph_seed", graph_seed.to_string()),
            ("mc_seed", seed.to_string()),
        ];
        for (k, v) in header {
            writeln!(out, "{k} = {v}").expect("write to string");
        }
        if profile.warning.is_some() {
            writeln!(out, "# mean degree at or below 1: no percolation threshold").expect("write to string");
        }
    }
    out.push_str("window,trials,connected,fraction,wilson_lo,wilson_hi\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.window,
            r.trials,
            r.connected,
            format_float(r.fraction),
            format_float(r.interval.lo),
            format_float(r.interval.hi)
        )
        .expect("write to string");
    }
    Ok(())
}

const BOUNDS_PARAMS: &[&str] =
    &["kappa_n", "kappa_l", "K_n", "K_l", "lambda2", "lambda_n", "u", "window", "tau_bar", "eta"];

fn cmd_bounds(a: &CalcArgs, out: &mut String) -> CliResult<()> {
    let params = Params::new(&a.params, BOUNDS_PARAMS)?;
    let inputs = BoundInputs {
        kappa_n: params.or("kappa_n", 1.0)?,
        kappa_l: params.or("kappa_l", 1.0)?,
        big_k_n: params.or("K_n", 1.0)?,
        big_k_l: params.or("K_l", 1.0)?,
        lambda2: params.required("lambda2")?,
        lambda_n: params.required("lambda_n")?,
        u: params.required("u")?,
        window: params.or("window", 0)?,
        tau_bar: params.or("tau_bar", 0)?,
    };
    let eta: Option<f64> = params.get("eta")?;
    let bound = step_rate_bound(&inputs)?;
    let delay_free = step_rate_bound(&BoundInputs { tau_bar: 0, ..inputs })?;
    let mut rows = vec![
        ("window", inputs.window.to_string()),
        ("tau_bar", inputs.tau_bar.to_string()),
        ("eta_bar", format_float(bound.eta_bar)),
        ("eta_bar_delay_free", format_float(delay_free.eta_bar)),
    ];
    if let Some(eta) = eta {
        let budget = max_delay_bound(&inputs, eta)?;
        let guaranteed = if budget >= 0.0 { (budget.floor() as u64).to_string() } else { "none".into() };
        rows.push(("eta", format_float(eta)));
        rows.push(("delay_budget", format_float(budget)));
        rows.push(("guaranteed_tau_bar", guaranteed));
    }
    match a.format {
        Format::Text => {
            for (k, v) in rows {
                writeln!(out, "{k} = {v}").expect("write to string");
            }
        }
        Format::Csv => {
            let (keys, values): (Vec<&str>, Vec<String>) = rows.into_iter().unzip();
            writeln!(out, "{}\n{}", keys.join(","), values.join(",")).expect("write to string");
        }
    }
    Ok(())
}

const BENCH_PARAMS: &[&str] = &["n", "steps", "density", "seed"];

fn cmd_bench(a: &CalcArgs, out: &mut String) -> CliResult<()> {
    let params = Params::new(&a.params, BENCH_PARAMS)?;
    let ns: Vec<usize> = match params.raw("n") {
        Some(list) => list
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| CliError::Config(format!("n: cannot parse `{v}`"))))
            .collect::<CliResult<_>>()?,
        None => vec![50, 100, 200, 400],
    };
    let table = scaling_benchmark(&ns, params.or("steps", 10)?, params.or("density", 0.5)?, params.or("seed", 1)?)?;
    out.push_str("n,edges,steps,seconds_per_step\n");
    for r in &table.rows {
        writeln!(out, "{},{},{},{}", r.n, r.edges, r.steps, format_float(r.seconds_per_step)).expect("write to string");
    }
    if a.format == Format::Text {
        writeln!(out, "slope = {}", format_float(table.slope)).expect("write to string");
    }
    Ok(())
}
