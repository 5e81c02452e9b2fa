//! `condens`: pointwise conditional-density estimation and Monte Carlo risk
//! tables from the command line.

mod output;
mod presets;
mod settings;

use clap::{Args, Parser, Subcommand};
use condens::evaluation::{estimate, run_eta_sweep, GridReport, Selection, YCurve};
use condens::sampling::true_conditional_density;
use condens::{generate, RiskConfig, RiskReport};
use output::{fmt6, OutputSet};
use presets::Cell;
use serde::Serialize;
use settings::{parse_list, Settings};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "condens", version, about = "Adaptive pointwise conditional-density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate f(x, .) on one sample and export the curve and selection trace.
    Estimate(EstimateArgs),
    /// Monte Carlo MSE for a preset table or an explicit cell list.
    Table(TableArgs),
    /// Monte Carlo MSE of one cell over a list of eta values.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional `key=value` setting (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// ex1, ex2, ex3, ex4 or ex1-cauchy.
    #[arg(long)]
    example: Option<String>,
    /// kernel or projection.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    /// Use the true design density instead of its estimate.
    #[arg(long)]
    fx_known: bool,
    /// Monte Carlo replications per cell.
    #[arg(long)]
    reps: Option<String>,
    /// Sample seed (estimate) or base seed, replication r using seed + r.
    #[arg(long)]
    seed: Option<String>,
    /// Use the theoretical candidate grids for both estimators.
    #[arg(long)]
    strict_grid: bool,
    /// Clamp estimates at zero before computing errors and curves.
    #[arg(long)]
    clamp_nonneg: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Add the true conditional density as a third column.
    #[arg(long)]
    truth: bool,
    /// Number of y-grid points.
    #[arg(long)]
    grid_points: Option<String>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// table1 .. table8.
    #[arg(long)]
    preset: Option<String>,
    /// `example:estimator:x:n:eta:fx` cells separated by `;` (fx: known|unknown).
    #[arg(long, allow_hyphen_values = true)]
    cells: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated eta values.
    #[arg(long, allow_hyphen_values = true)]
    etas: Option<String>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<condens::Error> for Failure {
    fn from(e: condens::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn resolve(common: &CommonArgs, extra: &[(&str, Option<&String>)], flags: &[(&str, bool)]) -> Outcome<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        s.apply_file(path).map_err(Failure::Usage)?;
    }
    for kv in &common.set {
        let Some((k, v)) = kv.split_once('=') else {
            return usage(format!("--set expects KEY=VALUE, got `{kv}`"));
        };
        s.apply(k, v).map_err(Failure::Usage)?;
    }
    let values = [
        ("example", common.example.as_ref()),
        ("estimator", common.estimator.as_ref()),
        ("x", common.x.as_ref()),
        ("n", common.n.as_ref()),
        ("eta", common.eta.as_ref()),
        ("reps", common.reps.as_ref()),
        ("seed", common.seed.as_ref()),
    ];
    for (k, v) in values.iter().chain(extra) {
        if let Some(v) = v {
            s.apply(k, v).map_err(Failure::Usage)?;
        }
    }
    let switches = [
        ("fx_known", common.fx_known),
        ("strict_grid", common.strict_grid),
        ("clamp_nonneg", common.clamp_nonneg),
    ];
    for (k, on) in switches.iter().chain(flags) {
        if *on {
            s.apply(k, "true").map_err(Failure::Usage)?;
        }
    }
    Ok(s)
}

fn manifest(command: &str, common: &CommonArgs, settings: &Settings, outputs: &OutputSet) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "command = {command}");
    let _ = writeln!(m, "version = {}", condens::VERSION);
    let config = common
        .config
        .as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string());
    let _ = writeln!(m, "config_file = {config}");
    if !common.set.is_empty() {
        let _ = writeln!(m, "overrides = {}", common.set.join(" "));
    }
    m.push_str(&settings.echo());
    let names: Vec<&str> = outputs.names().collect();
    let _ = writeln!(m, "outputs = {}", names.join(","));
    m
}

fn commit(command: &str, common: &CommonArgs, settings: &Settings, mut outputs: OutputSet) -> Outcome<()> {
    let text = manifest(command, common, settings, &outputs);
    outputs.add("manifest.txt", text);
    outputs
        .commit()
        .map_err(|e| Failure::Run(format!("cannot write to {}: {e}", common.out.display())))
}

fn validated(cfg: RiskConfig) -> Outcome<RiskConfig> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct MarginalSummary {
    selected_bandwidth: Option<f64>,
    pilot_bandwidth: Option<f64>,
    delta_hat: f64,
    sup_hat: f64,
    floor: f64,
}

#[derive(Serialize)]
struct TraceFile<'a> {
    example: String,
    estimator: String,
    x: f64,
    n: usize,
    eta: f64,
    seed: u64,
    fx_known: bool,
    marginal: MarginalSummary,
    grid: &'a GridReport,
    selection: &'a Selection,
}

fn cmd_estimate(args: &EstimateArgs) -> Outcome<()> {
    let s = resolve(
        &args.common,
        &[("grid_points", args.grid_points.as_ref())],
        &[("truth", args.truth)],
    )?;
    if s.grid_points < 2 {
        return usage("grid_points must be at least 2");
    }
    let cfg = validated(s.cell_config())?;
    let obs = generate(cfg.example, cfg.n, s.seed)?;
    let out = estimate(&obs, &cfg)?;

    let lo = obs.ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = obs.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.5 };
    let (lo, hi) = (lo - pad, hi + pad);
    let m = s.grid_points;
    let mut tsv = String::from(if s.truth { "y\tf_hat\tf_true\n" } else { "y\tf_hat\n" });
    for i in 0..m {
        let y = lo + (hi - lo) * i as f64 / (m - 1) as f64;
        let mut f = out.curve.eval(y);
        if s.clamp_nonneg {
            f = f.max(0.0);
        }
        if !f.is_finite() {
            return Err(Failure::Run(format!("non-finite estimate at y = {y}")));
        }
        let _ = write!(tsv, "{}\t{}", fmt6(y), fmt6(f));
        if s.truth {
            let t = true_conditional_density(cfg.example, cfg.x, y)?;
            let _ = write!(tsv, "\t{}", fmt6(t));
        }
        tsv.push('\n');
    }

    let trace = TraceFile {
        example: cfg.example.to_string(),
        estimator: cfg.estimator.to_string(),
        x: cfg.x,
        n: cfg.n,
        eta: cfg.eta,
        seed: s.seed,
        fx_known: cfg.fx_known,
        marginal: MarginalSummary {
            selected_bandwidth: out.marginal.selected_bandwidth,
            pilot_bandwidth: out.marginal.pilot_bandwidth,
            delta_hat: out.marginal.delta_hat,
            sup_hat: out.marginal.sup_hat,
            floor: out.marginal.floor,
        },
        grid: &out.grid,
        selection: &out.selection,
    };
    let json = serde_json::to_string_pretty(&trace).map_err(|e| Failure::Run(e.to_string()))? + "\n";

    let mut files = OutputSet::new(&args.common.out);
    files.add("curve.tsv", tsv);
    files.add("trace.json", json);
    commit("estimate", &args.common, &s, files)
}

const CSV_HEADER: &str = "example,estimator,x,n,eta,fx_known,mse_mean,mse_stderr,N,base_seed\n";

fn csv_row(r: &RiskReport) -> String {
    let c = &r.config;
    let stderr = if r.stderr_defined { fmt6(r.mse_stderr) } else { "NA".into() };
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        c.example,
        c.estimator,
        fmt6(c.x),
        c.n,
        fmt6(c.eta),
        if c.fx_known { "known" } else { "unknown" },
        fmt6(r.mse_mean),
        stderr,
        c.replications,
        c.base_seed
    )
}

/// Runs the cells, sharing each sample across the cells that differ only in `eta`.
fn run_cells(s: &Settings, cells: &[Cell]) -> Outcome<Vec<RiskReport>> {
    let configs = cells
        .iter()
        .map(|c| validated(s.risk_config(c.example, c.estimator, c.x, c.n, c.eta, c.fx_known)))
        .collect::<Outcome<Vec<_>>>()?;
    let same_group = |a: &RiskConfig, b: &RiskConfig| {
        a.example == b.example
            && a.estimator == b.estimator
            && a.x.to_bits() == b.x.to_bits()
            && a.n == b.n
            && a.fx_known == b.fx_known
    };
    let mut reports: Vec<Option<RiskReport>> = vec![None; configs.len()];
    let mut groups = 0;
    for i in 0..configs.len() {
        if reports[i].is_some() {
            continue;
        }
        groups += 1;
        let members: Vec<usize> = (i..configs.len())
            .filter(|&j| reports[j].is_none() && same_group(&configs[i], &configs[j]))
            .collect();
        let mut etas: Vec<f64> = members.iter().map(|&j| configs[j].eta).collect();
        etas.sort_by(f64::total_cmp);
        etas.dedup_by(|a, b| a.to_bits() == b.to_bits());
        let c = &configs[i];
        eprintln!(
            "[{groups}] {} {} x={} n={} fx={} etas={:?}",
            c.example,
            c.estimator,
            c.x,
            c.n,
            if c.fx_known { "known" } else { "unknown" },
            etas
        );
        let sweep = run_eta_sweep(c, &etas)?;
        for &j in &members {
            let r = sweep
                .iter()
                .find(|r| r.config.eta.to_bits() == configs[j].eta.to_bits())
                .expect("every eta of the group was swept");
            reports[j] = Some(RiskReport {
                config: configs[j].clone(),
                ..r.clone()
            });
        }
    }
    Ok(reports.into_iter().map(|r| r.expect("all cells run")).collect())
}

fn cmd_table(args: &TableArgs) -> Outcome<()> {
    let s = resolve(
        &args.common,
        &[("preset", args.preset.as_ref()), ("cells", args.cells.as_ref())],
        &[],
    )?;
    let cells = match (&s.preset, &s.cells) {
        (Some(_), Some(_)) => return usage("give either a preset or a cell list, not both"),
        (Some(p), None) => presets::preset(p).ok_or_else(|| {
            Failure::Usage(format!(
                "unknown preset `{p}` (expected one of {})",
                presets::PRESET_NAMES.join(", ")
            ))
        })?,
        (None, Some(spec)) => presets::parse_cells(spec).map_err(Failure::Usage)?,
        (None, None) => return usage("no cells: give --preset or --cells"),
    };
    let reports = run_cells(&s, &cells)?;
    let mut csv = String::from(CSV_HEADER);
    for r in &reports {
        csv.push_str(&csv_row(r));
    }
    let mut files = OutputSet::new(&args.common.out);
    files.add("table.csv", csv);
    commit("table", &args.common, &s, files)
}

fn cmd_sweep(args: &SweepArgs) -> Outcome<()> {
    let mut s = resolve(&args.common, &[], &[])?;
    if let Some(v) = &args.etas {
        s.etas = Some(parse_list("etas", v).map_err(Failure::Usage)?);
    }
    let Some(etas) = s.etas.clone() else {
        return usage("no eta values: give --etas");
    };
    let cfg = validated(s.cell_config())?;
    for &eta in &etas {
        validated(RiskConfig { eta, ..cfg.clone() })?;
    }
    let reports = run_eta_sweep(&cfg, &etas)?;
    let mut csv = String::from(CSV_HEADER);
    for r in &reports {
        csv.push_str(&csv_row(r));
    }
    let mut files = OutputSet::new(&args.common.out);
    files.add("sweep.csv", csv);
    commit("sweep", &args.common, &s, files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Table(a) => cmd_table(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
