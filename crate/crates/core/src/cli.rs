//! `lanewise` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 missing artifact (usually the q table), 5 validation tolerance exceeded.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{base_case_template, parse_count, RunConfig, SweepSpec, SweepVar};
use crate::error::Error;
use crate::estimation::{fit_lognormal, read_headways};
use crate::lanechange::{p_multilane_with, profile_with, ConvolutionMethod, Quadrature};
use crate::qtable::{
    export_isosurface_slice, load_table, precompute_table_with_progress, save_table, write_isosurface_csv,
    GridAxes, QTable,
};
use crate::report::{sig6, write_profile_csv};
use crate::simulator::{compare_with_model_using, SimConfig};

pub const TABLE_ENV: &str = "LANEWISE_QTABLE";

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Missing(String),
    Tolerance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Missing(_) => 4,
            Failure::Tolerance(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Missing(m) | Failure::Tolerance(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Parameter(_) | Error::SampleSize { .. } | Error::Config(_) => Failure::Usage(msg),
            Error::MissingArtifact(_) => Failure::Missing(msg),
            Error::Io(_)
            | Error::Integrity(_)
            | Error::Shape(_)
            | Error::Version { .. }
            | Error::Checksum { .. }
            | Error::Truncated { .. } => Failure::Io(msg),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

type CmdResult = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "lanewise", version, about = "Lane-change success probabilities from log-normal headways")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate q(g, mu, sigma) by Monte Carlo and write the table file.
    Precompute(PrecomputeArgs),
    /// P(S) as a function of distance for the configured scenario.
    Profile(ProfileArgs),
    /// One profile per value of rho_l, delta or v1, plus a cross-section.
    Sweep(SweepArgs),
    /// Compare the model against the microsimulation at the checkpoints.
    Validate(ValidateArgs),
    /// Fit log-normal headway parameters to a sample file.
    Fit(FitArgs),
    /// Grid nodes whose q lies near a level, as CSV.
    ExportIso(ExportIsoArgs),
    /// Print a base-case configuration file.
    Init(InitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxesChoice {
    /// 101 x 121 x 41
    Default,
    /// 3 x 3 x 3
    Mini,
}

fn parse_trials(s: &str) -> Result<u64, String> {
    let t: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    parse_count(t).ok_or_else(|| format!("{s:?} is not a positive integer"))
}

#[derive(Args, Debug)]
struct PrecomputeArgs {
    /// Monte Carlo windows per cell; accepts forms like 1e5.
    #[arg(long, default_value = "1e5", value_parser = parse_trials)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "default")]
    axes: AxesChoice,
    /// Replace the sigma axis with a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    sigma_values: Option<Vec<f64>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// q table file; falls back to the config's `table`, then $LANEWISE_QTABLE.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Output CSV; defaults to the config's `output`, then stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Quadrature grid step (m).
    #[arg(long)]
    grid_step: Option<f64>,
    /// Use FFT convolution for three or more lanes.
    #[arg(long)]
    fft: bool,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    common: TableArgs,
    /// Distance between samples (m).
    #[arg(long)]
    sample_step: Option<f64>,
    /// Override the goal distance (m).
    #[arg(long)]
    goal: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: TableArgs,
    #[arg(long)]
    var: Option<String>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Cross-section distance (m).
    #[arg(long)]
    at: Option<f64>,
    /// Cross-section CSV; defaults to `<output stem>.cross.csv` next to the output.
    #[arg(long)]
    cross_section: Option<PathBuf>,
    #[arg(long)]
    sample_step: Option<f64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: TableArgs,
    #[arg(long, value_parser = parse_trials)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest acceptable |model - simulation| at any checkpoint.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    /// Report divergence without failing.
    #[arg(long)]
    qualitative: bool,
    /// Per-vehicle speed spread (km/h) in the simulation.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Single-column headway file (m).
    sample: PathBuf,
    /// Write mu and sigma into this configuration file.
    #[arg(long, requires = "lane")]
    into: Option<PathBuf>,
    /// 1-based lane number of the entry to rewrite.
    #[arg(long)]
    lane: Option<usize>,
}

#[derive(Args, Debug)]
struct ExportIsoArgs {
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InitArgs {
    #[arg(long, default_value_t = 2)]
    lanes: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Precompute(a) => precompute(a),
        Command::Profile(a) => profile(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
        Command::Fit(a) => fit(a),
        Command::ExportIso(a) => export_iso(a),
        Command::Init(a) => init(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lanewise: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(io_failure(p))?))),
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn finish(result: io::Result<()>, path: Option<&Path>) -> CmdResult {
    result.map_err(|e| match path {
        Some(p) => Failure::Io(format!("{}: {e}", p.display())),
        None => Failure::Io(format!("stdout: {e}")),
    })
}

fn resolve_table(flag: Option<&Path>, config: Option<&RunConfig>) -> Result<QTable, Failure> {
    let path = flag
        .map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.table.clone()))
        .or_else(|| std::env::var_os(TABLE_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            Failure::Missing(format!("no q table given; pass --table, set `table` in the config, or set {TABLE_ENV}"))
        })?;
    Ok(load_table(&path)?)
}

struct Loaded {
    config: RunConfig,
    table: QTable,
    quad: Quadrature,
    output: Option<PathBuf>,
}

fn load_common(args: &TableArgs) -> Result<Loaded, Failure> {
    let config = RunConfig::load(&args.config)?;
    let table = resolve_table(args.table.as_deref(), Some(&config))?;
    let mut quad = Quadrature::with_step(args.grid_step.unwrap_or(config.grid_step));
    if args.fft {
        quad.method = ConvolutionMethod::Fft;
    }
    quad.validate()?;
    let output = args.output.clone().or_else(|| config.output.clone());
    Ok(Loaded { config, table, quad, output })
}

fn precompute(a: PrecomputeArgs) -> CmdResult {
    let base = match a.axes {
        AxesChoice::Default => GridAxes::standard(),
        AxesChoice::Mini => GridAxes::mini(),
    };
    let axes = match a.sigma_values {
        Some(s) => GridAxes::new(base.g().to_vec(), base.mu().to_vec(), s)?,
        None => base,
    };
    let (ng, nmu, nsig) = axes.shape();
    eprintln!(
        "precompute: {ng} x {nmu} x {nsig} = {} cells, {} trials per cell, seed {}",
        axes.len(),
        a.trials,
        a.seed
    );
    let started = Instant::now();
    let last_pct = AtomicUsize::new(0);
    let progress = |done: usize, total: usize| {
        let pct = done * 100 / total;
        if pct > last_pct.fetch_max(pct, Ordering::Relaxed) && pct.is_multiple_of(5) {
            eprintln!("precompute: {pct:3}% ({done}/{total} columns, {:.1} s)", started.elapsed().as_secs_f64());
        }
    };
    let run = || precompute_table_with_progress(&axes, a.trials, a.seed, &progress);
    let table = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Usage(format!("--threads: {e}")))?
            .install(run)?,
        None => run()?,
    };
    save_table(&table, &a.output)?;
    let values = table.values();
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
    let ones = values.iter().filter(|&&v| v == 1.0).count();
    let zeros = values.iter().filter(|&&v| v == 0.0).count();
    println!(
        "cells={} mean_q={:.6} ones={} zeros={} elapsed_s={:.2} output={}",
        values.len(),
        mean,
        ones,
        zeros,
        started.elapsed().as_secs_f64(),
        a.output.display()
    );
    Ok(())
}

fn profile(a: ProfileArgs) -> CmdResult {
    let l = load_common(&a.common)?;
    let scenario = match a.goal {
        Some(goal) => l.config.scenario.with_goal_distance(goal)?,
        None => l.config.scenario.clone(),
    };
    if let Some(w) = scenario.range_warning() {
        eprintln!("warning: {w}");
    }
    let p = profile_with(&scenario, &l.table, a.sample_step.unwrap_or(l.config.sample_step), &l.quad)?;
    let out = l.output.as_deref();
    finish(write_profile_csv(&p.distances, &p.probabilities, open_output(out)?), out)
}

fn sweep(a: SweepArgs) -> CmdResult {
    let l = load_common(&a.common)?;
    let from_config = l.config.sweep.clone();
    let var = match (&a.var, &from_config) {
        (Some(v), _) => v.parse::<SweepVar>()?,
        (None, Some(s)) => s.var,
        (None, None) => return Err(Failure::Usage("no sweep variable; pass --var or add a [sweep] block".into())),
    };
    let pick = |flag: Option<f64>, cfg: Option<f64>, name: &str| {
        flag.or(cfg).ok_or_else(|| Failure::Usage(format!("sweep needs --{name} or [sweep].{name}")))
    };
    let spec = SweepSpec {
        var,
        from: pick(a.from, from_config.as_ref().map(|s| s.from), "from")?,
        to: pick(a.to, from_config.as_ref().map(|s| s.to), "to")?,
        step: pick(a.step, from_config.as_ref().map(|s| s.step), "step")?,
        at: a.at.or(from_config.as_ref().map(|s| s.at)).unwrap_or(SweepSpec::DEFAULT_AT),
    };
    let values = spec.values()?;
    let sample_step = a.sample_step.unwrap_or(l.config.sample_step);

    let mut rows = Vec::new();
    let mut cross = Vec::new();
    for &value in &values {
        let scenario = l.config.scenario_at(var, value)?;
        let p = profile_with(&scenario, &l.table, sample_step, &l.quad)?;
        rows.push((value, p));
        let at = scenario.with_goal_distance(spec.at)?;
        cross.push((value, p_multilane_with(&at, &l.table, &l.quad)?));
    }

    let out = l.output.as_deref();
    let write_long = |mut w: Box<dyn Write>| -> io::Result<()> {
        writeln!(w, "sweep_value,d_m,p")?;
        for (value, p) in &rows {
            for (d, prob) in p.distances.iter().zip(&p.probabilities) {
                writeln!(w, "{},{},{}", sig6(*value), sig6(*d), sig6(*prob))?;
            }
        }
        w.flush()
    };
    finish(write_long(open_output(out)?), out)?;

    let cross_path = a.cross_section.clone().or_else(|| {
        out.map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            p.with_file_name(format!("{stem}.cross.csv"))
        })
    });
    if let Some(path) = cross_path {
        let write_cross = |mut w: Box<dyn Write>| -> io::Result<()> {
            writeln!(w, "sweep_value,d_m,p")?;
            for (value, p) in &cross {
                writeln!(w, "{},{},{}", sig6(*value), sig6(spec.at), sig6(*p))?;
            }
            w.flush()
        };
        finish(write_cross(open_output(Some(&path))?), Some(&path))?;
        eprintln!("sweep: {} values of {var}; cross-section at {} m in {}", values.len(), spec.at, path.display());
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> CmdResult {
    if !(a.tolerance >= 0.0) {
        return Err(Failure::Usage(format!("--tolerance must be non-negative, got {}", a.tolerance)));
    }
    let l = load_common(&a.common)?;
    let config = SimConfig {
        scenario: l.config.scenario.clone(),
        trials: a.trials.unwrap_or(l.config.trials),
        dt: a.dt.unwrap_or(l.config.dt),
        checkpoint_interval: l.config.checkpoint_interval,
        seed: a.seed.unwrap_or(l.config.seed),
        jitter_speed_kmh: a.jitter.or(l.config.jitter_kmh),
    };
    let cmp = compare_with_model_using(&config, &l.table, &l.quad)?;
    let out = l.output.as_deref();
    finish(cmp.write_csv(open_output(out)?), out)?;

    let exceeded = cmp.max_abs_error > a.tolerance;
    println!(
        "trials={} checkpoints={} max_abs_error={:.6} mean_abs_error={:.6} tolerance={}",
        config.trials,
        cmp.abs_errors.len(),
        cmp.max_abs_error,
        cmp.mean_abs_error,
        a.tolerance
    );
    if a.qualitative {
        let rise = |v: &[f64]| v.last().copied().unwrap_or(0.0) - v.first().copied().unwrap_or(0.0);
        println!(
            "qualitative: simulated rise={:.6} model rise={:.6} diverges={}",
            rise(&cmp.report.probabilities),
            rise(&cmp.model),
            if exceeded { "yes" } else { "no" }
        );
        return Ok(());
    }
    if exceeded {
        return Err(Failure::Tolerance(format!(
            "max |model - simulation| = {:.6} exceeds tolerance {}",
            cmp.max_abs_error, a.tolerance
        )));
    }
    println!("PASS");
    Ok(())
}

fn fit(a: FitArgs) -> CmdResult {
    let file = File::open(&a.sample).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Failure::Usage(format!("{}: no such file", a.sample.display())),
        _ => Failure::Io(format!("{}: {e}", a.sample.display())),
    })?;
    let sample = read_headways(BufReader::new(file), a.lane.unwrap_or(0))
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.sample.display())))?;
    let (mu, sigma) = fit_lognormal(&sample).map_err(|e| Failure::Usage(format!("{}: {e}", a.sample.display())))?;
    println!("mu={mu:.6} sigma={sigma:.6}");
    if let (Some(path), Some(lane)) = (a.into.as_deref(), a.lane) {
        inject_fit(path, lane, mu, sigma)?;
        eprintln!("fit: wrote lane {lane} of {}", path.display());
    }
    Ok(())
}

/// Rewrites `mu`/`sigma` of the `lane`-th `[[lane]]` block, keeping the rest
/// of the document (comments, ordering) intact.
fn inject_fit(path: &Path, lane: usize, mu: f64, sigma: f64) -> CmdResult {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Failure::Usage(format!("{}: no such file", path.display())),
        _ => Failure::Io(format!("{}: {e}", path.display())),
    })?;
    let mut doc: toml_edit::DocumentMut =
        text.parse().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if doc.contains_key("traffic") {
        return Err(Failure::Usage(format!(
            "{} describes lanes through [traffic]; fitted parameters need explicit [[lane]] entries",
            path.display()
        )));
    }
    let lanes = doc
        .get_mut("lane")
        .and_then(|l| l.as_array_of_tables_mut())
        .ok_or_else(|| Failure::Usage(format!("{} has no [[lane]] entries", path.display())))?;
    let count = lanes.len();
    let entry = lane
        .checked_sub(1)
        .and_then(|i| lanes.get_mut(i))
        .ok_or_else(|| Failure::Usage(format!("--lane {lane} out of range; the config has {count} lanes")))?;
    entry.remove("headways");
    entry["mu"] = toml_edit::value(mu);
    entry["sigma"] = toml_edit::value(sigma);
    std::fs::write(path, doc.to_string()).map_err(io_failure(path))
}

fn export_iso(a: ExportIsoArgs) -> CmdResult {
    let table = resolve_table(a.table.as_deref(), None)?;
    let records = export_isosurface_slice(&table, a.level, a.tolerance)?;
    let out = a.output.as_deref();
    finish(write_isosurface_csv(&records, open_output(out)?), out)?;
    eprintln!("export-iso: {} nodes within {} of {}", records.len(), a.tolerance, a.level);
    Ok(())
}

fn init(a: InitArgs) -> CmdResult {
    if a.lanes < 2 {
        return Err(Failure::Usage(format!("--lanes must be at least 2, got {}", a.lanes)));
    }
    let out = a.output.as_deref();
    let mut w = open_output(out)?;
    finish(w.write_all(base_case_template(a.lanes).as_bytes()).and_then(|_| w.flush()), out)
}
