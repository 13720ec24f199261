//! Command-line front end for the `ultracoral` simulator.

use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use ultracoral::growth::{grow, simulate_level, GrowthError};
use ultracoral::io::{csv, parse_config_with, ConfigError, EmitterRegistry, RunConfig, TreeDocument};
use ultracoral::kinetics::equilibria;
use ultracoral::vladimirov::{build_generator, verify_spectrum, VladimirovError};

/// Absolute eigenvalue tolerance for `spectrum`.
pub const SPECTRUM_TOL: f64 = 1e-8;

/// Environment fallback for the output directory.
pub const OUT_ENV: &str = "ULTRACORAL_OUT";

#[derive(Parser, Debug)]
#[command(name = "ultracoral", version, about = "p-adic reaction-diffusion coral growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-compartment kinetics run
    React(Common),
    /// Coupled run at the fixed level growth.m_max
    Simulate(Common),
    /// Full branching simulation
    Grow(Common),
    /// Write the generator matrix at level growth.m_max
    Matrix(Common),
    /// Check the generator spectrum against its closed form
    Spectrum(Common),
    /// Equilibria, eigenvalues and stability
    Analyze(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shorthand for --set growth.seed=N
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated tree formats: csv, json, svg, lsys
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Dotted-path override, e.g. model.sigma=0.5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(ConfigError),
    Io(String),
    Solver(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Config(_) | Failure::Io(_) => 1,
            Failure::Solver(_) | Failure::Check(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Config(e) => write!(f, "configuration error: {e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<GrowthError> for Failure {
    fn from(e: GrowthError) -> Self {
        match e {
            GrowthError::Solver { .. } => Failure::Solver(e.to_string()),
            GrowthError::InitialCondition { .. } => Failure::Config(ConfigError::Invalid {
                path: "model.u0".into(),
                message: e.to_string(),
            }),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<VladimirovError> for Failure {
    fn from(e: VladimirovError) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Runs the CLI with process arguments and environment.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let env_out = std::env::var(OUT_ENV).ok();
    run_with(argv, env_out, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the CLI with an explicit output-directory fallback and streams.
pub fn run_with<I, S>(argv: I, env_out: Option<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => 1,
            };
        }
    };
    match dispatch(cli.command, env_out, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.code()
        }
    }
}

struct Context {
    cfg: RunConfig,
    out_dir: PathBuf,
}

fn load(common: &Common, env_out: Option<String>) -> Result<Context, Failure> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = common.set.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("growth.seed={seed}"));
    }
    if let Some(formats) = &common.format {
        let quoted: Vec<String> = formats.iter().map(|f| format!("\"{}\"", f.trim())).collect();
        overrides.push(format!("output.formats=[{}]", quoted.join(",")));
    }
    let cfg = parse_config_with(&text, &overrides)?;
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .or_else(|| env_out.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context { cfg, out_dir })
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

fn emit(ctx: &Context, name: &str, contents: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    let path = write_atomic(&ctx.out_dir, name, contents)
        .map_err(|e| Failure::Io(format!("{}: {e}", ctx.out_dir.join(name).display())))?;
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(())
}

fn dispatch(command: Command, env_out: Option<String>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::React(c) => react(&load(&c, env_out)?, stdout),
        Command::Simulate(c) => simulate(&load(&c, env_out)?, stdout),
        Command::Grow(c) => grow_cmd(&load(&c, env_out)?, stdout),
        Command::Matrix(c) => matrix(&load(&c, env_out)?, stdout),
        Command::Spectrum(c) => spectrum(&load(&c, env_out)?, stdout),
        Command::Analyze(c) => analyze(&load(&c, env_out)?, stdout),
    }
}

fn fixed_run(ctx: &Context, m: u32, stdout: &mut dyn Write) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let model = cfg.model();
    let n = (cfg.model.p as usize).pow(m);
    let ic = cfg.initial_states(n)?;
    let sol = simulate_level(&model, m, &ic, cfg.solver.t_end)?;
    emit(ctx, "timeseries.csv", &csv::timeseries(&sol.trajectory, n), stdout)?;
    emit(
        ctx,
        "events.csv",
        &csv::solver_events(&sol.events, n, cfg.model.kappa_sp),
        stdout,
    )?;
    for ev in &sol.events {
        let _ = writeln!(stdout, "branch {} crossing at t = {}", ev.id, ev.t);
    }
    if sol.events.len() < n {
        let _ = writeln!(
            stdout,
            "{} of {n} branches did not cross before t = {}",
            n - sol.events.len(),
            cfg.solver.t_end
        );
    }
    Ok(())
}

fn react(ctx: &Context, stdout: &mut dyn Write) -> Result<(), Failure> {
    fixed_run(ctx, 0, stdout)
}

fn simulate(ctx: &Context, stdout: &mut dyn Write) -> Result<(), Failure> {
    fixed_run(ctx, ctx.cfg.growth.m_max, stdout)
}

fn grow_cmd(ctx: &Context, stdout: &mut dyn Write) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let root = cfg.initial_states(1)?[0];
    let tree = grow(&cfg.model(), &cfg.growth, root)?;
    let doc = TreeDocument::new(cfg.clone(), tree);
    let registry = EmitterRegistry::default();
    for format in &cfg.output.formats {
        let emitter = registry
            .get(format)
            .ok_or_else(|| Failure::Usage(format!("unknown format `{format}`")))?;
        emit(
            ctx,
            &format!("tree.{}", emitter.extension()),
            &emitter.emit(&doc),
            stdout,
        )?;
        if format == "csv" {
            for level in &doc.tree.levels {
                emit(
                    ctx,
                    &format!("events_level{}.csv", level.level),
                    &csv::events(&level.events),
                    stdout,
                )?;
            }
            emit(ctx, "metrics.csv", &csv::metrics(&doc.tree, 0), stdout)?;
        }
    }
    let m = &doc.metrics;
    let _ = writeln!(
        stdout,
        "levels {}, nodes {}, leaves {}, depth {}",
        doc.tree.levels.len(),
        m.node_count,
        m.leaf_count,
        m.depth
    );
    if let Some(l) = m.lifetimes {
        let _ = writeln!(
            stdout,
            "lifetimes min {} max {} relative range {}",
            l.min, l.max, l.relative_range
        );
    }
    if doc.out_of_regime {
        let _ = writeln!(stdout, "note: beta >= 0, run is outside the physical regime");
    }
    Ok(())
}

fn matrix(ctx: &Context, stdout: &mut dyn Write) -> Result<(), Failure> {
    let m = &ctx.cfg.model;
    let gen = build_generator(m.p, ctx.cfg.growth.m_max, m.alpha)?;
    emit(ctx, "generator.csv", &csv::matrix(&gen), stdout)
}

fn spectrum(ctx: &Context, stdout: &mut dyn Write) -> Result<(), Failure> {
    let m = &ctx.cfg.model;
    let level = ctx.cfg.growth.m_max;
    let report = verify_spectrum(m.p, level, m.alpha)?;
    emit(ctx, "spectrum.csv", &csv::spectrum(&report), stdout)?;
    let _ = writeln!(
        stdout,
        "p={} m={} alpha={}: symmetric {}, max |row sum| {:e}, max eigenvalue error {:e}, multiplicities {}",
        m.p,
        level,
        m.alpha,
        report.symmetric,
        report.max_row_sum,
        report.max_abs_error,
        if report.multiplicities_match { "match" } else { "differ" }
    );
    if report.passes(SPECTRUM_TOL) {
        Ok(())
    } else {
        Err(Failure::Check(format!("spectrum deviates beyond {SPECTRUM_TOL:e}")))
    }
}

fn analyze(ctx: &Context, stdout: &mut dyn Write) -> Result<(), Failure> {
    let points = equilibria(&ctx.cfg.model.kinetics());
    let table = csv::equilibria(&points);
    let _ = write!(stdout, "{table}");
    emit(ctx, "equilibria.csv", &table, stdout)
}
