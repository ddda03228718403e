use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sktlab::experiments::{
    emit_metadata, emit_results, run_study, ExperimentError, Format, RunMetadata, StudyConfig, StudyKind,
};

const THREADS_ENV: &str = "SKTLAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "sktlab", version, about = "Replica studies for the two-species lattice walk")]
struct Cli {
    #[command(subcommand)]
    study: Study,

    /// TOML file overriding the study preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (default `results`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; overrides SKTLAB_THREADS and the config file.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,

    /// Record zero runtimes.
    #[arg(long, global = true)]
    no_timing: bool,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Study {
    /// Stochastic gap against N for a constant target.
    GapVsN,
    /// Deterministic gap against M for a smooth reference.
    DetOrder,
    /// Sup-in-time L² gap against N at small M.
    Rough,
    /// Martingale variance against the predicted quadratic variation.
    Qv,
    /// Randomized duality certificates.
    Duality,
    /// Response to eigenmode perturbations of a constant state.
    Stability,
}

impl From<Study> for StudyKind {
    fn from(s: Study) -> Self {
        match s {
            Study::GapVsN => StudyKind::GapVsN,
            Study::DetOrder => StudyKind::DetOrder,
            Study::Rough => StudyKind::Rough,
            Study::Qv => StudyKind::Qv,
            Study::Duality => StudyKind::Duality,
            Study::Stability => StudyKind::Stability,
        }
    }
}

fn exit_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::Config(_) | ExperimentError::Smallness { .. } => 2,
        ExperimentError::Io { .. } => 3,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<StudyConfig, ExperimentError> {
    let kind = StudyKind::from(cli.study);
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            StudyConfig::from_toml_as(&text, kind)?
        }
        None => StudyConfig::preset(kind),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.no_timing {
        cfg.record_timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_budget(cli: &Cli, cfg: &StudyConfig) -> Result<(usize, &'static str), ExperimentError> {
    if let Some(k) = cli.threads {
        return Ok((k, "cli"));
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k = v
            .trim()
            .parse::<usize>()
            .map_err(|_| ExperimentError::Config(format!("{THREADS_ENV}=`{v}` is not a thread count")))?;
        return Ok((k, "env"));
    }
    if let Some(k) = cfg.threads {
        return Ok((k, "config"));
    }
    let k = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    Ok((k, "default"))
}

fn run(cli: &Cli) -> Result<bool, ExperimentError> {
    let cfg = load_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let (threads, source) = thread_budget(cli, &cfg)?;
    if threads == 0 {
        return Err(ExperimentError::Config("thread budget must be positive".into()));
    }
    let format: Format = cli.format.parse().map_err(ExperimentError::Config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));

    let start = Instant::now();
    let result = run_study(&cfg, threads)?;
    let elapsed = start.elapsed().as_secs_f64();
    let path = emit_results(&result, format, &out)?;
    emit_metadata(
        &RunMetadata {
            study: cfg.study,
            threads,
            threads_source: source.to_string(),
            runtime_s: if cfg.record_timing { elapsed } else { 0.0 },
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        &out,
    )?;

    println!("{} -> {}", cfg.study, path.display());
    if let Some(s) = result.slope {
        println!("slope {s:.4} (se {:?})", result.slope_err);
    }
    for c in &result.checks {
        println!(
            "[{}] {}: {:?} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.detail
        );
    }
    Ok(result.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
