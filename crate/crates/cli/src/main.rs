//! `tcilab`: runs one configured experiment and writes its artifacts.
//!
//! Exit status 0 on success, 2 for configuration errors, 3 for numerical
//! failures. Nothing is written unless the run succeeds.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Parser;

use config::{Command, DriverBlock, DriverName, ExperimentConfig};
use run::{Outputs, RunError};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const OUTPUT_ENV: &str = "TCILAB_OUTPUT";
const DEFAULT_OUTPUT: &str = "tcilab-out";

#[derive(Debug, Parser)]
#[command(name = "tcilab", version, about = "Transportation-cost and concentration experiments")]
struct Cli {
    command: Command,
    /// Experiment configuration (TOML), or a MANIFEST from an earlier run.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped configuration; see `--list-presets`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: cores − 1).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: $TCILAB_OUTPUT, then ./tcilab-out).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Driver override: bm, fbm, rl, ou or bridge.
    #[arg(long)]
    driver: Option<DriverName>,
    /// Sample-size override.
    #[arg(long)]
    n: Option<usize>,
    /// Print the shipped presets and exit.
    #[arg(long)]
    list_presets: bool,
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, String)> {
    let (mut cfg, source) = if let Some(name) = &cli.preset {
        (config::parse(config::preset(name)?, &format!("preset {name}"))?, format!("preset:{name}"))
    } else if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        (config::parse(&text, &path.display().to_string())?, format!("config:{}", path.display()))
    } else {
        (ExperimentConfig::defaults(cli.command), "flags".to_string())
    };
    if cfg.command != cli.command {
        bail!("configuration is for `{}`, not `{}`", cfg.command.name(), cli.command.name());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.n {
        cfg.sampling.n = n;
    }
    if let Some(kind) = cli.driver {
        match &mut cfg.driver {
            Some(d) => d.kind = kind,
            None => cfg.driver = Some(DriverBlock::new(kind)),
        }
    }
    if cfg.command == Command::Simulate && cfg.driver.is_none() {
        cfg.driver = Some(DriverBlock::new(DriverName::Bm));
    }
    Ok((cfg, source))
}

fn output_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.output
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

struct RunInfo {
    source: String,
    threads: usize,
    started: u64,
    seconds: f64,
}

fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, out: &Outputs, info: &RunInfo) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = cfg.stem();
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut report = serde_json::to_vec_pretty(&serde_json::json!({
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "result": out.report,
    }))?;
    report.push(b'\n');
    files.push((format!("{stem}.json"), report));
    if let Some(csv) = &out.csv {
        files.push((format!("{stem}.csv"), csv.clone()));
    }
    if let Some(bin) = &out.binary {
        files.push((format!("{stem}.bin"), bin.clone()));
    }
    let mut manifest = toml::Table::new();
    let mut run = toml::Table::new();
    run.insert("tcilab_version".into(), env!("CARGO_PKG_VERSION").into());
    run.insert("git_describe".into(), git_describe().into());
    run.insert("source".into(), info.source.clone().into());
    run.insert("threads".into(), (info.threads as i64).into());
    run.insert("started_unix".into(), (info.started as i64).into());
    run.insert("wall_clock_seconds".into(), info.seconds.into());
    let names: Vec<toml::Value> = files.iter().map(|(n, _)| n.clone().into()).collect();
    run.insert("artifacts".into(), names.into());
    manifest.insert("manifest".into(), run.into());
    manifest.insert("experiment".into(), toml::Value::try_from(cfg)?);
    files.push((format!("{stem}.MANIFEST"), toml::to_string(&manifest)?.into_bytes()));

    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_presets {
        for (name, text) in config::PRESETS {
            let command = config::parse(text, name).map(|c| c.command.name()).unwrap_or("?");
            println!("{name}\t{command}");
        }
        return ExitCode::SUCCESS;
    }
    let (cfg, source) = match resolve(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let threads = cli.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get().saturating_sub(1).max(1))
    });
    if threads == 0 {
        eprintln!("configuration error: --threads must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("warning: could not configure the thread pool: {e}");
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let out = match run::execute(&cfg) {
        Ok(out) => out,
        Err(RunError::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(RunError::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let info = RunInfo { source, threads, started, seconds: clock.elapsed().as_secs_f64() };
    match write_artifacts(&output_dir(&cli, &cfg), &cfg, &out, &info) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
