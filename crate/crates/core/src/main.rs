use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::info;

use ptspec::io::{load_config, CacheStatus, EigenCache, TaskKind};
use ptspec::tasks::{run_task, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "ptspec", version, about = "Spectra of PT/J-symmetric operator families")]
struct Cli {
    /// spectrum | classify | reality | sweep | doublewell-fit
    #[arg(value_parser = parse_task)]
    task: TaskKind,

    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (default: `dir` from [output], else `out`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Eigendecomposition cache directory (default: $PTSPEC_CACHE, else ~/.cache/ptspec).
    #[arg(long)]
    cache: Option<PathBuf>,

    /// Single coupling value replacing the configured list.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,

    /// Do not read or write the cache.
    #[arg(long)]
    no_cache: bool,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse()
}

fn cache_dir(cli: &Cli) -> Option<PathBuf> {
    if cli.no_cache {
        return None;
    }
    if let Some(d) = &cli.cache {
        return Some(d.clone());
    }
    if let Some(d) = std::env::var_os("PTSPEC_CACHE").filter(|d| !d.is_empty()) {
        return Some(PathBuf::from(d));
    }
    let home = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .unwrap_or_else(std::env::temp_dir);
    Some(home.join("ptspec"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ptspec: {}: {e}", cli.config.display());
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir())
        .unwrap_or_else(|| PathBuf::from("out"));
    let options = RunOptions {
        epsilon: cli.epsilon,
        cache: cache_dir(&cli).map(EigenCache::at).unwrap_or_else(EigenCache::disabled),
    };

    let output = run_task(&config, cli.task, &options);
    match output.cache_status {
        Some(CacheStatus::Hit) => info!("H0 eigendecomposition loaded from cache"),
        Some(CacheStatus::Corrupt) => info!("corrupt cache entry recomputed and rewritten"),
        _ => {}
    }
    if let Err(e) = output.write(&out) {
        eprintln!("ptspec: cannot write results to {}: {e}", out.display());
        return ExitCode::from(1);
    }
    match &output.report.error {
        None => println!("{}: ok ({})", cli.task, out.join("report.json").display()),
        Some(err) => eprintln!("{}: {}: {}", cli.task, err.kind, err.message),
    }
    ExitCode::from(output.exit_code() as u8)
}
