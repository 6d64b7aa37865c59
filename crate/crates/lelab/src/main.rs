use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;
use lelab::config::{Config, FAST_N};
use lelab::io::Artifacts;
use lelab::pipelines::{self, PIPELINES};
use lelab::{exit_code, Failure};

/// Numerical laboratory for the singular Lane-Emden equation on the unit disc.
#[derive(Debug, Parser)]
#[command(name = "lelab", version)]
struct Cli {
    /// One of: solve, sector, scan, nodal, blowup, profile1d, angular, verify-all.
    #[arg(value_parser = PIPELINES)]
    pipeline: String,
    /// JSON configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "lelab_out")]
    out: PathBuf,
    /// Use n = 129.
    #[arg(long)]
    fast: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of ε halvings.
    #[arg(long)]
    schedule_steps: Option<usize>,
}

fn config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(p) = &cfg.pipeline {
        if p != &cli.pipeline {
            bail!(Failure::Config(format!("config names pipeline {p:?} but {:?} was requested", cli.pipeline)));
        }
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(q) = cli.q {
        cfg.q = q;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.schedule_steps {
        cfg.eps_steps = s;
    }
    if cli.fast {
        cfg.n = FAST_N;
    }
    cfg.validate()?;
    Ok(cfg.resolved())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    let cfg_json = serde_json::to_value(&cfg)?;
    if cli.print_defaults {
        // a closed pipe (`| head`) is not an error worth reporting
        let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&cfg_json)?);
        return Ok(());
    }
    let mut art = Artifacts::new(&cli.out)?;
    let outcome = pipelines::run(&cli.pipeline, &cfg, &mut art);
    let manifest = art.finish(&cli.pipeline, &cfg_json)?;
    let summary = outcome?;
    for line in &summary.lines {
        println!("{line}");
    }
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
