mod args;
mod commands;
mod config;

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command};
use config::{CliConfig, UsageError};

const THREADS_VAR: &str = "EYEDAS_THREADS";

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("{THREADS_VAR} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let cfg = CliConfig::load(&cli.global)?;
    let out_dir = cli.global.out_dir.as_path();
    match &cli.command {
        Command::Train(a) => commands::train_cmd(a, cfg, out_dir),
        Command::Classify(a) => commands::classify_cmd(a, cfg),
        Command::Eval(a) => commands::eval_cmd(a, cfg, out_dir),
        Command::Explain(a) => commands::explain_cmd(a, cfg, out_dir),
        Command::Generate(a) => commands::generate_cmd(a, cfg, out_dir),
        Command::Bench(a) => commands::bench_cmd(a, cfg, out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on malformed command lines.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
