use std::process::ExitCode;

use clap::Parser;
use simctl::commands::{self, Cli, Command};
use tracing_subscriber::EnvFilter;

fn init_logging() {
    let level = std::env::var("SIMCTL_LOG_LEVEL").unwrap_or_else(|_| "info".into());
    let known = matches!(level.as_str(), "error" | "info" | "debug");
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::new(if known { level.as_str() } else { "info" }))
        .with_writer(std::io::stderr)
        .init();
    if !known {
        tracing::warn!("SIMCTL_LOG_LEVEL={level} not one of error, info, debug; using info");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            duration,
            out,
        } => commands::run(&config, seed, duration, out),
        Command::Replay { dir } => commands::replay(&dir),
        Command::Serve {
            config,
            port,
            host,
            pace,
            out,
        } => tokio::runtime::Runtime::new()
            .map_err(commands::Failure::from)
            .and_then(|rt| rt.block_on(commands::serve(&config, host, port, pace, out))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("simctl: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
