use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use ecsim_core::gateway::run::{partial_trace_path, write_outputs};
use ecsim_core::gateway::{replay_dir, run_to_dir, ConfigError, ReplayError, RunError, ScenarioConfig, METRICS_FILE};

#[derive(Debug, Parser)]
#[command(name = "simctl", version, about = "Run, replay and serve therapy-edge simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario headless and write trace.jsonl, metrics.json and config.resolved.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Virtual run length in milliseconds.
        #[arg(long)]
        duration: Option<u64>,
        /// Output directory [default: runs/<config name>-s<seed>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics from a run's trace and compare them with its metrics.json.
    Replay { dir: PathBuf },
    /// Start a live-paced run with the HTTP steering API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Virtual milliseconds per wall-clock millisecond.
        #[arg(long, default_value_t = 10.0)]
        pace: f64,
        /// Write the run's outputs here when it ends.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = if error.is::<ConfigError>() { 2 } else { 1 };
        Failure { code, error }
    }
}

pub fn load_config(path: &Path, seed: Option<u64>, duration: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ScenarioConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration_ms = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_out(config: &Path, seed: u64) -> PathBuf {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    PathBuf::from("runs").join(format!("{stem}-s{seed}"))
}

pub fn run(config: &Path, seed: Option<u64>, duration: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config, seed, duration)?;
    let dir = out.unwrap_or_else(|| default_out(config, cfg.seed));
    tracing::info!(seed = cfg.seed, duration_ms = cfg.duration_ms, dir = %dir.display(), "running");
    let started = std::time::Instant::now();
    let out = run_to_dir(&cfg, &dir).map_err(|e| match e {
        RunError::Config(c) => Failure::from(c),
        other => Failure::from(other),
    })?;
    tracing::info!(events = out.events, elapsed_ms = started.elapsed().as_millis() as u64, "done");
    println!("{} events, trace hash {:016x}, outputs in {}", out.events, out.trace_hash, dir.display());
    Ok(())
}

pub fn replay(dir: &Path) -> Result<(), Failure> {
    let metrics = replay_dir(dir).map_err(|e| match e {
        ReplayError::CorruptTrace { .. } => Failure { code: 3, error: e.into() },
        ReplayError::Io { .. } => Failure::from(e),
    })?;
    let recomputed = format!("{}\n", metrics.to_json());
    print!("{recomputed}");
    let stored_path = dir.join(METRICS_FILE);
    let stored = fs::read_to_string(&stored_path).with_context(|| format!("reading {}", stored_path.display()))?;
    if stored != recomputed {
        return Err(Failure {
            code: 1,
            error: anyhow::anyhow!("recomputed metrics differ from {}", stored_path.display()),
        });
    }
    tracing::info!("metrics match {}", stored_path.display());
    Ok(())
}

pub async fn serve(config: &Path, host: IpAddr, port: u16, pace: f64, out: Option<PathBuf>) -> Result<(), Failure> {
    if !(pace.is_finite() && pace > 0.0) {
        return Err(Failure {
            code: 2,
            error: anyhow::anyhow!("--pace must be a positive number"),
        });
    }
    let cfg = load_config(config, None, None)?;
    let trace: Option<Box<dyn std::io::Write + Send>> = match &out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let file = fs::File::create(partial_trace_path(dir))?;
            Some(Box::new(std::io::BufWriter::new(file)))
        }
        None => None,
    };
    let addr = SocketAddr::new(host, port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    let handle = crate::live::start(&cfg, pace, trace)?;
    tracing::info!(%addr, pace, "serving live run");
    axum::serve(listener, crate::api::router(handle.shared.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    handle.stop();
    let result = tokio::task::spawn_blocking(move || handle.join()).await?;
    let output = result?;
    if let Some(dir) = out {
        let mut cfg = cfg;
        cfg.expert.live = true;
        write_outputs(&cfg, &dir, &output)?;
        println!("{} events, trace hash {:016x}, outputs in {}", output.events, output.trace_hash, dir.display());
    }
    Ok(())
}
