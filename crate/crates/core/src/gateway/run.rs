use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::config::{ConfigError, ScenarioConfig};
use super::event::{Event, Notice, GATEWAY};
use super::metrics::{MetricsBuilder, RunMetrics};
use super::world::World;
use crate::sim_kernel::{Kernel, KernelError, SimTime};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.resolved.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("simulation error: {0}")]
    Kernel(#[from] KernelError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt trace at line {line}: {message}")]
    CorruptTrace { line: usize, message: String },
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace_hash: u64,
    pub events: u64,
}

/// A kernel and world ready to run, with events for t = 0 queued.
pub fn prepare(cfg: &ScenarioConfig, trace: Option<Box<dyn Write + Send>>) -> Result<(Kernel<Event>, World), RunError> {
    let mut world = World::new(cfg.clone())?;
    let mut kernel = Kernel::new();
    if let Some(out) = trace {
        kernel = kernel.with_trace_output(out);
    }
    world.bootstrap(&mut kernel)?;
    Ok((kernel, world))
}

/// Emit the trailer record and flush. The trailer is always the last trace line.
pub fn finish(kernel: &mut Kernel<Event>, world: &mut World) -> Result<RunOutput, RunError> {
    let horizon = world.horizon();
    kernel.run_until(horizon, world)?;
    let events = kernel.processed();
    kernel.schedule(horizon, GATEWAY, Event::Notify(Notice::RunFinished { events }))?;
    kernel.run_until(horizon, world)?;
    Ok(RunOutput {
        metrics: world.metrics.finish(),
        trace_hash: kernel.trace_hash(),
        events: kernel.processed(),
    })
}

/// Run a scenario headless, optionally streaming the trace to `trace`.
pub fn simulate(cfg: &ScenarioConfig, trace: Option<Box<dyn Write + Send>>) -> Result<RunOutput, RunError> {
    let (mut kernel, mut world) = prepare(cfg, trace)?;
    finish(&mut kernel, &mut world)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn partial(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!(".{name}.partial"))
}

fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<(), RunError> {
    let tmp = partial(dir, name);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    let dst = dir.join(name);
    fs::rename(&tmp, &dst).map_err(io_err(&dst))
}

/// Run a scenario and write trace, metrics and resolved config into `dir`.
///
/// Files appear only once complete; a failed run leaves no partial outputs.
pub fn run_to_dir(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutput, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = partial(dir, TRACE_FILE);
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let result = simulate(cfg, Some(Box::new(io::BufWriter::new(file))));
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
    };
    write_outputs(cfg, dir, &out)?;
    Ok(out)
}

/// Publish a finished run whose trace was streamed to the partial trace file.
pub fn write_outputs(cfg: &ScenarioConfig, dir: &Path, out: &RunOutput) -> Result<(), RunError> {
    write_atomic(dir, CONFIG_FILE, cfg.to_json().as_bytes())?;
    let tmp = partial(dir, TRACE_FILE);
    let dst = dir.join(TRACE_FILE);
    fs::rename(&tmp, &dst).map_err(io_err(&dst))?;
    let mut m = out.metrics.to_json();
    m.push('\n');
    write_atomic(dir, METRICS_FILE, m.as_bytes())
}

/// Path of the trace file being streamed while a run is in progress.
pub fn partial_trace_path(dir: &Path) -> PathBuf {
    partial(dir, TRACE_FILE)
}

/// Recompute metrics from a trace. Fails on unparsable lines or a missing trailer.
pub fn replay_trace<R: BufRead>(reader: R) -> Result<RunMetrics, ReplayError> {
    let mut builder = MetricsBuilder::new();
    let mut finished = None;
    let mut line_no = 0;
    for line in reader.lines() {
        line_no += 1;
        let line = line.map_err(|e| ReplayError::CorruptTrace {
            line: line_no,
            message: e.to_string(),
        })?;
        let corrupt = |message: String| ReplayError::CorruptTrace { line: line_no, message };
        if let Some(events) = finished {
            return Err(corrupt(format!("content after the end-of-run record ({events} events)")));
        }
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        let field = |name: &str| v.get(name).ok_or_else(|| corrupt(format!("missing field {name}")));
        let t = field("t")?.as_u64().ok_or_else(|| corrupt("t is not an integer".into()))?;
        let target = field("target")?
            .as_str()
            .ok_or_else(|| corrupt("target is not a string".into()))?;
        let kind = field("kind")?.as_str().ok_or_else(|| corrupt("kind is not a string".into()))?;
        let event = Event::from_trace(kind, field("payload")?.clone()).map_err(|e| corrupt(e.to_string()))?;
        if let Event::Notify(Notice::RunFinished { events }) = &event {
            if *events + 1 != line_no as u64 {
                return Err(corrupt(format!("end-of-run record counts {events} events, found {}", line_no - 1)));
            }
            finished = Some(*events);
        }
        builder.observe(SimTime(t), target, &event);
    }
    if finished.is_none() {
        return Err(ReplayError::CorruptTrace {
            line: line_no + 1,
            message: "trace ends without an end-of-run record".into(),
        });
    }
    Ok(builder.finish())
}

pub fn replay_file(path: &Path) -> Result<RunMetrics, ReplayError> {
    let file = fs::File::open(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    replay_trace(BufReader::new(file))
}

/// Replay the trace in a run directory.
pub fn replay_dir(dir: &Path) -> Result<RunMetrics, ReplayError> {
    replay_file(&dir.join(TRACE_FILE))
}

/// Metrics stored in a run directory, for comparison with a replay.
pub fn stored_metrics(dir: &Path) -> Result<RunMetrics, ReplayError> {
    let path = dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|source| ReplayError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ReplayError::CorruptTrace {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}
