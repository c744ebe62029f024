//! Scenario runner: wires sensors, robots, cloud and expert into one simulation.

pub mod config;
pub mod event;
pub mod live;
pub mod metrics;
pub mod run;
pub mod world;

pub use config::{ConfigError, ScenarioConfig};
pub use event::{Carried, Delivery, Event, Notice, RosterEntry, CLOUD, EXPERT, GATEWAY};
pub use live::{LiveHooks, LiveRun, PatientStatus, Snapshot, Submitter};
pub use metrics::{qoe, MetricsBuilder, PatientMetrics, RunMetrics};
pub use run::{partial_trace_path, write_outputs, 
    finish, prepare, replay_dir, replay_file, replay_trace, run_to_dir, simulate, stored_metrics, ReplayError,
    RunError, RunOutput, CONFIG_FILE, METRICS_FILE, TRACE_FILE,
};
pub use world::World;
