//! A paced live run on its own thread, bridged to the async API.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use ecsim_core::cloud_services::CloudError;
use ecsim_core::gateway::{LiveHooks, LiveRun, Notice, RunError, RunOutput, ScenarioConfig, Snapshot, Submitter};
use ecsim_core::protocol::{ExpertRecommendation, ValidationContext};
use ecsim_core::sim_kernel::SimTime;
use tokio::sync::{broadcast, oneshot, watch};

pub type Resolution = Result<(), CloudError>;

/// Notices forwarded to stream subscribers.
pub const STREAMED: &[&str] = &[
    "risk_changed",
    "alert_raised",
    "alert_cleared",
    "session_started",
    "session_closed",
    "stage_changed",
    "recommendation_applied",
    "recommendation_rejected",
    "feedback",
    "run_finished",
];

#[derive(Debug, Clone)]
pub struct FeedEvent {
    pub name: &'static str,
    pub seq: u64,
    pub data: String,
}

impl FeedEvent {
    fn of(t: SimTime, seq: u64, notice: &Notice) -> FeedEvent {
        let mut v = ecsim_core::canonical::to_value(notice);
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("t".into(), t.millis().into());
            map.insert("seq".into(), seq.into());
        }
        FeedEvent {
            name: notice.name(),
            seq,
            data: ecsim_core::canonical::to_string(&v),
        }
    }
}

/// State shared between the simulation thread and request handlers.
pub struct Shared {
    pub snapshot: watch::Receiver<Arc<Snapshot>>,
    pub feed: broadcast::Sender<FeedEvent>,
    pub vctx: ValidationContext,
    pub patients: BTreeSet<String>,
    /// How long a POST waits for the cloud to route a recommendation.
    pub reply_timeout: Duration,
    submitter: Submitter,
    tickets: Mutex<HashMap<u64, oneshot::Sender<Resolution>>>,
    next_ticket: AtomicU64,
}

impl Shared {
    /// Queue a recommendation; the receiver fires once the cloud has routed it.
    pub fn submit(&self, rec: ExpertRecommendation) -> oneshot::Receiver<Resolution> {
        let ticket = self.next_ticket.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = oneshot::channel();
        self.tickets.lock().unwrap().insert(ticket, tx);
        self.submitter.submit(rec, ticket);
        rx
    }

    fn resolve(&self, ticket: u64, result: Resolution) {
        if let Some(tx) = self.tickets.lock().unwrap().remove(&ticket) {
            let _ = tx.send(result);
        }
    }
}

struct Bridge {
    snapshot: watch::Sender<Arc<Snapshot>>,
    shared: Arc<Shared>,
}

impl LiveHooks for Bridge {
    fn publish(&mut self, snapshot: Arc<Snapshot>) {
        self.snapshot.send_replace(snapshot);
    }

    fn notice(&mut self, t: SimTime, seq: u64, notice: &Notice) {
        if STREAMED.contains(&notice.name()) {
            tracing::debug!(t = t.millis(), seq, notice = notice.name(), "notice");
            // No subscribers is fine.
            let _ = self.shared.feed.send(FeedEvent::of(t, seq, notice));
        }
    }

    fn resolved(&mut self, ticket: u64, result: Resolution) {
        self.shared.resolve(ticket, result);
    }
}

pub struct LiveHandle {
    pub shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<Result<RunOutput, RunError>>,
}

impl LiveHandle {
    /// Ask the run to stop at its current virtual time.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }

    pub fn is_finished(&self) -> bool {
        self.thread.is_finished()
    }

    pub fn join(self) -> Result<RunOutput, RunError> {
        self.thread.join().expect("simulation thread panicked")
    }
}

/// Start a live run of `cfg` paced at `pace` virtual ms per wall ms.
///
/// The scripted expert's stage changes are disabled; acknowledgments still fall back
/// to the expert's timeout.
pub fn start(cfg: &ScenarioConfig, pace: f64, trace: Option<Box<dyn Write + Send>>) -> Result<LiveHandle, RunError> {
    let mut cfg = cfg.clone();
    cfg.expert.live = true;
    let run = LiveRun::new(&cfg, trace)?;
    let (snap_tx, snap_rx) = watch::channel(Arc::new(run.snapshot(false)));
    let (feed, _) = broadcast::channel(1024);
    let shared = Arc::new(Shared {
        snapshot: snap_rx,
        feed,
        vctx: run.world().vctx.clone(),
        patients: run.world().patients.keys().cloned().collect(),
        reply_timeout: Duration::from_secs(10),
        submitter: run.submitter(),
        tickets: Mutex::new(HashMap::new()),
        next_ticket: AtomicU64::new(1),
    });
    let stop = Arc::new(AtomicBool::new(false));
    let mut bridge = Bridge {
        snapshot: snap_tx,
        shared: shared.clone(),
    };
    let flag = stop.clone();
    let thread = std::thread::Builder::new()
        .name("simulation".into())
        .spawn(move || {
            let out = run.run_paced(pace, &mut bridge, &flag);
            match &out {
                Ok(o) => tracing::info!(events = o.events, hash = format!("{:016x}", o.trace_hash), "run finished"),
                Err(e) => tracing::error!("run failed: {e}"),
            }
            out
        })
        .expect("spawn simulation thread");
    Ok(LiveHandle { shared, stop, thread })
}
