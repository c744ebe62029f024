//! Deterministic discrete-event kernel.
//!
//! The kernel owns the virtual clock, a queue totally ordered by
//! `(fire_at, seq)`, the static link table and the JSONL trace. Handlers run
//! to completion one event at a time; external inputs enter only through an
//! [`Inbox`] drained between events.

mod inbox;
mod link;
mod rng;
mod time;
mod trace;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

pub use inbox::{Inbox, Injected};
pub use link::LinkModel;
pub use rng::{RunSeed, StreamRng};
pub use time::SimTime;
pub use trace::{hash_bytes, trace_line, TraceRecorder};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("cannot schedule at {fire_at} when the clock reads {now}")]
    SchedulingInPast { fire_at: SimTime, now: SimTime },
    #[error("run horizon {horizon} is behind the clock {now}")]
    HorizonInPast { horizon: SimTime, now: SimTime },
    #[error("no link configured from {from} to {to}")]
    NoRoute { from: String, to: String },
    #[error("message to {to} has zero bytes")]
    EmptyMessage { to: String },
    #[error("invalid link {name}: {reason}")]
    InvalidLink { name: String, reason: String },
    #[error("clock went backwards: {observed} after {now}")]
    ClockRegression { observed: SimTime, now: SimTime },
    #[error("trace write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("handler for {target} at {at} failed: {message}")]
    Handler {
        at: SimTime,
        target: String,
        message: String,
    },
}

/// Payloads carried by events name their own trace `kind`.
pub trait Payload: Serialize {
    fn kind(&self) -> &'static str;

    /// The JSON written under `payload` in the trace.
    fn payload_value(&self) -> serde_json::Value {
        crate::canonical::to_value(self)
    }
}

#[derive(Debug, Clone)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: String,
    pub payload: P,
}

impl<P> SimEvent<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.fire_at, self.seq)
    }
}

impl<P> PartialEq for SimEvent<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for SimEvent<P> {}

impl<P> PartialOrd for SimEvent<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for SimEvent<P> {
    // Reversed so the max-heap pops the smallest (fire_at, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventTraceSummary {
    pub processed: u64,
    pub final_clock: SimTime,
    pub trace_hash: u64,
}

pub trait Handler<P> {
    /// Error text is wrapped into [`KernelError::Handler`] and stops the run.
    fn handle(&mut self, kernel: &mut Kernel<P>, event: SimEvent<P>) -> Result<(), String>;
}

pub struct Kernel<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<SimEvent<P>>,
    links: BTreeMap<(String, String), LinkModel>,
    trace: TraceRecorder,
    processed: u64,
    last_seq: Option<u64>,
}

impl<P: Payload> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: Payload> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            links: BTreeMap::new(),
            trace: TraceRecorder::default(),
            processed: 0,
            last_seq: None,
        }
    }

    /// Stream every processed event as a JSONL line into `out`.
    pub fn with_trace_output(mut self, out: Box<dyn Write + Send>) -> Self {
        self.trace = TraceRecorder::new(Some(out));
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Seq of the most recently processed event.
    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    /// Seq the next scheduled event will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn trace_hash(&self) -> u64 {
        self.trace.hash()
    }

    /// Enqueue `payload` for `target` at `fire_at`; returns the assigned seq.
    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: impl Into<String>,
        payload: P,
    ) -> Result<u64, KernelError> {
        if fire_at < self.now {
            return Err(KernelError::SchedulingInPast {
                fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(SimEvent {
            fire_at,
            seq,
            target: target.into(),
            payload,
        });
        Ok(seq)
    }

    pub fn schedule_in(
        &mut self,
        delay_ms: u64,
        target: impl Into<String>,
        payload: P,
    ) -> Result<u64, KernelError> {
        self.schedule(self.now + delay_ms, target, payload)
    }

    pub fn connect(&mut self, from: impl Into<String>, to: impl Into<String>, link: LinkModel) -> Result<(), KernelError> {
        link.check()?;
        self.links.insert((from.into(), to.into()), link);
        Ok(())
    }

    pub fn connect_duplex(&mut self, a: &str, b: &str, link: LinkModel) -> Result<(), KernelError> {
        self.connect(a, b, link.clone())?;
        self.connect(b, a, link)
    }

    pub fn link(&self, from: &str, to: &str) -> Option<&LinkModel> {
        self.links.get(&(from.to_string(), to.to_string()))
    }

    /// Send `size_bytes` from `from` to `to`; the payload fires at `to` on arrival.
    pub fn deliver(
        &mut self,
        from: &str,
        to: &str,
        size_bytes: u64,
        payload: P,
    ) -> Result<SimTime, KernelError> {
        if size_bytes == 0 {
            return Err(KernelError::EmptyMessage { to: to.to_string() });
        }
        let link = self.link(from, to).ok_or_else(|| KernelError::NoRoute {
            from: from.to_string(),
            to: to.to_string(),
        })?;
        let arrival = self.now + link.delivery_delay(size_bytes);
        self.schedule(arrival, to, payload)?;
        Ok(arrival)
    }

    /// Move every queued inbox entry into the event queue at `now + 1 ms`.
    ///
    /// Returns `(ticket, seq)` pairs in inbox order.
    pub fn drain_inbox(&mut self, inbox: &Inbox<P>) -> Vec<(u64, u64)> {
        let mut assigned = Vec::new();
        for Injected {
            target,
            payload,
            ticket,
        } in inbox.take_all()
        {
            let seq = self
                .schedule(self.now + 1, target, payload)
                .expect("now + 1 is never in the past");
            assigned.push((ticket, seq));
        }
        assigned
    }

    /// Time of the next queued event, if any.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|e| e.fire_at)
    }

    /// Process one event if it fires at or before `horizon`.
    pub fn step<H: Handler<P>>(&mut self, horizon: SimTime, handler: &mut H) -> Result<bool, KernelError> {
        match self.queue.peek() {
            Some(head) if head.fire_at <= horizon => {}
            _ => return Ok(false),
        }
        let event = self.queue.pop().expect("peeked");
        if event.fire_at < self.now {
            return Err(KernelError::ClockRegression {
                observed: event.fire_at,
                now: self.now,
            });
        }
        self.now = event.fire_at;
        self.trace
            .record(event.fire_at, event.seq, &event.target, &event.payload)?;
        self.processed += 1;
        self.last_seq = Some(event.seq);
        let (at, target) = (event.fire_at, event.target.clone());
        handler
            .handle(self, event)
            .map_err(|message| KernelError::Handler {
                at,
                target,
                message,
            })?;
        Ok(true)
    }

    /// Process every event with `fire_at <= horizon`, then set the clock to `horizon`.
    pub fn run_until<H: Handler<P>>(
        &mut self,
        horizon: SimTime,
        handler: &mut H,
    ) -> Result<EventTraceSummary, KernelError> {
        if horizon < self.now {
            return Err(KernelError::HorizonInPast {
                horizon,
                now: self.now,
            });
        }
        let before = self.processed;
        while self.step(horizon, handler)? {}
        self.now = horizon;
        self.trace.flush()?;
        Ok(EventTraceSummary {
            processed: self.processed - before,
            final_clock: self.now,
            trace_hash: self.trace.hash(),
        })
    }
}

#[cfg(test)]
mod tests;
