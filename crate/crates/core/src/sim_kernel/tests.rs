use super::*;
use proptest::prelude::*;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
struct Ping(u32);

impl Payload for Ping {
    fn kind(&self) -> &'static str {
        "ping"
    }
}

#[derive(Default)]
struct Recorder {
    seen: Vec<(SimTime, u64, u32)>,
    observed_now: Vec<SimTime>,
}

impl Handler<Ping> for Recorder {
    fn handle(&mut self, kernel: &mut Kernel<Ping>, event: SimEvent<Ping>) -> Result<(), String> {
        self.observed_now.push(kernel.now());
        self.seen.push((event.fire_at, event.seq, event.payload.0));
        Ok(())
    }
}

/// Re-schedules a random follow-up from each event, drawing from a seeded stream.
struct Chatter {
    rng: StreamRng,
    budget: u32,
}

impl Handler<Ping> for Chatter {
    fn handle(&mut self, kernel: &mut Kernel<Ping>, event: SimEvent<Ping>) -> Result<(), String> {
        if self.budget == 0 {
            return Ok(());
        }
        self.budget -= 1;
        let delay = self.rng.random_range(0..5);
        let target = if self.rng.random_bool(0.5) { "a" } else { "b" };
        kernel
            .schedule_in(delay, target, Ping(event.payload.0 + 1))
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

#[test]
fn schedule_at_now_is_accepted_and_fires() {
    let mut k = Kernel::new();
    let mut h = Recorder::default();
    k.run_until(SimTime(5), &mut h).unwrap();
    k.schedule(SimTime(5), "n", Ping(1)).unwrap();
    let s = k.run_until(SimTime(5), &mut h).unwrap();
    assert_eq!(s.processed, 1);
}

#[test]
fn schedule_in_past_rejected() {
    let mut k: Kernel<Ping> = Kernel::new();
    k.run_until(SimTime(5), &mut Recorder::default()).unwrap();
    let err = k.schedule(SimTime(3), "n", Ping(0)).unwrap_err();
    assert!(matches!(err, KernelError::SchedulingInPast { .. }));
}

#[test]
fn simultaneous_events_fire_in_seq_order() {
    let mut k = Kernel::new();
    let mut h = Recorder::default();
    let s7 = k.schedule(SimTime(10), "n", Ping(7)).unwrap();
    let s8 = k.schedule(SimTime(10), "n", Ping(8)).unwrap();
    k.run_until(SimTime(10), &mut h).unwrap();
    assert!(s7 < s8);
    assert_eq!(h.seen.iter().map(|e| e.2).collect::<Vec<_>>(), vec![7, 8]);
}

#[test]
fn empty_run_fast_forwards() {
    let mut k: Kernel<Ping> = Kernel::new();
    let s = k.run_until(SimTime(1000), &mut Recorder::default()).unwrap();
    assert_eq!(s.processed, 0);
    assert_eq!(s.final_clock, SimTime(1000));
    assert_eq!(k.now(), SimTime(1000));
}

#[test]
fn counts_events_up_to_horizon() {
    let mut k = Kernel::new();
    for t in [1, 2, 2, 3] {
        k.schedule(SimTime(t), "n", Ping(t as u32)).unwrap();
    }
    let s = k.run_until(SimTime(2), &mut Recorder::default()).unwrap();
    assert_eq!(s.processed, 3);
    assert_eq!(k.pending(), 1);
}

#[test]
fn horizon_behind_clock_rejected() {
    let mut k: Kernel<Ping> = Kernel::new();
    k.run_until(SimTime(10), &mut Recorder::default()).unwrap();
    assert!(matches!(
        k.run_until(SimTime(9), &mut Recorder::default()),
        Err(KernelError::HorizonInPast { .. })
    ));
}

#[test]
fn deliver_uses_closed_form_delay() {
    let mut k: Kernel<Ping> = Kernel::new();
    k.connect("edge", "cloud", LinkModel::new("edge-cloud", 20, 1000).unwrap())
        .unwrap();
    assert_eq!(k.deliver("edge", "cloud", 1250, Ping(0)).unwrap(), SimTime(30));
    assert_eq!(k.deliver("edge", "cloud", 1, Ping(0)).unwrap(), SimTime(21));
    assert!(matches!(
        k.deliver("cloud", "edge", 1, Ping(0)),
        Err(KernelError::NoRoute { .. })
    ));
    assert!(matches!(
        k.deliver("edge", "cloud", 0, Ping(0)),
        Err(KernelError::EmptyMessage { .. })
    ));
}

#[test]
fn inbox_entries_fire_one_ms_later() {
    let mut k = Kernel::new();
    let mut h = Recorder::default();
    k.run_until(SimTime(40), &mut h).unwrap();
    let inbox = Inbox::new();
    inbox.push("n", Ping(1), 11);
    inbox.push("n", Ping(2), 12);
    let assigned = k.drain_inbox(&inbox);
    assert_eq!(assigned.iter().map(|a| a.0).collect::<Vec<_>>(), vec![11, 12]);
    assert!(inbox.is_empty());
    k.run_until(SimTime(41), &mut h).unwrap();
    assert_eq!(h.seen.len(), 2);
    assert!(h.seen.iter().all(|e| e.0 == SimTime(41)));
}

fn chatter_run(seed: u64) -> (u64, Vec<u8>) {
    let buf = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    struct Shared(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);
    impl std::io::Write for Shared {
        fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(b);
            Ok(b.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }
    let mut k = Kernel::new().with_trace_output(Box::new(Shared(buf.clone())));
    k.schedule(SimTime(0), "a", Ping(0)).unwrap();
    let mut h = Chatter {
        rng: RunSeed::new(seed, "chatter").rng(),
        budget: 500,
    };
    let s = k.run_until(SimTime(10_000), &mut h).unwrap();
    let bytes = buf.lock().unwrap().clone();
    (s.trace_hash, bytes)
}

#[test]
fn same_seed_same_trace_hash() {
    let (h1, b1) = chatter_run(42);
    let (h2, b2) = chatter_run(42);
    let (h3, _) = chatter_run(43);
    assert_eq!(h1, h2);
    assert_eq!(b1, b2);
    assert_eq!(hash_bytes(&b1), h1);
    assert_ne!(h1, h3);
}

#[test]
fn trace_line_is_canonical() {
    let line = trace_line(SimTime(3), 9, "node", &Ping(4));
    assert_eq!(
        String::from_utf8(line).unwrap(),
        r#"{"kind":"ping","payload":4,"seq":9,"t":3,"target":"node"}"#
    );
}

proptest! {
    #[test]
    fn processing_order_is_lexicographic(times in prop::collection::vec(0u64..50, 1..80)) {
        let mut k = Kernel::new();
        for (i, t) in times.iter().enumerate() {
            k.schedule(SimTime(*t), "n", Ping(i as u32)).unwrap();
        }
        let mut h = Recorder::default();
        k.run_until(SimTime(50), &mut h).unwrap();
        let keys: Vec<(SimTime, u64)> = h.seen.iter().map(|e| (e.0, e.1)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        prop_assert_eq!(&keys, &sorted);
        prop_assert!(h.observed_now.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn delay_matches_recomputation(latency in 0u64..10_000, bw in 1u64..1_000_000, size in 1u64..10_000_000) {
        let link = LinkModel::new("l", latency, bw).unwrap();
        // Independent route: floor division plus a remainder check.
        let bits = size * 8;
        let mut tx = bits / bw;
        if tx * bw < bits {
            tx += 1;
        }
        prop_assert_eq!(link.delivery_delay(size), latency + tx);
        prop_assert!(link.delivery_delay(size) > 0);
    }
}
