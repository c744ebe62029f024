use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ecsim_bench::{reference, with_patients};
use ecsim_core::gateway::{replay_trace, run_to_dir, simulate, TRACE_FILE};

fn headless_reference(c: &mut Criterion) {
    let cfg = reference();
    let events = simulate(&cfg, None).unwrap().events;
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.throughput(Throughput::Elements(events));
    g.bench_function("reference_10min", |b| b.iter(|| simulate(&cfg, None).unwrap()));
    g.finish();
}

fn scaling(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_patients");
    g.sample_size(10);
    for n in [1, 3, 10] {
        let mut cfg = with_patients(n);
        cfg.duration_ms = 120_000;
        g.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| b.iter(|| simulate(cfg, None).unwrap()));
    }
    g.finish();
}

fn replay(c: &mut Criterion) {
    let cfg = reference();
    let dir = std::env::temp_dir().join(format!("ecsim-bench-{}", std::process::id()));
    run_to_dir(&cfg, &dir).unwrap();
    let trace = std::fs::read(dir.join(TRACE_FILE)).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    let mut g = c.benchmark_group("replay");
    g.sample_size(10);
    g.throughput(Throughput::Bytes(trace.len() as u64));
    g.bench_function("reference_10min", |b| b.iter(|| replay_trace(trace.as_slice()).unwrap()));
    g.finish();
}

criterion_group!(benches, headless_reference, scaling, replay);
criterion_main!(benches);
