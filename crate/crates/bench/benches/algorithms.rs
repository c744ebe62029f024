use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ecsim_core::behavior_tree::{builtin_trees, tick, ActionResult, ActionSpec, Blackboard, NodeDef, Responder, Status, TickContext};
use ecsim_core::cloud_services::{allocate_resource, LruCache};
use ecsim_core::protocol::{PatientResponse, RiskLevel};
use ecsim_core::sim_kernel::SimTime;

/// Every action succeeds, so a tick walks the whole tree.
struct Cheerful;

impl Responder for Cheerful {
    fn action(&mut self, _: &NodeDef, _: &ActionSpec, _: &mut Blackboard) -> ActionResult {
        ActionResult::Performed {
            status: Status::Success,
            response: PatientResponse::Laugh,
        }
    }

    fn condition(&mut self, _: &NodeDef, _: &ActionSpec, _: &Blackboard) -> Status {
        Status::Success
    }
}

fn bt_tick(c: &mut Criterion) {
    let catalog = builtin_trees();
    let tree = catalog.get("middle_knockknock").unwrap().clone();
    let ctx = TickContext {
        session_id: "s".into(),
        t: SimTime::ZERO,
    };
    c.bench_function("bt_tick_knockknock", |b| {
        b.iter(|| tick(black_box(&tree), &mut Blackboard::new(), &mut Cheerful, &ctx).unwrap())
    });
}

fn allocation(c: &mut Criterion) {
    let demands = [
        (RiskLevel::Critical, 7.0),
        (RiskLevel::High, 4.0),
        (RiskLevel::High, 9.0),
        (RiskLevel::Low, 3.0),
        (RiskLevel::Moderate, 6.0),
    ];
    c.bench_function("allocate_5_patients", |b| b.iter(|| allocate_resource(black_box(&demands), black_box(15.0))));
}

fn lru(c: &mut Criterion) {
    let ids: Vec<String> = (0..64).map(|i| format!("tree:{i}")).collect();
    c.bench_function("lru_1000_accesses", |b| {
        b.iter(|| {
            let mut cache = LruCache::new(400);
            for i in 0..1000usize {
                let k = (i * 37 + i / 7) % ids.len();
                cache.access(&ids[k], 10 + (k as u64 % 13)).unwrap();
            }
            cache.hit_ratio()
        })
    });
}

criterion_group!(benches, bt_tick, allocation, lru);
criterion_main!(benches);
