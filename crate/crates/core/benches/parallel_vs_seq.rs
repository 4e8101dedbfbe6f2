//! Compares the rayon path against the sequential fallback on the two hot
//! loops: per-session challenge execution and per-trial detection rounds.
//! Both paths produce identical results; this measures only the schedule.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qupuf_core::{
    allocate, digitize, exec, execute_on_allocation, generate_device, generate_registry,
    t_shape_edges, CRPDatabase, ChallengeKey, DeviceRegistry, PufChallenge, PufVariant,
    SchedulerPolicy,
};

fn challenge_sessions(c: &mut Criterion) {
    let device = generate_device("bench_qpu", 5, t_shape_edges(), 100.0, 7).unwrap();
    let challenge = PufChallenge::new(PufVariant::Hadamard, 3.0, 0);
    let n = challenge.n_experiments as usize;

    let mut group = c.benchmark_group("challenge_sessions_75x8192");
    group.bench_function("sequential", |b| {
        b.iter(|| {
            black_box(exec::map_indexed_seq(n, |s| {
                qupuf_core::circuits::run_session(&device, &challenge, 11, s as u64).unwrap()
            }))
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            black_box(exec::map_indexed_par(n, |s| {
                qupuf_core::circuits::run_session(&device, &challenge, 11, s as u64).unwrap()
            }))
        })
    });
    group.finish();
}

fn detection_trials(c: &mut Criterion) {
    let registry: DeviceRegistry = generate_registry(2, 5, &t_shape_edges(), 100.0, 5).unwrap();
    let mut challenge = PufChallenge::new(PufVariant::Hadamard, 3.0, 0);
    challenge.shots = 2048;
    challenge.n_experiments = 20;
    let mut db = CRPDatabase::new();
    db.register(registry.get("qpu_00").unwrap(), &challenge, 5, 100, false)
        .unwrap();
    db.register(registry.get("qpu_01").unwrap(), &challenge, 5, 101, false)
        .unwrap();
    let key = ChallengeKey::of(&challenge, 5);
    let policy = SchedulerPolicy::RerouteSameShape {
        target_id: "qpu_01".into(),
    };
    let trial = |t: usize| {
        let seed = 9000 + t as u64;
        let event = allocate(&registry, "qpu_00", &policy, seed).unwrap();
        let trace = execute_on_allocation(&event, &challenge, &registry, seed).unwrap();
        let sig = digitize(&trace.sessions.last().unwrap().prob_one, 5).unwrap();
        db.verify("qpu_00", &sig, &key).unwrap()
    };

    let trials = 32;
    let mut group = c.benchmark_group("detection_trials_32x20x2048");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(exec::map_indexed_seq(trials, trial)))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(exec::map_indexed_par(trials, trial)))
    });
    group.finish();
}

criterion_group!(benches, challenge_sessions, detection_trials);
criterion_main!(benches);
