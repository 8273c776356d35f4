use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use psk_core::cert::{check_lia, check_rup};
use psk_core::solver::{solve_lia, solve_sat, LiaResult, SatResult};
use psk_core::testkit::{random_cnf, random_lia, soundness_signature, DerivationGen};
use psk_core::{extract, parse_sketch, prove, Kernel, LemmaLibrary, ProverConfig, Store};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn corpus(name: &str) -> String {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn sketches(c: &mut Criterion) {
    let text = corpus("double_induction.psk");
    let lib = LemmaLibrary::parse(&corpus("std.plib")).unwrap();
    let sketch = parse_sketch(&text).unwrap();
    c.bench_function("parse_sketch", |b| b.iter(|| parse_sketch(black_box(&text)).unwrap()));
    c.bench_function("extract", |b| b.iter(|| extract(black_box(&sketch), Some(&lib))));
    c.bench_function("prove_cold", |b| {
        b.iter(|| prove(&sketch, &lib, &Store::in_memory(), ProverConfig::default()).unwrap())
    });
    let warm = Store::in_memory();
    prove(&sketch, &lib, &warm, ProverConfig::default()).unwrap();
    c.bench_function("prove_warm", |b| {
        b.iter(|| prove(&sketch, &lib, &warm, ProverConfig::default()).unwrap())
    });
}

fn solvers(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(7);
    let mut unsat = Vec::new();
    while unsat.len() < 16 {
        let p = random_cnf(&mut rng, 12, 60, 3);
        if let SatResult::Unsat(proof) = solve_sat(&p, 100_000) {
            unsat.push((p, proof));
        }
    }
    c.bench_function("solve_sat_12v", |b| {
        b.iter(|| unsat.iter().for_each(|(p, _)| drop(black_box(solve_sat(p, 100_000)))))
    });
    c.bench_function("check_rup_12v", |b| {
        b.iter(|| unsat.iter().for_each(|(p, r)| drop(black_box(check_rup(p, r)))))
    });

    let mut infeasible = Vec::new();
    while infeasible.len() < 16 {
        let p = random_lia(&mut rng, 3, 4, 4);
        if let LiaResult::Infeasible(cert) = solve_lia(&p, 10_000) {
            infeasible.push((p, cert));
        }
    }
    c.bench_function("solve_lia_3v", |b| {
        b.iter(|| {
            infeasible
                .iter()
                .for_each(|(p, _)| drop(black_box(solve_lia(p, 10_000))))
        })
    });
    c.bench_function("check_lia_3v", |b| {
        b.iter(|| infeasible.iter().for_each(|(p, r)| drop(black_box(check_lia(p, r)))))
    });
}

fn kernel(c: &mut Criterion) {
    let sig = soundness_signature();
    c.bench_function("derive_session_24", |b| {
        b.iter_batched(
            || StdRng::seed_from_u64(11),
            |rng| {
                let k = Kernel::new(sig.clone());
                DerivationGen::new(&k, rng).derive(24).len()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = sketches, solvers, kernel
}
criterion_main!(benches);
