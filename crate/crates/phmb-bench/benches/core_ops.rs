//! Benchmarks for the kernels on the hot path of a simulation: one-point
//! model evaluation, the instantaneous saddle solve, a full implicit step,
//! and the per-sample structure checks.

use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use std::hint::black_box;

use phmb::models;
use phmb::sim::{consistent_init, free_effort, multiplier_solve, simulate, step, SimConfig};
use phmb::verify::{
    assemble_constrained_dirac, assemble_unconstrained_dirac, check_dirac_pointwise,
    constraint_effort_matrix,
};

fn bench_eval_point(c: &mut Criterion) {
    let entry = models::build("slider-crank", &BTreeMap::new()).unwrap();
    let sys = entry.system;
    let p = models::SliderCrankParams::default();
    let zeta = models::closed_configuration(&p, 0.3).unwrap();
    let omega = DVector::from_row_slice(&[5.0, 0.1, 0.0, -0.2]);
    c.bench_function("eval_point slider-crank", |b| {
        b.iter(|| sys.eval_point(black_box(&zeta), black_box(&omega)).unwrap())
    });
}

fn bench_multiplier_solve(c: &mut Criterion) {
    let entry = models::build("slider-crank", &BTreeMap::new()).unwrap();
    let coupled = entry.coupled.unwrap();
    let p = models::SliderCrankParams::default();
    let state = models::consistent_state(&coupled, &p, 0.3, 5.0).unwrap();
    let tau = DVector::zeros(2);
    c.bench_function("multiplier_solve slider-crank", |b| {
        b.iter(|| {
            multiplier_solve(
                black_box(&coupled.system),
                black_box(&state),
                black_box(&tau),
            )
            .unwrap()
        })
    });
}

fn bench_midpoint_step(c: &mut Criterion) {
    let entry = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let sys = entry.system;
    let init = consistent_init(
        &sys,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[8.0, 3.0, -2.0]),
        1e-12,
    )
    .unwrap();
    let cfg = SimConfig {
        dt: 1e-3,
        ..SimConfig::default()
    };
    c.bench_function("midpoint step gyroscope", |b| {
        b.iter(|| {
            step(
                black_box(&sys),
                black_box(&init),
                &|_| DVector::zeros(1),
                &cfg,
            )
            .unwrap()
        })
    });
}

fn bench_short_run(c: &mut Criterion) {
    let entry = models::build("diff-drive", &BTreeMap::new()).unwrap();
    let sys = entry.system;
    let init = consistent_init(
        &sys,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[1.0, 0.0, 0.5]),
        1e-12,
    )
    .unwrap();
    let cfg = SimConfig {
        dt: 1e-3,
        t_end: 0.1,
        store_every: 100,
        ..SimConfig::default()
    };
    c.bench_function("diff-drive 100 steps", |b| {
        b.iter(|| simulate(black_box(&sys), black_box(&init), &free_effort(&sys), &cfg).unwrap())
    });
}

fn bench_structure_checks(c: &mut Criterion) {
    let entry = models::build("diff-drive", &BTreeMap::new()).unwrap();
    let sys = entry.system;
    let zeta = DVector::from_row_slice(&[0.3, -0.2, 0.7]);
    let gamma = DVector::from_row_slice(&[0.5, 0.1, -0.4]);
    c.bench_function("dirac assemble+reduce+check diff-drive", |b| {
        b.iter(|| {
            let rep = assemble_unconstrained_dirac(black_box(&sys), &zeta, &gamma).unwrap();
            let e = constraint_effort_matrix(&sys, &zeta);
            let reduced = assemble_constrained_dirac(&rep, &e, 1e-10).unwrap();
            check_dirac_pointwise(&reduced, 1e-10).pass
        })
    });
}

criterion_group!(
    benches,
    bench_eval_point,
    bench_multiplier_solve,
    bench_midpoint_step,
    bench_short_run,
    bench_structure_checks
);
criterion_main!(benches);
