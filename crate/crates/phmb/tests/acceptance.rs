//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantities (visible with `--nocapture`). Criterion 10
//! (byte-identical command-line output) lives in the CLI crate's acceptance
//! suite next to the binary it exercises.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use phmb::linalg::same_span;
use phmb::models;
use phmb::sample::SampleSet;
use phmb::sim::{consistent_init, free_effort, simulate, step, SimConfig};
use phmb::system::State;
use phmb::verify::{
    assemble_constrained_dirac, check_dirac_pointwise, check_lagrangian_local, draw_samples,
    fixtures, verify_system, ImageRep, VerifyConfig,
};
use phmb::PhError;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn uniform(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn random_skew(state: &mut u64, n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i + 1..n {
            let v = uniform(state);
            j[(i, k)] = v;
            j[(k, i)] = -v;
        }
    }
    j
}

fn random_symmetric(state: &mut u64, n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let v = uniform(state);
            s[(i, k)] = v;
            s[(k, i)] = v;
        }
    }
    s
}

fn banner(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_dirac_axioms() {
    let start = Instant::now();
    let mut rng = 42u64;
    let mut worst_clean = 0.0_f64;
    let mut all_pass = true;
    let mut all_perturbed_fail = true;
    for trial in 0..100 {
        let n = 1 + (splitmix(&mut rng) % 12) as usize;
        let j = random_skew(&mut rng, n);
        let rep = ImageRep::new(j.clone(), DMatrix::identity(n, n)).unwrap();
        let v = check_dirac_pointwise(&rep, 1e-10);
        worst_clean = worst_clean.max(v.skew_violation);
        all_pass &= v.pass;

        let sym = random_symmetric(&mut rng, n) * 1e-3;
        let rep_bad = ImageRep::new(&j + &sym, DMatrix::identity(n, n)).unwrap();
        all_perturbed_fail &= !check_dirac_pointwise(&rep_bad, 1e-10).pass;
        let _ = trial;
    }
    let elapsed = start.elapsed();
    banner(
        "01 dirac axioms",
        all_pass && all_perturbed_fail && elapsed.as_secs_f64() < 1.0,
        &format!(
            "100 skew reps pass (worst violation {worst_clean:.2e}), 1e-3 symmetric perturbations all fail, runtime {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_02_appendix_regression() {
    let start = Instant::now();

    let from_scalars = |xs: &[f64]| SampleSet {
        points: xs.iter().map(|&x| DVector::from_element(1, x)).collect(),
        seed: 0,
        count: xs.len(),
        bounds: vec![(-1.0, 1.0)],
    };

    // box containing the origin: dimension jumps there
    let with_zero =
        fixtures::counterexample_dim_constancy(&from_scalars(&[-1.0, -0.5, 0.0, 0.5, 1.0]))
            .unwrap();
    let witness_ok = matches!(&with_zero.witness, Some((x, _)) if x[0] == 0.0);

    // boxes excluding the origin: constant dimension
    let pos_box = SampleSet::generate(7, 50, &[(0.05, 1.0)], None).unwrap();
    let neg_box = SampleSet::generate(7, 50, &[(-1.0, -0.05)], None).unwrap();
    let pos_ok = fixtures::counterexample_dim_constancy(&pos_box)
        .unwrap()
        .pass;
    let neg_ok = fixtures::counterexample_dim_constancy(&neg_box)
        .unwrap()
        .pass;

    // constrained reduction: full flow space away from the origin, the
    // original structure at it
    let rep = fixtures::counterexample_rep();
    let full_flow = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let mut reductions_ok = true;
    for &x in &[-1.0, -0.3, 0.4, 1.0] {
        let out = assemble_constrained_dirac(&rep, &fixtures::counterexample_constraint(x), 1e-10)
            .unwrap();
        reductions_ok &= same_span(&out.stacked(), &full_flow, 1e-10);
    }
    let at_zero =
        assemble_constrained_dirac(&rep, &fixtures::counterexample_constraint(0.0), 1e-10).unwrap();
    reductions_ok &= same_span(&at_zero.stacked(), &rep.stacked(), 1e-10);

    let elapsed = start.elapsed();
    banner(
        "02 appendix regression",
        !with_zero.pass && witness_ok && pos_ok && neg_ok && reductions_ok && elapsed.as_secs_f64() < 1.0,
        &format!(
            "dimension constancy fails with witness x = 0, passes on boxes excluding 0, reductions reproduce the reference spans, runtime {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_03_structure_verification() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut all = true;
    for name in models::MODEL_NAMES {
        let entry = models::build(name, &BTreeMap::new()).unwrap();
        let samples = draw_samples(&entry.system, 42, 200, &entry.sample_bounds).unwrap();
        let report = verify_system(&entry.system, &samples, &VerifyConfig::default());
        let pass = report.overall_pass();
        if !pass {
            lines.push(format!("{name}: {report}"));
        }
        all &= pass;
    }
    let elapsed = start.elapsed();
    banner(
        "03 structure verification",
        all && elapsed.as_secs_f64() < 10.0,
        &format!(
            "all {} built-in models verified (seed 42, 200 samples), runtime {elapsed:?} {}",
            models::MODEL_NAMES.len(),
            lines.join("; ")
        ),
    );
}

#[test]
fn criterion_04_energy_conservation() {
    let start = Instant::now();
    let cfg = SimConfig {
        dt: 1e-3,
        t_end: 10.0,
        newton_tol: 1e-12,
        ..SimConfig::default()
    };

    // free runs at dt = 1e-3: relative energy drift below 1e-8
    let dd = models::build("diff-drive", &BTreeMap::new()).unwrap();
    let dd_init = consistent_init(
        &dd.system,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[1.0, 0.0, 0.7]),
        1e-12,
    )
    .unwrap();
    let dd_traj = simulate(&dd.system, &dd_init, &free_effort(&dd.system), &cfg).unwrap();
    let dd_h0 = dd_traj.energy[0];
    let dd_drift = dd_traj
        .energy
        .iter()
        .map(|h| (h - dd_h0).abs())
        .fold(0.0_f64, f64::max)
        / dd_h0.abs();

    let gy = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let gy_init = consistent_init(
        &gy.system,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[8.0, 3.0, -2.0]),
        1e-12,
    )
    .unwrap();
    let gy_traj = simulate(&gy.system, &gy_init, &free_effort(&gy.system), &cfg).unwrap();
    let gy_h0 = gy_traj.energy[0];
    let gy_drift = gy_traj
        .energy
        .iter()
        .map(|h| (h - gy_h0).abs())
        .fold(0.0_f64, f64::max)
        / gy_h0.abs();

    // the scheme conserves quadratic energies exactly on the free models, so
    // the quadrature-order check runs on gently forced variants where the
    // balance residual is a genuine O(dt^2) quantity
    let forced = |t: f64| {
        DVector::from_row_slice(&[
            (2.0 * std::f64::consts::PI * 0.4 * t).sin(),
            0.5 * (2.0 * std::f64::consts::PI * 0.3 * t).sin(),
        ])
    };
    let mut dd_res = Vec::new();
    for &dt in &[1e-3, 5e-4] {
        let c = SimConfig {
            dt,
            t_end: 5.0,
            newton_tol: 1e-12,
            ..SimConfig::default()
        };
        dd_res.push(
            simulate(&dd.system, &dd_init, &forced, &c)
                .unwrap()
                .max_balance_residual,
        );
    }
    let gy_forced = |_t: f64| DVector::from_element(1, 0.1);
    let gy_spin = consistent_init(
        &gy.system,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[5.0, 0.0, 0.0]),
        1e-12,
    )
    .unwrap();
    let mut gy_res = Vec::new();
    for &dt in &[1e-3, 5e-4] {
        let c = SimConfig {
            dt,
            t_end: 5.0,
            newton_tol: 1e-12,
            ..SimConfig::default()
        };
        gy_res.push(
            simulate(&gy.system, &gy_spin, &gy_forced, &c)
                .unwrap()
                .max_balance_residual,
        );
    }
    let dd_ratio = dd_res[0] / dd_res[1];
    let gy_ratio = gy_res[0] / gy_res[1];

    let elapsed = start.elapsed();
    banner(
        "04 energy conservation",
        dd_drift < 1e-8
            && gy_drift < 1e-8
            && dd_traj.max_balance_residual < 1e-9
            && gy_traj.max_balance_residual < 1e-9
            && dd_ratio >= 3.5
            && gy_ratio >= 3.5
            && elapsed.as_secs_f64() < 30.0,
        &format!(
            "free drift: diff-drive {dd_drift:.2e}, gyroscope {gy_drift:.2e} (limit 1e-8); halving ratios {dd_ratio:.2} / {gy_ratio:.2} (need >= 3.5), runtime {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_05_constraint_exactness() {
    let limit = 1e-11;
    let mut worst = 0.0_f64;
    let mut detail = Vec::new();

    // diff-drive, forced
    {
        let entry = models::build("diff-drive", &BTreeMap::new()).unwrap();
        let init = consistent_init(
            &entry.system,
            &DVector::zeros(3),
            &DVector::from_row_slice(&[0.8, 0.0, 0.4]),
            1e-12,
        )
        .unwrap();
        let effort = |t: f64| DVector::from_row_slice(&[(0.9 * t).sin(), (1.1 * t).cos() * 0.4]);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 5.0,
            ..SimConfig::default()
        };
        let traj = simulate(&entry.system, &init, &effort, &cfg).unwrap();
        detail.push(format!("diff-drive {:.1e}", traj.max_constraint_residual));
        worst = worst.max(traj.max_constraint_residual);
    }
    // rod-slider alone, free
    {
        let entry = models::build("rod-slider", &BTreeMap::new()).unwrap();
        let init = consistent_init(
            &entry.system,
            &DVector::from_row_slice(&[0.1, 0.05, 0.3]),
            &DVector::from_row_slice(&[0.4, 0.2, 0.6]),
            1e-12,
        )
        .unwrap();
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 5.0,
            ..SimConfig::default()
        };
        let traj = simulate(&entry.system, &init, &free_effort(&entry.system), &cfg).unwrap();
        detail.push(format!("rod-slider {:.1e}", traj.max_constraint_residual));
        worst = worst.max(traj.max_constraint_residual);
    }
    // coupled slider-crank, spinning
    {
        let entry = models::build("slider-crank", &BTreeMap::new()).unwrap();
        let coupled = entry.coupled.as_ref().unwrap();
        let p = models::SliderCrankParams::default();
        let init = models::consistent_state(coupled, &p, 0.3, 5.0).unwrap();
        let cfg = SimConfig {
            dt: 5e-4,
            t_end: 10.0,
            ..SimConfig::default()
        };
        let traj = simulate(&coupled.system, &init, &free_effort(&coupled.system), &cfg).unwrap();
        detail.push(format!("slider-crank {:.1e}", traj.max_constraint_residual));
        worst = worst.max(traj.max_constraint_residual);
    }

    banner(
        "05 constraint exactness",
        worst <= limit,
        &format!(
            "max constraint residuals per scenario: {} (limit {limit:.0e})",
            detail.join(", ")
        ),
    );
}

#[test]
fn criterion_06_reduced_model_equivalence() {
    let full = models::build("diff-drive", &BTreeMap::new()).unwrap();
    let red = models::build("diff-drive-reduced", &BTreeMap::new()).unwrap();
    // matched initial data, curved free motion
    let init_f = consistent_init(
        &full.system,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[1.0, 0.0, 0.5]),
        1e-12,
    )
    .unwrap();
    let init_r = consistent_init(
        &red.system,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[1.0, 0.5]),
        1e-12,
    )
    .unwrap();
    let effort = |t: f64| DVector::from_row_slice(&[(0.9 * t).sin() * 0.3, (0.7 * t).cos() * 0.2]);
    let cfg = SimConfig {
        dt: 1e-3,
        t_end: 5.0,
        newton_tol: 1e-12,
        ..SimConfig::default()
    };
    let a = simulate(&full.system, &init_f, &effort, &cfg).unwrap();
    let b = simulate(&red.system, &init_r, &effort, &cfg).unwrap();

    let mut worst = 0.0_f64;
    for i in 0..a.len() {
        let (sa, sb) = (&a.states[i], &b.states[i]);
        for c in 0..3 {
            worst = worst.max((sa.zeta[c] - sb.zeta[c]).abs());
        }
        worst = worst.max((sa.omega[0] - sb.omega[0]).abs());
        worst = worst.max((sa.omega[2] - sb.omega[1]).abs());
    }
    banner(
        "06 reduced-model equivalence",
        worst <= 1e-9,
        &format!("max deviation over 5 s: {worst:.2e} (limit 1e-9)"),
    );
}

#[test]
fn criterion_07_gyroscope_physics() {
    let start = Instant::now();
    let entry = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let sys = &entry.system;

    // principal-axis spin is a relative equilibrium
    let spin_init = consistent_init(
        sys,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[10.0, 0.0, 0.0]),
        1e-12,
    )
    .unwrap();
    let cfg = SimConfig {
        dt: 1e-3,
        t_end: 10.0,
        newton_tol: 1e-12,
        ..SimConfig::default()
    };
    let traj = simulate(sys, &spin_init, &free_effort(sys), &cfg).unwrap();
    let spin_dev = traj
        .states
        .iter()
        .map(|s| {
            (s.omega[0] - 10.0)
                .abs()
                .max(s.omega[1].abs())
                .max(s.omega[2].abs())
        })
        .fold(0.0_f64, f64::max);

    // fast-top precession against the reference rate M / (I_x omega_s),
    // measured on a dt = 1e-6 fine-step run
    let omega_s = 200.0;
    let torque = 1.0;
    let i_x = sys.mass[(0, 0)];
    let prec_init = consistent_init(
        sys,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[omega_s, 0.0, 0.0]),
        1e-12,
    )
    .unwrap();
    let effort = move |_t: f64| DVector::from_element(1, torque);
    let ref_cfg = SimConfig {
        dt: 1e-6,
        t_end: 2.0,
        newton_tol: 1e-12,
        store_every: 100_000,
        ..SimConfig::default()
    };
    let reference = simulate(sys, &prec_init, &effort, &ref_cfg).unwrap();
    let end = reference.final_state().unwrap();
    let measured_rate = (end.zeta[2] - prec_init.zeta[2]) / 2.0;
    let reference_rate = torque / (i_x * omega_s);
    let rel_err = (measured_rate - reference_rate).abs() / reference_rate;

    // the fine-step run also serves as a trajectory oracle for a coarse run
    let coarse_cfg = SimConfig {
        dt: 1e-4,
        store_every: 10_000,
        ..ref_cfg.clone()
    };
    let coarse = simulate(sys, &prec_init, &effort, &coarse_cfg).unwrap();
    let coarse_end = coarse.final_state().unwrap();
    let coarse_dev = (coarse_end.zeta.clone() - &end.zeta).amax();

    let elapsed = start.elapsed();
    banner(
        "07 gyroscope physics",
        spin_dev <= 1e-9 && rel_err <= 0.02 && coarse_dev <= 1e-3 && elapsed.as_secs_f64() < 60.0,
        &format!(
            "principal-axis deviation {spin_dev:.2e} (limit 1e-9); precession rate {measured_rate:.5} vs {reference_rate:.5} rad/s, error {:.2}% (limit 2%); coarse-run angle deviation from the fine-step oracle {coarse_dev:.2e}, runtime {elapsed:?}",
            rel_err * 100.0
        ),
    );
}

#[test]
fn criterion_08_interconnection_closure() {
    let entry = models::build("slider-crank", &BTreeMap::new()).unwrap();
    let coupled = entry.coupled.as_ref().unwrap();
    let p = models::SliderCrankParams::default();

    // the coupled system satisfies every structural axiom
    let samples = draw_samples(&coupled.system, 42, 200, &entry.sample_bounds).unwrap();
    let verified = verify_system(&coupled.system, &samples, &VerifyConfig::default());

    // combined constraint matrix against its closed form, 50 seeded configs
    let mut rng = 4242u64;
    let mut a_worst = 0.0_f64;
    for _ in 0..50 {
        let phi1 = uniform(&mut rng) * std::f64::consts::PI;
        let phi2 = uniform(&mut rng) * 1.2;
        let x_b = uniform(&mut rng);
        let zeta = DVector::from_row_slice(&[phi1, x_b, 0.0, phi2]);
        let a = (coupled.system.vel_constraint)(&zeta);
        let (s1, c1) = phi1.sin_cos();
        let (s2, c2) = phi2.sin_cos();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(2, 4, &[
            -p.l1 * s1, -c2, s2,  p.l2 * s2,
            p.l1 * c1,  -s2, -c2, -p.l2 * c2,
        ]);
        a_worst = a_worst.max((a - expected).amax());
    }

    // free coupled run: energy, loop closure, per-step coupling power
    let init = models::consistent_state(coupled, &p, 0.3, 5.0).unwrap();
    let cfg = SimConfig {
        dt: 2.5e-4,
        t_end: 10.0,
        newton_tol: 1e-12,
        ..SimConfig::default()
    };
    let traj = simulate(&coupled.system, &init, &free_effort(&coupled.system), &cfg).unwrap();
    let h0 = traj.energy[0];
    let h_drift = traj
        .energy
        .iter()
        .map(|h| (h - h0).abs())
        .fold(0.0_f64, f64::max)
        / h0.abs();
    let loop_drift = traj
        .states
        .iter()
        .map(|s| models::loop_closure_error(&p, &s.zeta))
        .fold(0.0_f64, f64::max);
    let mut power_worst = 0.0_f64;
    for i in 0..traj.len() {
        let r = phmb::interconnect::coupling_power_residual(
            coupled,
            &traj.states[i],
            &traj.multipliers[i],
        )
        .unwrap();
        power_worst = power_worst.max(r.abs());
    }

    banner(
        "08 interconnection closure",
        verified.overall_pass()
            && a_worst <= 1e-12
            && power_worst <= 1e-10
            && h_drift <= 1e-6
            && loop_drift <= 1e-6,
        &format!(
            "verify pass = {}, constraint-matrix deviation {a_worst:.2e} (limit 1e-12), coupling power residual {power_worst:.2e} (limit 1e-10), energy drift {h_drift:.2e} (limit 1e-6), loop-closure drift {loop_drift:.2e} (limit 1e-6)",
            verified.overall_pass()
        ),
    );
}

#[test]
fn criterion_09_lagrangian_checks() {
    // constrained pendulum storage: H(r, p) with the circle constraint
    let (m, g, len) = (1.0, 9.81, 0.8);
    let h = move |z: &DVector<f64>| (z[2] * z[2] + z[3] * z[3]) / (2.0 * m) + m * g * z[1];
    let grad_h = move |z: &DVector<f64>| DVector::from_row_slice(&[0.0, m * g, z[2] / m, z[3] / m]);
    let d = move |z: &DVector<f64>| {
        DVector::from_element(1, 0.5 * (z[0] * z[0] + z[1] * z[1] - len * len))
    };
    let d_jac = |z: &DVector<f64>| DMatrix::from_row_slice(1, 4, &[z[0], z[1], 0.0, 0.0]);
    let theta: f64 = 0.6;
    let z1 = DVector::from_row_slice(&[len * theta.sin(), -len * theta.cos(), 0.3, -0.1]);
    let pendulum = check_lagrangian_local(&h, &grad_h, &d, &d_jac, &z1, 1e-7).unwrap();

    // graph of a non-gradient field fails the pairing test
    let h0 = |_: &DVector<f64>| 0.0;
    let rot = |x: &DVector<f64>| DVector::from_row_slice(&[x[1], -x[0]]);
    let no_d = |_: &DVector<f64>| DVector::zeros(0);
    let no_jac = |_: &DVector<f64>| DMatrix::zeros(0, 2);
    let x = DVector::from_row_slice(&[0.2, 0.5]);
    let non_gradient = check_lagrangian_local(&h0, &rot, &no_d, &no_jac, &x, 1e-7).unwrap();

    // rankROW-deficient constraints raise a rank error
    let dup = |x: &DVector<f64>| DVector::from_row_slice(&[x[0], x[0]]);
    let dup_jac = |_: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
    let zero = DVector::zeros(2);
    let rank_err = check_lagrangian_local(&h0, &rot, &dup, &dup_jac, &zero, 1e-7);
    let rank_err_ok = matches!(rank_err, Err(PhError::Rank(_)));

    banner(
        "09 lagrangian checks",
        pendulum.pass && !non_gradient.pass && rank_err_ok,
        &format!(
            "pendulum pairing violation {:.2e} (pass), non-gradient violation {:.2e} (fail as required), duplicated constraint raises rank error = {rank_err_ok}",
            pendulum.max_pairing_violation, non_gradient.max_pairing_violation
        ),
    );
}

/// Supplementary to criterion 7: one accepted step stays within the gimbal
/// guard or fails loudly; approaching the singularity is a domain error.
#[test]
fn gimbal_lock_approach_is_a_domain_error() {
    let entry = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let sys = &entry.system;
    let init = State::new(
        sys,
        0.0,
        DVector::from_row_slice(&[0.0, 1.57, 0.0]),
        DVector::from_row_slice(&[0.0, 1.0, 0.0]),
    );
    let cfg = SimConfig {
        dt: 1e-3,
        t_end: 1.0,
        ..SimConfig::default()
    };
    let err = simulate(sys, &init, &free_effort(sys), &cfg).unwrap_err();
    assert!(matches!(err.error, PhError::Domain(_)), "{}", err.error);
    // the diagnostic carries the offending position
    assert!(err.error.to_string().contains("1.57"));
}

/// Supplementary: a single step agrees with the instantaneous accelerations
/// to second order in the step size.
#[test]
fn one_step_taylor_consistency() {
    let entry = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let sys = &entry.system;
    let state = consistent_init(
        sys,
        &DVector::from_row_slice(&[0.2, 0.1, -0.3]),
        &DVector::from_row_slice(&[4.0, 1.0, -2.0]),
        1e-12,
    )
    .unwrap();
    let (omega_dot, _) = phmb::sim::multiplier_solve(sys, &state, &DVector::zeros(1)).unwrap();
    let zeta_dot = (sys.kinematics)(&state.zeta) * &state.omega;
    let mut errs = Vec::new();
    for &h in &[2e-3, 1e-3] {
        let cfg = SimConfig {
            dt: h,
            ..SimConfig::default()
        };
        let (next, _) = step(sys, &state, &free_effort(sys), &cfg).unwrap();
        let err = (next.zeta - (&state.zeta + &zeta_dot * h))
            .amax()
            .max((next.omega - (&state.omega + &omega_dot * h)).amax());
        errs.push(err);
    }
    // halving h shrinks the Taylor defect by about four
    assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
}
