//! Model-level invariants tested on exact points of the dynamics: the
//! stacked residual and the power balance must vanish together, gyroscopic
//! forces are power-neutral, and the hidden constraint holds at consistent
//! states.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use phmb::models;
use phmb::sim::{consistent_init, multiplier_solve};
use phmb::system::{Multipliers, PhSystem, State};
use phmb::verify::draw_samples;

fn tau_for(sys: &PhSystem, scale: f64) -> DVector<f64> {
    DVector::from_fn(sys.m_ports, |i, _| scale * (0.3 + 0.2 * i as f64))
}

/// Build an exact point of the dynamics from a sampled state: project it to
/// consistency, solve the saddle system for the accelerations and reactions,
/// and take `zeta_dot = Z w`. Both the stacked residual and the
/// power-balance defect must vanish there.
#[test]
fn exact_points_satisfy_residual_and_power_balance() {
    for name in models::MODEL_NAMES {
        let entry = models::build(name, &BTreeMap::new()).unwrap();
        let sys = &entry.system;
        let samples = draw_samples(sys, 7, 25, &entry.sample_bounds).unwrap();
        for x in &samples.points {
            let zeta_guess = x.rows(0, sys.n_pot).into_owned();
            let omega_guess = x.rows(sys.n_pot, sys.n_kin).into_owned();
            let Ok(state) = consistent_init(sys, &zeta_guess, &omega_guess, 1e-12) else {
                continue;
            };
            let tau = tau_for(sys, 0.4);
            let (omega_dot, mults) = multiplier_solve(sys, &state, &tau).unwrap();
            let zeta_dot = (sys.kinematics)(&state.zeta) * &state.omega;

            let residual = sys
                .residual(&state, &mults, &omega_dot, &zeta_dot, &tau)
                .unwrap();
            // the kinematic, kinetic, and velocity-constraint blocks vanish
            // by construction; the position block vanishes by projection
            assert!(
                residual.amax() < 1e-9,
                "{name}: residual {:.3e}",
                residual.amax()
            );

            let h = sys.hamiltonian(&state).unwrap();
            let balance = sys
                .power_balance_residual(&state, &omega_dot, &zeta_dot, &tau)
                .unwrap();
            assert!(
                balance.abs() <= 1e-10 * (1.0 + h.abs()),
                "{name}: balance defect {balance:.3e} at H = {h:.3}"
            );
        }
    }
}

#[test]
fn gyroscopic_forces_are_power_neutral() {
    for name in models::MODEL_NAMES {
        let entry = models::build(name, &BTreeMap::new()).unwrap();
        let sys = &entry.system;
        let samples = draw_samples(sys, 3, 40, &entry.sample_bounds).unwrap();
        for x in &samples.points {
            let omega = x.rows(sys.n_pot, sys.n_kin).into_owned();
            let gamma = &sys.mass * &omega;
            let g = (sys.gyroscopic)(&gamma);
            let power = omega.dot(&(&g * &omega));
            assert!(power.abs() < 1e-12, "{name}: w^T G(Mw) w = {power:.3e}");
        }
    }
}

#[test]
fn hidden_constraint_vanishes_at_consistent_states() {
    let entry = models::build("slider-crank", &BTreeMap::new()).unwrap();
    let sys = &entry.system;
    let coupled = entry.coupled.as_ref().unwrap();
    let p = models::SliderCrankParams::default();
    for &(phi1, omega1) in &[(0.3, 5.0), (1.1, -2.0), (-0.6, 0.7)] {
        let state = models::consistent_state(coupled, &p, phi1, omega1).unwrap();
        let ep = sys.eval_point(&state.zeta, &state.omega).unwrap();
        // w^T Z^T c'^T equals the transposed hidden-constraint value
        let left = (ep.kinematics.transpose() * ep.pos_constraint_jac.transpose()).transpose()
            * &state.omega;
        let hidden = (&ep.pos_constraint_jac * &ep.kinematics) * &state.omega;
        assert!((left - &hidden).amax() < 1e-14);
        assert!(hidden.amax() < 1e-12);
    }
}

#[test]
fn side_slip_guess_is_projected_orthogonally() {
    let entry = models::build("diff-drive", &BTreeMap::new()).unwrap();
    let state = consistent_init(
        &entry.system,
        &DVector::zeros(3),
        &DVector::from_row_slice(&[1.0, 0.1, 0.2]),
        1e-12,
    )
    .unwrap();
    // the constraint row [0 1 0] only kills the lateral velocity
    assert!((state.omega[0] - 1.0).abs() < 1e-14);
    assert!(state.omega[1].abs() < 1e-14);
    assert!((state.omega[2] - 0.2).abs() < 1e-14);
}

#[test]
fn unconstrained_guess_passes_through_consistent_init() {
    let entry = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let zeta = DVector::from_row_slice(&[0.3, 0.5, -0.2]);
    let omega = DVector::from_row_slice(&[7.0, -1.0, 2.0]);
    let state = consistent_init(&entry.system, &zeta, &omega, 1e-12).unwrap();
    assert_eq!(state.zeta, zeta);
    assert_eq!(state.omega, omega);
}

/// Independent least-squares oracle for the velocity projection: with an
/// orthonormal kernel basis `N` from the SVD, the projection of `w` onto the
/// constraint kernel is `N N^T w`.
#[test]
fn consistent_init_matches_an_independent_least_squares_solve() {
    let entry = models::build("slider-crank", &BTreeMap::new()).unwrap();
    let sys = &entry.system;
    let p = models::SliderCrankParams::default();
    let zeta = models::closed_configuration(&p, 0.8).unwrap();
    let omega_guess = DVector::from_row_slice(&[4.0, 0.3, -0.2, 0.1]);

    let state = consistent_init(sys, &zeta, &omega_guess, 1e-12).unwrap();
    let ep = sys.eval_point(&state.zeta, &state.omega).unwrap();
    assert!((&ep.vel_constraint * &state.omega).amax() <= 1e-12);
    assert!(ep.pos_constraint.amax() <= 1e-12);

    // oracle: the orthonormal eigenbasis of J^T J splits the velocity space
    // into constraint row space (positive eigenvalues) and kernel (zero
    // eigenvalues); the projection keeps only kernel components
    let mut j = DMatrix::zeros(sys.l_vel + sys.k_pos, sys.n_kin);
    j.view_mut((0, 0), (sys.l_vel, sys.n_kin))
        .copy_from(&ep.vel_constraint);
    j.view_mut((sys.l_vel, 0), (sys.k_pos, sys.n_kin))
        .copy_from(&(&ep.pos_constraint_jac * &ep.kinematics));
    let gram = j.transpose() * &j;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut projected = DVector::zeros(sys.n_kin);
    for i in 0..sys.n_kin {
        if eig.eigenvalues[i].abs() <= 1e-12 * scale {
            let basis = eig.eigenvectors.column(i);
            projected += basis * basis.dot(&omega_guess);
        }
    }
    assert!(
        (&state.omega - projected).amax() < 1e-12,
        "projection disagrees with the eigenbasis oracle"
    );
}

#[test]
fn centered_mass_robot_energy_value() {
    // m = 2, center of mass on the axle: H of a pure forward motion is
    // 1/2 m v^2
    let mut params = BTreeMap::new();
    params.insert("m".to_string(), 2.0);
    params.insert("ell".to_string(), 0.0);
    let entry = models::build("diff-drive", &params).unwrap();
    let state = State::new(
        &entry.system,
        0.0,
        DVector::zeros(3),
        DVector::from_row_slice(&[1.0, 0.0, 0.0]),
    );
    assert_eq!(entry.system.hamiltonian(&state).unwrap(), 1.0);
}

#[test]
fn residual_shape_and_multiplier_dimensions_are_validated() {
    let entry = models::build("rod-slider", &BTreeMap::new()).unwrap();
    let sys = &entry.system;
    let state = State::new(sys, 0.0, DVector::zeros(3), DVector::zeros(3));
    let bad_mults = Multipliers {
        lambda: DVector::zeros(2),
        mu: DVector::zeros(0),
    };
    let err = sys.residual(
        &state,
        &bad_mults,
        &DVector::zeros(3),
        &DVector::zeros(3),
        &DVector::zeros(3),
    );
    assert!(err.is_err());
}
