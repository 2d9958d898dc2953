//! Planar slider-crank mechanism, built from two separately modeled bodies:
//! a crank pivoting about a fixed point and a rod-plus-slider body whose
//! joint point must stay on the horizontal guide. The mechanism itself is
//! their power-preserving coupling through the joint force/velocity ports.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::interconnect::{couple, CoupledSystem, CouplingSpec};
use crate::system::{PhSystem, State};

#[derive(Debug, Clone, Copy)]
pub struct SliderCrankParams {
    /// Crank radius (m).
    pub l1: f64,
    /// Crank moment of inertia about the pivot (kg m^2).
    pub i1_a: f64,
    /// Rod length (m).
    pub l2: f64,
    /// Combined rod + slider mass (kg).
    pub m2: f64,
    /// Center-of-mass offset of the rod body from the slider joint (m).
    pub r2: f64,
    /// Rod moment of inertia about the slider joint (kg m^2).
    pub i2_b: f64,
}

impl Default for SliderCrankParams {
    fn default() -> Self {
        SliderCrankParams {
            l1: 0.2,
            i1_a: 0.01,
            l2: 0.5,
            m2: 1.0,
            r2: 0.25,
            i2_b: 0.1,
        }
    }
}

impl SliderCrankParams {
    fn validate(&self) -> Result<(), PhError> {
        if !(self.l1 > 0.0
            && self.i1_a > 0.0
            && self.l2 > 0.0
            && self.m2 > 0.0
            && self.r2 > 0.0
            && self.i2_b > 0.0)
        {
            return Err(PhError::Param(
                "slider-crank parameters must be positive".into(),
            ));
        }
        if self.i2_b <= self.m2 * self.r2 * self.r2 {
            return Err(PhError::Param(format!(
                "rod inertia I2_B = {} must exceed m2 r2^2 = {} for a positive definite mass matrix",
                self.i2_b,
                self.m2 * self.r2 * self.r2
            )));
        }
        Ok(())
    }
}

/// Crank about its fixed pivot: one angle, one angular rate. Ports: drive
/// torque at the pivot, then the two components of the tip force.
pub fn crank(p: &SliderCrankParams) -> Result<PhSystem, PhError> {
    p.validate()?;
    let l1 = p.l1;
    PhSystem::builder(1, 1)
        .mass(DMatrix::from_element(1, 1, p.i1_a))
        .ports(
            &["drive_torque", "tip_force_x", "tip_force_y"],
            move |z: &DVector<f64>| {
                let (s, c) = z[0].sin_cos();
                DMatrix::from_row_slice(1, 3, &[1.0, -l1 * s, l1 * c])
            },
        )
        .build()
}

/// Rod and slider as one rigid body: positions `(x_B, y_B, phi2)`, body
/// velocities `(v_x', v_y', omega2)`, the guide constraint `y_B = 0`.
/// Ports: joint-force pair at the rod tip, then the horizontal slider force.
pub fn rod_slider(p: &SliderCrankParams) -> Result<PhSystem, PhError> {
    p.validate()?;
    let SliderCrankParams {
        l2, m2, r2, i2_b, ..
    } = *p;
    #[rustfmt::skip]
    let mass = DMatrix::from_row_slice(3, 3, &[
        m2,  0.0,     0.0,
        0.0, m2,      m2 * r2,
        0.0, m2 * r2, i2_b,
    ]);
    PhSystem::builder(3, 3)
        .mass(mass)
        .kinematics(|z: &DVector<f64>| {
            let (s, c) = z[2].sin_cos();
            #[rustfmt::skip]
            let kin = DMatrix::from_row_slice(3, 3, &[
                c,   -s,  0.0,
                s,   c,   0.0,
                0.0, 0.0, 1.0,
            ]);
            kin
        })
        .gyroscopic(|gamma: &DVector<f64>| {
            #[rustfmt::skip]
            let gyro = DMatrix::from_row_slice(3, 3, &[
                0.0,      0.0,       -gamma[1],
                0.0,      0.0,       gamma[0],
                gamma[1], -gamma[0], 0.0,
            ]);
            gyro
        })
        .position_constraints(
            1,
            |z: &DVector<f64>| DVector::from_element(1, z[1]),
            |_: &DVector<f64>| DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
        )
        .ports(
            &["joint_force_x", "joint_force_y", "slider_force"],
            move |z: &DVector<f64>| {
                let (s, c) = z[2].sin_cos();
                #[rustfmt::skip]
                let directions = DMatrix::from_row_slice(3, 3, &[
                    c,       s,      c,
                    -s,      c,      -s,
                    -l2 * s, l2 * c, 0.0,
                ]);
                directions
            },
        )
        .build()
}

/// The assembled mechanism: crank tip force/velocity coupled to the rod
/// joint ports. Remaining external ports: drive torque at the pivot and the
/// horizontal slider force.
pub fn slider_crank(p: &SliderCrankParams) -> Result<CoupledSystem, PhError> {
    let c = crank(p)?;
    let r = rod_slider(p)?;
    couple(&c, &r, &CouplingSpec::new(vec![1, 2], vec![0, 1]))
}

/// Loop-closed configuration `(phi1, x_B, 0, phi2)` for a crank angle:
/// the rod tip coincides with the crank tip and the slider sits on the
/// guide. Requires `|l1 sin(phi1)| <= l2`.
pub fn closed_configuration(p: &SliderCrankParams, phi1: f64) -> Result<DVector<f64>, PhError> {
    let s2 = p.l1 * phi1.sin() / p.l2;
    if s2.abs() > 1.0 {
        return Err(PhError::Param(format!(
            "no closed configuration: |l1 sin(phi1)| = {} exceeds l2 = {}",
            (p.l1 * phi1.sin()).abs(),
            p.l2
        )));
    }
    let phi2 = s2.asin();
    let x_b = p.l1 * phi1.cos() - p.l2 * phi2.cos();
    Ok(DVector::from_row_slice(&[phi1, x_b, 0.0, phi2]))
}

/// Consistent state of the coupled mechanism with the crank turning at
/// exactly `omega1`: the remaining velocities solve the coupling and guide
/// constraints.
pub fn consistent_state(
    coupled: &CoupledSystem,
    p: &SliderCrankParams,
    phi1: f64,
    omega1: f64,
) -> Result<State, PhError> {
    let zeta = closed_configuration(p, phi1)?;
    let sys = &coupled.system;
    let ep = sys.eval_point(&zeta, &DVector::zeros(4))?;
    // stack coupling rows and the differentiated guide constraint
    let mut j = DMatrix::zeros(sys.l_vel + sys.k_pos, sys.n_kin);
    j.view_mut((0, 0), (sys.l_vel, sys.n_kin))
        .copy_from(&ep.vel_constraint);
    let hidden = &ep.pos_constraint_jac * &ep.kinematics;
    j.view_mut((sys.l_vel, 0), (sys.k_pos, sys.n_kin))
        .copy_from(&hidden);
    // solve for the rod velocities with the crank rate pinned
    let block = j.view((0, 1), (3, 3)).into_owned();
    let rhs = -(j.column(0) * omega1);
    let sol = block.lu().solve(&rhs).ok_or_else(|| {
        PhError::SingularSystem(
            "slider-crank constraint block singular at this configuration".into(),
        )
    })?;
    let mut omega = DVector::zeros(4);
    omega[0] = omega1;
    omega.rows_mut(1, 3).copy_from(&sol);
    Ok(State::new(sys, 0.0, zeta, omega))
}

/// Distance between the crank tip and the rod tip; zero along a trajectory
/// that started loop-closed.
pub fn loop_closure_error(p: &SliderCrankParams, zeta: &DVector<f64>) -> f64 {
    let (phi1, x_b, y_b, phi2) = (zeta[0], zeta[1], zeta[2], zeta[3]);
    let tip_crank = (p.l1 * phi1.cos(), p.l1 * phi1.sin());
    let tip_rod = (x_b + p.l2 * phi2.cos(), y_b + p.l2 * phi2.sin());
    ((tip_crank.0 - tip_rod.0).powi(2) + (tip_crank.1 - tip_rod.1).powi(2)).sqrt()
}
