//! Planar differential-drive robot: body-fixed velocities, a no-side-slip
//! velocity constraint, and two wheel-force ports. Also provides the reduced
//! two-velocity variant with the side-slip constraint resolved away.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::system::PhSystem;

/// Parameters of the robot. `i_s` is the moment of inertia about the center
/// of mass; the moment about the body origin is `i_o = i_s + m * ell^2`.
#[derive(Debug, Clone, Copy)]
pub struct DiffDriveParams {
    /// Total mass (kg).
    pub m: f64,
    /// Offset of the center of mass along the body x-axis (m).
    pub ell: f64,
    /// Moment of inertia about the center of mass (kg m^2).
    pub i_s: f64,
    /// Wheel spacing (m).
    pub b: f64,
}

impl Default for DiffDriveParams {
    fn default() -> Self {
        DiffDriveParams {
            m: 1.0,
            ell: 0.1,
            i_s: 0.05,
            b: 0.5,
        }
    }
}

impl DiffDriveParams {
    pub fn i_o(&self) -> f64 {
        self.i_s + self.m * self.ell * self.ell
    }

    fn validate(&self) -> Result<(), PhError> {
        if !(self.m > 0.0 && self.i_s > 0.0 && self.b > 0.0) {
            return Err(PhError::Param(format!(
                "diff-drive parameters must be positive (m = {}, I_S = {}, b = {})",
                self.m, self.i_s, self.b
            )));
        }
        Ok(())
    }
}

/// Full model: positions `(x, y, phi)`, body velocities `(v_x, v_y, omega)`,
/// no-side-slip constraint `v_y = 0`, wheel ports `(F_l, F_r)`.
pub fn diff_drive(p: &DiffDriveParams) -> Result<PhSystem, PhError> {
    p.validate()?;
    let DiffDriveParams { m, ell, b, .. } = *p;
    let i_s = p.i_s;
    let i_o = p.i_o();

    #[rustfmt::skip]
    let mass = DMatrix::from_row_slice(3, 3, &[
        m,   0.0,     0.0,
        0.0, m,       m * ell,
        0.0, m * ell, i_o,
    ]);

    PhSystem::builder(3, 3)
        .mass(mass)
        .kinematics(|z: &DVector<f64>| {
            let (c, s) = (z[2].cos(), z[2].sin());
            #[rustfmt::skip]
            let kin = DMatrix::from_row_slice(3, 3, &[
                c,   -s,  0.0,
                s,   c,   0.0,
                0.0, 0.0, 1.0,
            ]);
            kin
        })
        .gyroscopic(move |gamma: &DVector<f64>| {
            // body-frame momentum bracket; prefactor m (L - ell p_y) / I_S
            // equals m * omega on the momentum manifold
            let factor = -m * (gamma[2] - ell * gamma[1]) / i_s;
            #[rustfmt::skip]
            let gyro = DMatrix::from_row_slice(3, 3, &[
                0.0,           factor, factor * ell,
                -factor,       0.0,    0.0,
                -factor * ell, 0.0,    0.0,
            ]);
            gyro
        })
        .velocity_constraints(1, |_: &DVector<f64>| {
            DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0])
        })
        .ports(&["wheel_left", "wheel_right"], move |_: &DVector<f64>| {
            #[rustfmt::skip]
            let directions = DMatrix::from_row_slice(3, 2, &[
                1.0,      1.0,
                0.0,      0.0,
                -b / 2.0, b / 2.0,
            ]);
            directions
        })
        .build()
}

/// Reduced model with the side-slip constraint resolved: velocities
/// `(v_x, omega)` only, same wheel ports, no explicit constraints.
pub fn diff_drive_reduced(p: &DiffDriveParams) -> Result<PhSystem, PhError> {
    p.validate()?;
    let DiffDriveParams { m, ell, b, .. } = *p;
    let i_o = p.i_o();

    PhSystem::builder(3, 2)
        .mass(DMatrix::from_row_slice(2, 2, &[m, 0.0, 0.0, i_o]))
        .kinematics(|z: &DVector<f64>| {
            let (c, s) = (z[2].cos(), z[2].sin());
            #[rustfmt::skip]
            let kin = DMatrix::from_row_slice(3, 2, &[
                c,   0.0,
                s,   0.0,
                0.0, 1.0,
            ]);
            kin
        })
        .gyroscopic(move |gamma: &DVector<f64>| {
            let factor = m * ell * gamma[1] / i_o;
            DMatrix::from_row_slice(2, 2, &[0.0, -factor, factor, 0.0])
        })
        .ports(&["wheel_left", "wheel_right"], move |_: &DVector<f64>| {
            #[rustfmt::skip]
            let directions = DMatrix::from_row_slice(2, 2, &[
                1.0,      1.0,
                -b / 2.0, b / 2.0,
            ]);
            directions
        })
        .build()
}
