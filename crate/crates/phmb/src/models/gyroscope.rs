//! Gimbal-mounted symmetric gyroscope: Euler-angle positions, body-fixed
//! angular velocities, an external torque port on the second gimbal axis,
//! and a domain guard at the gimbal-lock singularity.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::system::PhSystem;

/// Margin (rad) kept from the gimbal-lock angle `|beta| = pi/2`.
pub const GIMBAL_MARGIN: f64 = 1e-6;

/// Disk parameters: uniform density, mass `m`, radius `r`, width `w`.
#[derive(Debug, Clone, Copy)]
pub struct GyroscopeParams {
    pub m: f64,
    pub r: f64,
    pub w: f64,
}

impl Default for GyroscopeParams {
    fn default() -> Self {
        GyroscopeParams {
            m: 1.0,
            r: 0.1,
            w: 0.02,
        }
    }
}

impl GyroscopeParams {
    /// Principal moments `(I_x, I_y, I_z)` about the center of gravity.
    pub fn inertia(&self) -> (f64, f64, f64) {
        let base = self.m / 12.0;
        (
            base * 6.0 * self.r * self.r,
            base * (3.0 * self.r * self.r + self.w * self.w),
            base * (3.0 * self.r * self.r + self.w * self.w),
        )
    }

    fn validate(&self) -> Result<(), PhError> {
        if !(self.m > 0.0 && self.r > 0.0 && self.w > 0.0) {
            return Err(PhError::Param(format!(
                "gyroscope parameters must be positive (m = {}, r = {}, w = {})",
                self.m, self.r, self.w
            )));
        }
        Ok(())
    }
}

/// Build the gyroscope: positions are the Euler angles `(alpha, beta,
/// gamma)`, velocities the body-fixed angular rates. The kinematics map is
/// singular at `|beta| = pi/2`; the domain guard rejects a margin around it.
pub fn gyroscope(p: &GyroscopeParams) -> Result<PhSystem, PhError> {
    p.validate()?;
    let (ix, iy, iz) = p.inertia();
    let mass = DMatrix::from_diagonal(&DVector::from_row_slice(&[ix, iy, iz]));

    PhSystem::builder(3, 3)
        .mass(mass)
        .kinematics(|z: &DVector<f64>| {
            let (sa, ca) = z[0].sin_cos();
            let (sb, cb) = z[1].sin_cos();
            let tb = sb / cb;
            #[rustfmt::skip]
            let kin = DMatrix::from_row_slice(3, 3, &[
                1.0, sa * tb, ca * tb,
                0.0, ca,      -sa,
                0.0, sa / cb, ca / cb,
            ]);
            kin
        })
        .gyroscopic(|gamma: &DVector<f64>| {
            // negative cross-product matrix of the angular momentum
            #[rustfmt::skip]
            let gyro = DMatrix::from_row_slice(3, 3, &[
                0.0,       gamma[2],  -gamma[1],
                -gamma[2], 0.0,       gamma[0],
                gamma[1],  -gamma[0], 0.0,
            ]);
            gyro
        })
        .ports(&["gimbal_torque"], |z: &DVector<f64>| {
            let (sa, ca) = z[0].sin_cos();
            DMatrix::from_row_slice(3, 1, &[0.0, ca, -sa])
        })
        .domain_guard(|z: &DVector<f64>| z[1].abs() < std::f64::consts::FRAC_PI_2 - GIMBAL_MARGIN)
        .build()
}
