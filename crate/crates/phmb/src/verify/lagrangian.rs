//! Local verification of the energy-storage relation: the constrained graph
//! of a gradient field must have tangent spaces on which the canonical
//! pairing vanishes, and dissipation maps must never produce negative power.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::linalg::{fd_jacobian, max_abs, numerical_rank, DEFAULT_RANK_TOL};
use crate::verify::dirac::continuous_kernel_basis;

/// Relative tolerance for the tangent-pairing and Hessian-symmetry tests.
/// Scaled internally by the magnitude of the finite-difference Hessian.
pub const DEFAULT_LAGRANGIAN_TOL: f64 = 1e-7;

/// Finite-difference step for Hessians.
pub const HESSIAN_FD_STEP: f64 = 1e-5;

/// Outcome of [`check_lagrangian_local`].
#[derive(Debug, Clone)]
pub struct LagrangianVerdict {
    pub pass: bool,
    /// `max |Hess - Hess^T|` of the finite-difference Hessian of the energy.
    pub hessian_asymmetry: f64,
    /// Worst `|v1^T w2 - w1^T v2|` over the sampled tangent basis pairs.
    pub max_pairing_violation: f64,
    /// `max |d(z1)|`.
    pub constraint_residual: f64,
    /// Threshold actually used (tol scaled by the Hessian magnitude).
    pub threshold: f64,
}

/// Hessian of the `row`-th component of `d` by finite differences of its
/// Jacobian rows.
fn constraint_hessian(
    d_jac: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    z1: &DVector<f64>,
    row: usize,
) -> DMatrix<f64> {
    let grad_row = |x: &DVector<f64>| d_jac(x).row(row).transpose();
    fd_jacobian(&grad_row, z1, HESSIAN_FD_STEP)
}

/// Check, at the feasible point `z1`, that the set
/// `{(x, grad_H(x) + d'(x)^T lambda) : d(x) = 0}` is locally a Lagrangian
/// submanifold:
///
/// 1. `d'(z1)` has full row rank,
/// 2. the finite-difference Hessian of `H` is symmetric,
/// 3. tangent pairs built from the kernel of `d'(z1)` and the symmetric
///    curvature matrix annihilate the pairing `v1^T w2 - w1^T v2`.
///
/// `tol` is relative; thresholds scale with the Hessian magnitude.
pub fn check_lagrangian_local(
    _h: &dyn Fn(&DVector<f64>) -> f64,
    grad_h: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    d: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    d_jac: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    z1: &DVector<f64>,
    tol: f64,
) -> Result<LagrangianVerdict, PhError> {
    let n = z1.len();
    let dz = d(z1);
    let k = dz.len();
    let feas_tol = tol.max(1e-9) * (1.0 + z1.amax());
    let constraint_residual = if k > 0 { dz.amax() } else { 0.0 };
    if constraint_residual > feas_tol {
        return Err(PhError::Constraint(format!(
            "point is not feasible: |d(z1)| = {constraint_residual:.3e}"
        )));
    }

    let jac = d_jac(z1);
    if jac.nrows() != k || jac.ncols() != n {
        return Err(PhError::shape(
            "d'(z1)",
            format!("{k}x{n}"),
            format!("{}x{}", jac.nrows(), jac.ncols()),
        ));
    }
    if k > 0 {
        let info = numerical_rank(&jac, DEFAULT_RANK_TOL);
        if info.rank != k {
            return Err(PhError::Rank(format!(
                "d'(z1) has numerical rank {} < {} rows (gap {:.2e})",
                info.rank, k, info.gap
            )));
        }
    }
    if k >= n {
        return Err(PhError::Rank(format!(
            "constraints ({k}) must leave at least one free direction in dimension {n}"
        )));
    }

    let kernel = if k == 0 {
        DMatrix::identity(n, n)
    } else {
        continuous_kernel_basis(&jac, k, 1e-8)?
    };

    let hess = fd_jacobian(grad_h, z1, HESSIAN_FD_STEP);
    let hessian_asymmetry = max_abs(&(&hess - hess.transpose()));
    let scale = 1.0 + max_abs(&hess);
    let threshold = tol * scale;

    // Probe both a multiplier-free effort point and one with active
    // multipliers, so the constraint-curvature term is exercised.
    let mut max_pairing: f64 = 0.0;
    let lambdas: Vec<DVector<f64>> = vec![DVector::zeros(k), DVector::from_element(k, 1.0)];
    for lambda in &lambdas {
        let z2 = grad_h(z1) + jac.transpose() * lambda;
        // least-squares multiplier recovery from the effort point
        let zhat = if k > 0 {
            let gram = &jac * jac.transpose();
            let rhs = &jac * (grad_h(z1) - &z2);
            gram.lu()
                .solve(&rhs)
                .ok_or_else(|| PhError::Rank("constraint Gram matrix singular".into()))?
        } else {
            DVector::zeros(0)
        };
        let mut curvature = DMatrix::zeros(n, n);
        for l in 0..k {
            if zhat[l] != 0.0 {
                curvature += constraint_hessian(d_jac, z1, l) * zhat[l];
            }
        }
        let m = &hess - curvature;

        // tangent basis: (v1, M v1) for kernel directions, (0, d'(z1)^T e_l)
        // for constraint-force directions
        let mut basis: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
        for c in 0..kernel.ncols() {
            let v1 = kernel.column(c).into_owned();
            let v2 = &m * &v1;
            basis.push((v1, v2));
        }
        for l in 0..k {
            basis.push((DVector::zeros(n), jac.row(l).transpose()));
        }
        for (v1, v2) in &basis {
            for (w1, w2) in &basis {
                let pairing = (v1.dot(w2) - w1.dot(v2)).abs();
                max_pairing = max_pairing.max(pairing);
            }
        }
    }

    Ok(LagrangianVerdict {
        pass: hessian_asymmetry <= threshold && max_pairing <= threshold,
        hessian_asymmetry,
        max_pairing_violation: max_pairing,
        constraint_residual,
        threshold,
    })
}

/// A `(zeta, w)` sample pair.
pub type VelocitySample = (DVector<f64>, DVector<f64>);

/// Outcome of the dissipation passivity check.
#[derive(Debug, Clone)]
pub struct ResistiveVerdict {
    pub pass: bool,
    /// Minimum of `w^T tau_d(zeta, w)` over the samples.
    pub min_power: f64,
    /// Sample attaining the minimum, as `(zeta, w)`.
    pub witness: Option<VelocitySample>,
}

/// Check `w^T tau_d(zeta, w) >= -tol` at every sampled pair.
pub fn check_resistive<F>(tau_d: &F, samples: &[VelocitySample], tol: f64) -> ResistiveVerdict
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + ?Sized,
{
    let mut min_power = f64::INFINITY;
    let mut witness = None;
    for (zeta, omega) in samples {
        let p = omega.dot(&tau_d(zeta, omega));
        if p < min_power {
            min_power = p;
            witness = Some((zeta.clone(), omega.clone()));
        }
    }
    if samples.is_empty() {
        min_power = 0.0;
    }
    ResistiveVerdict {
        pass: min_power >= -tol,
        min_power,
        witness: if min_power >= -tol { None } else { witness },
    }
}
