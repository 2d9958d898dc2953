//! Numerical verification of the structural axioms of a system: Dirac
//! conditions of the assembled interconnection structure, regularity of the
//! modulation (constant-rank and dimension-constancy hypotheses), the
//! Lagrangian tangent conditions of the energy storage, passivity of the
//! dissipation, and cross-checks of user-supplied derivatives against finite
//! differences.
//!
//! Universally quantified conditions are discretized over seeded sample
//! boxes; every check reports its tolerance, worst violation, and a witness
//! on failure.

pub mod dirac;
pub mod fixtures;
pub mod lagrangian;
pub mod report;

pub use dirac::{
    assemble_constrained_dirac, assemble_constrained_dirac_planned, assemble_unconstrained_dirac,
    check_dim_constancy, check_dirac_pointwise, check_local_continuity, constraint_effort_matrix,
    continuous_kernel_basis, ContinuityVerdict, DimConstancyVerdict, DiracVerdict, ImageRep,
    ReductionPlan,
};
pub use lagrangian::{
    check_lagrangian_local, check_resistive, LagrangianVerdict, ResistiveVerdict,
};
pub use report::{CheckResult, Verdict, VerificationReport};

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::linalg::{
    asymmetry, fd_gradient, fd_jacobian, max_abs, numerical_rank, skew_defect, DEFAULT_RANK_TOL,
};
use crate::sample::SampleSet;
use crate::system::PhSystem;

/// Tolerances for [`verify_system`].
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// Absolute tolerance for the algebraic Dirac conditions.
    pub dirac_tol: f64,
    /// Relative tolerance for symmetry/skewness of constant matrices.
    pub matrix_tol: f64,
    /// Relative step for first-derivative cross-checks.
    pub fd_step: f64,
    /// Relative tolerance for derivative cross-checks.
    pub fd_tol: f64,
    /// Relative tolerance for the Lagrangian tangent tests.
    pub lagrangian_tol: f64,
    /// Absolute tolerance for dissipated-power nonnegativity.
    pub resistive_tol: f64,
    /// Relative eigenvalue floor below which the mass matrix counts as
    /// singular (positive semi-definite handling).
    pub mass_floor: f64,
    /// Cap on the number of feasible points used for the Lagrangian check.
    pub lagrangian_points: usize,
    /// Perturbation size for the local-continuity proxy.
    pub continuity_delta: f64,
    /// Maximum admissible column slope (deviation per unit perturbation,
    /// relative to the representation magnitude) in the continuity proxy.
    pub continuity_slope: f64,
    /// Cap on the number of samples used for the continuity proxy.
    pub continuity_points: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            rank_tol: DEFAULT_RANK_TOL,
            dirac_tol: dirac::DEFAULT_DIRAC_TOL,
            matrix_tol: 1e-12,
            fd_step: 1e-6,
            fd_tol: 1e-4,
            lagrangian_tol: lagrangian::DEFAULT_LAGRANGIAN_TOL,
            resistive_tol: 1e-10,
            mass_floor: 1e-10,
            lagrangian_points: 10,
            continuity_delta: 1e-6,
            continuity_slope: 1e4,
            continuity_points: 25,
        }
    }
}

fn split_sample(sys: &PhSystem, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let zeta = x.rows(0, sys.n_pot).into_owned();
    let gamma = x.rows(sys.n_pot, sys.n_kin).into_owned();
    (zeta, gamma)
}

/// Default sample box when a model does not declare one: positions and
/// momenta in `[-1, 1]`.
pub fn default_bounds(sys: &PhSystem) -> Vec<(f64, f64)> {
    vec![(-1.0, 1.0); sys.n_pot + sys.n_kin]
}

/// Draw a `(zeta, gamma)` sample set for a system, rejecting points whose
/// position part leaves the admissible domain.
pub fn draw_samples(
    sys: &PhSystem,
    seed: u64,
    count: usize,
    bounds: &[(f64, f64)],
) -> Result<SampleSet, PhError> {
    if bounds.len() != sys.n_pot + sys.n_kin {
        return Err(PhError::Param(format!(
            "sample box must have {} coordinates, got {}",
            sys.n_pot + sys.n_kin,
            bounds.len()
        )));
    }
    let n_pot = sys.n_pot;
    let guard = sys.domain_guard.clone();
    let sample_guard: crate::system::DomainGuard =
        std::sync::Arc::new(move |x: &DVector<f64>| guard(&x.rows(0, n_pot).into_owned()));
    SampleSet::generate(seed, count, bounds, Some(&sample_guard))
}

struct MassAnalysis {
    symmetric_defect: f64,
    min_eig: f64,
    positive_definite: bool,
    pinv: DMatrix<f64>,
    /// Orthonormal rows spanning the kernel of the mass matrix (empty when
    /// positive definite).
    kernel_rows: DMatrix<f64>,
}

fn analyze_mass(sys: &PhSystem, cfg: &VerifyConfig) -> MassAnalysis {
    let eig = nalgebra::SymmetricEigen::new(sys.mass.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let floor = cfg.mass_floor * scale;
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let n = sys.n_kin;
    let mut pinv = DMatrix::zeros(n, n);
    let mut kernel_cols: Vec<usize> = Vec::new();
    for i in 0..n {
        let lam = eig.eigenvalues[i];
        if lam.abs() > floor {
            let v = eig.eigenvectors.column(i);
            pinv += DMatrix::from_fn(n, n, |r, c| v[r] * v[c] / lam);
        } else {
            kernel_cols.push(i);
        }
    }
    let mut kernel_rows = DMatrix::zeros(kernel_cols.len(), n);
    for (r, &c) in kernel_cols.iter().enumerate() {
        kernel_rows
            .row_mut(r)
            .copy_from(&eig.eigenvectors.column(c).transpose());
    }
    MassAnalysis {
        symmetric_defect: asymmetry(&sys.mass),
        min_eig,
        positive_definite: min_eig > floor,
        pinv,
        kernel_rows,
    }
}

/// Run every structural check on a system over the given sample set and
/// aggregate the outcomes. Individual check errors are recorded in the
/// report rather than aborting the run.
pub fn verify_system(
    sys: &PhSystem,
    samples: &SampleSet,
    cfg: &VerifyConfig,
) -> VerificationReport {
    let mut report = VerificationReport {
        subject: "system".into(),
        seed: samples.seed,
        sample_count: samples.points.len(),
        checks: Vec::new(),
    };

    // mass matrix: symmetry and (semi-)definiteness
    let mass = analyze_mass(sys, cfg);
    let mass_scale = 1.0 + max_abs(&sys.mass);
    report.push(CheckResult::judged(
        "mass_symmetry",
        mass.symmetric_defect <= cfg.matrix_tol * mass_scale,
        mass.symmetric_defect,
        cfg.matrix_tol * mass_scale,
        None,
    ));
    report.push(
        CheckResult::judged(
            "mass_semidefinite",
            mass.min_eig >= -cfg.mass_floor * mass_scale,
            (-mass.min_eig).max(0.0),
            cfg.mass_floor * mass_scale,
            None,
        )
        .with_detail(if mass.positive_definite {
            "positive definite; admissible for simulation".to_string()
        } else {
            format!(
                "singular within floor (min eigenvalue {:.3e}); storage verified via pseudo-inverse, simulation not supported",
                mass.min_eig
            )
        }),
    );

    // gyroscopic skewness over samples
    {
        let mut worst = 0.0_f64;
        let mut witness = None;
        let mut scale = 1.0_f64;
        for x in &samples.points {
            let (_, gamma) = split_sample(sys, x);
            let g = (sys.gyroscopic)(&gamma);
            scale = scale.max(max_abs(&g));
            let defect = skew_defect(&g);
            if defect > worst {
                worst = defect;
                witness = Some(x.clone());
            }
        }
        let tol = cfg.matrix_tol * scale;
        report.push(CheckResult::judged(
            "gyroscopic_skew",
            worst <= tol,
            worst,
            tol,
            if worst <= tol { None } else { witness },
        ));
    }

    // constant rank of the velocity-constraint matrix
    {
        let mut ranks: Vec<usize> = Vec::new();
        let mut witness = None;
        for x in &samples.points {
            let (zeta, _) = split_sample(sys, x);
            let a = (sys.vel_constraint)(&zeta);
            ranks.push(numerical_rank(&a, cfg.rank_tol).rank);
        }
        let first = ranks.first().copied().unwrap_or(0);
        let constant = ranks.iter().all(|&r| r == first);
        if !constant {
            let i = ranks.iter().position(|&r| r != first).unwrap();
            witness = Some(samples.points[i].clone());
        }
        report.push(
            CheckResult::judged("vel_constraint_rank_constancy", constant, 0.0, 0.0, witness)
                .with_detail(format!("rank = {first}")),
        );
    }

    // feasible points for position-constraint checks
    let feasible: Vec<DVector<f64>> = if sys.k_pos == 0 {
        samples
            .points
            .iter()
            .map(|x| split_sample(sys, x).0)
            .collect()
    } else {
        samples
            .points
            .iter()
            .filter_map(|x| {
                let (zeta, _) = split_sample(sys, x);
                sys.project_to_position_constraints(&zeta, 1e-12, 50).ok()
            })
            .collect()
    };

    if sys.k_pos > 0 {
        if feasible.is_empty() {
            report.push(CheckResult::error(
                "pos_constraint_jac_rank",
                "no sample could be projected onto the position constraints",
            ));
        } else {
            let mut pass = true;
            let mut worst_gap = f64::INFINITY;
            let mut witness = None;
            for zeta in &feasible {
                let info = numerical_rank(&(sys.pos_constraint_jac)(zeta), cfg.rank_tol);
                if info.rank != sys.k_pos {
                    pass = false;
                    witness = Some(zeta.clone());
                }
                worst_gap = worst_gap.min(info.gap);
            }
            report.push(
                CheckResult::judged("pos_constraint_jac_rank", pass, 0.0, 0.0, witness)
                    .with_detail(format!("smallest singular-value gap {worst_gap:.3e}")),
            );
        }
    }

    // derivative cross-checks against central finite differences
    {
        let mut worst = 0.0_f64;
        let mut witness = None;
        let mut scale = 1.0_f64;
        for x in &samples.points {
            let (zeta, _) = split_sample(sys, x);
            let analytic = (sys.potential_grad)(&zeta);
            let v = sys.potential.clone();
            let numeric = fd_gradient(&move |z: &DVector<f64>| v(z), &zeta, cfg.fd_step);
            scale = scale.max(analytic.amax());
            let err = (&analytic - &numeric).amax();
            if err > worst {
                worst = err;
                witness = Some(x.clone());
            }
        }
        let tol = cfg.fd_tol * scale;
        report.push(CheckResult::judged(
            "potential_grad_consistency",
            worst <= tol,
            worst,
            tol,
            if worst <= tol { None } else { witness },
        ));
    }
    if sys.k_pos > 0 {
        let mut worst = 0.0_f64;
        let mut witness = None;
        let mut scale = 1.0_f64;
        for x in &samples.points {
            let (zeta, _) = split_sample(sys, x);
            let analytic = (sys.pos_constraint_jac)(&zeta);
            let c = sys.pos_constraint.clone();
            let numeric = fd_jacobian(&move |z: &DVector<f64>| c(z), &zeta, cfg.fd_step);
            scale = scale.max(max_abs(&analytic));
            let err = max_abs(&(&analytic - &numeric));
            if err > worst {
                worst = err;
                witness = Some(x.clone());
            }
        }
        let tol = cfg.fd_tol * scale;
        report.push(CheckResult::judged(
            "pos_constraint_jac_consistency",
            worst <= tol,
            worst,
            tol,
            if worst <= tol { None } else { witness },
        ));
    }

    // dissipation passivity at (zeta, M^+ gamma)
    {
        let pairs: Vec<(DVector<f64>, DVector<f64>)> = samples
            .points
            .iter()
            .map(|x| {
                let (zeta, gamma) = split_sample(sys, x);
                (zeta, &mass.pinv * gamma)
            })
            .collect();
        let tau_d = sys.dissipation.clone();
        let v = check_resistive(
            &move |z: &DVector<f64>, w: &DVector<f64>| tau_d(z, w),
            &pairs,
            cfg.resistive_tol,
        );
        report.push(CheckResult::judged(
            "dissipation_passivity",
            v.pass,
            (-v.min_power).max(0.0),
            cfg.resistive_tol,
            v.witness.map(|(z, w)| {
                let mut joint = DVector::zeros(z.len() + w.len());
                joint.rows_mut(0, z.len()).copy_from(&z);
                joint.rows_mut(z.len(), w.len()).copy_from(&w);
                joint
            }),
        ));
    }

    // Dirac conditions: unconstrained assembly and constrained reduction
    {
        let mut worst = 0.0_f64;
        let mut pass = true;
        let mut witness = None;
        let mut constrained_error: Option<String> = None;
        for x in &samples.points {
            let (zeta, gamma) = split_sample(sys, x);
            match assemble_unconstrained_dirac(sys, &zeta, &gamma) {
                Ok(rep) => {
                    let v = check_dirac_pointwise(&rep, cfg.dirac_tol);
                    worst = worst.max(v.skew_violation);
                    if !v.pass {
                        pass = false;
                        witness = Some(x.clone());
                    }
                    if sys.l_vel > 0 && constrained_error.is_none() {
                        let e = constraint_effort_matrix(sys, &zeta);
                        match assemble_constrained_dirac(&rep, &e, cfg.dirac_tol) {
                            Ok(reduced) => {
                                let vc = check_dirac_pointwise(&reduced, cfg.dirac_tol);
                                worst = worst.max(vc.skew_violation);
                                if !vc.pass {
                                    pass = false;
                                    witness = Some(x.clone());
                                }
                            }
                            Err(e) => constrained_error = Some(format!("{e}")),
                        }
                    }
                }
                Err(e) => {
                    constrained_error = Some(format!("{e}"));
                }
            }
        }
        let check = match constrained_error {
            Some(msg) => CheckResult::error("dirac_structure", msg),
            None => CheckResult::judged("dirac_structure", pass, worst, cfg.dirac_tol, witness),
        };
        report.push(check);
    }

    // dimension constancy of the modulated family
    {
        let rep_fn = |x: &DVector<f64>| {
            let (zeta, gamma) = split_sample(sys, x);
            assemble_unconstrained_dirac(sys, &zeta, &gamma)
        };
        let e_fn = |x: &DVector<f64>| {
            let (zeta, _) = split_sample(sys, x);
            constraint_effort_matrix(sys, &zeta)
        };
        match check_dim_constancy(&rep_fn, &e_fn, samples, cfg.dirac_tol) {
            Ok(v) => {
                let detail = format!("dimension = {}", v.dims.first().copied().unwrap_or(0));
                report.push(
                    CheckResult::judged(
                        "dirac_dim_constancy",
                        v.pass,
                        0.0,
                        0.0,
                        v.witness.map(|(x, _)| x),
                    )
                    .with_detail(detail),
                );
            }
            Err(e) => report.push(CheckResult::error("dirac_dim_constancy", format!("{e}"))),
        }

        // local continuity of the constrained representation (the computable
        // proxy for the local-trivialization property)
        let take = samples.points.len().min(cfg.continuity_points);
        let subset = SampleSet {
            points: samples.points[..take].to_vec(),
            seed: samples.seed,
            count: take,
            bounds: samples.bounds.clone(),
        };
        match dirac::check_local_continuity(
            &rep_fn,
            &e_fn,
            &subset,
            cfg.continuity_delta,
            cfg.continuity_slope,
        ) {
            Ok(v) => {
                report.push(
                    CheckResult::judged(
                        "dirac_local_continuity",
                        v.pass,
                        v.worst_slope,
                        cfg.continuity_slope,
                        v.witness,
                    )
                    .with_detail(v.detail),
                );
            }
            Err(e) => report.push(CheckResult::error("dirac_local_continuity", format!("{e}"))),
        }
    }

    // Lagrangian storage relation at feasible points
    {
        let take = feasible.len().min(cfg.lagrangian_points);
        if take == 0 {
            report.push(CheckResult::error(
                "lagrangian_storage",
                "no feasible point available for the storage check",
            ));
        } else {
            let mut worst = 0.0_f64;
            let mut threshold = 0.0_f64;
            let mut pass = true;
            let mut witness = None;
            let mut error: Option<String> = None;
            for (i, zeta) in feasible.iter().take(take).enumerate() {
                // gamma sample consistent with the mass kernel
                let (_, gamma_raw) =
                    split_sample(sys, &samples.points[i.min(samples.points.len() - 1)]);
                let gamma = if mass.kernel_rows.nrows() > 0 {
                    &gamma_raw - mass.kernel_rows.transpose() * (&mass.kernel_rows * &gamma_raw)
                } else {
                    gamma_raw
                };
                let z1 = {
                    let mut z = DVector::zeros(sys.n_pot + sys.n_kin);
                    z.rows_mut(0, sys.n_pot).copy_from(zeta);
                    z.rows_mut(sys.n_pot, sys.n_kin).copy_from(&gamma);
                    z
                };
                let (n_pot, n_kin) = (sys.n_pot, sys.n_kin);
                let potential = sys.potential.clone();
                let potential_grad = sys.potential_grad.clone();
                let pos_constraint = sys.pos_constraint.clone();
                let pos_jac = sys.pos_constraint_jac.clone();
                let pinv = mass.pinv.clone();
                let w_rows = mass.kernel_rows.clone();
                let h = move |z: &DVector<f64>| {
                    let zeta = z.rows(0, n_pot).into_owned();
                    let gamma = z.rows(n_pot, n_kin).into_owned();
                    0.5 * gamma.dot(&(&pinv * &gamma)) + potential(&zeta)
                };
                let pinv2 = mass.pinv.clone();
                let grad_h = move |z: &DVector<f64>| {
                    let zeta = z.rows(0, n_pot).into_owned();
                    let gamma = z.rows(n_pot, n_kin).into_owned();
                    let mut g = DVector::zeros(n_pot + n_kin);
                    g.rows_mut(0, n_pot).copy_from(&potential_grad(&zeta));
                    g.rows_mut(n_pot, n_kin).copy_from(&(&pinv2 * gamma));
                    g
                };
                let kernel_rows = w_rows.nrows();
                let w_rows2 = w_rows.clone();
                let d = move |z: &DVector<f64>| {
                    let zeta = z.rows(0, n_pot).into_owned();
                    let gamma = z.rows(n_pot, n_kin).into_owned();
                    let c = pos_constraint(&zeta);
                    let mut out = DVector::zeros(c.len() + kernel_rows);
                    out.rows_mut(0, c.len()).copy_from(&c);
                    if kernel_rows > 0 {
                        out.rows_mut(c.len(), kernel_rows)
                            .copy_from(&(&w_rows2 * gamma));
                    }
                    out
                };
                let k_pos = sys.k_pos;
                let d_jac = move |z: &DVector<f64>| {
                    let zeta = z.rows(0, n_pot).into_owned();
                    let mut jac = DMatrix::zeros(k_pos + kernel_rows, n_pot + n_kin);
                    jac.view_mut((0, 0), (k_pos, n_pot))
                        .copy_from(&pos_jac(&zeta));
                    if kernel_rows > 0 {
                        jac.view_mut((k_pos, n_pot), (kernel_rows, n_kin))
                            .copy_from(&w_rows);
                    }
                    jac
                };
                match check_lagrangian_local(&h, &grad_h, &d, &d_jac, &z1, cfg.lagrangian_tol) {
                    Ok(v) => {
                        worst = worst.max(v.hessian_asymmetry.max(v.max_pairing_violation));
                        threshold = threshold.max(v.threshold);
                        if !v.pass {
                            pass = false;
                            witness = Some(z1.clone());
                        }
                    }
                    Err(e) => {
                        error = Some(format!("{e}"));
                        break;
                    }
                }
            }
            let check = match error {
                Some(msg) => CheckResult::error("lagrangian_storage", msg),
                None => CheckResult::judged("lagrangian_storage", pass, worst, threshold, witness),
            };
            report.push(check);
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn damped_cart() -> PhSystem {
        PhSystem::cartesian(1)
            .mass(DMatrix::from_element(1, 1, 2.0))
            .potential(
                |z: &DVector<f64>| 0.5 * 3.0 * z[0] * z[0],
                |z: &DVector<f64>| DVector::from_element(1, 3.0 * z[0]),
            )
            .dissipation(|_, w: &DVector<f64>| w * 0.4)
            .build()
            .unwrap()
    }

    #[test]
    fn healthy_system_passes_everything() {
        let sys = damped_cart();
        let samples = draw_samples(&sys, 42, 60, &default_bounds(&sys)).unwrap();
        let report = verify_system(&sys, &samples, &VerifyConfig::default());
        assert!(report.overall_pass(), "{report}");
    }

    #[test]
    fn asymmetric_mass_fails_symmetry_check() {
        let mut sys = damped_cart();
        sys.mass = DMatrix::from_element(1, 1, 2.0);
        let sys2 = PhSystem::cartesian(2)
            .mass(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]))
            .build()
            .unwrap();
        let samples = draw_samples(&sys2, 42, 40, &default_bounds(&sys2)).unwrap();
        let report = verify_system(&sys2, &samples, &VerifyConfig::default());
        assert!(!report.overall_pass());
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "mass_symmetry")
            .unwrap();
        assert_eq!(check.verdict, Verdict::Fail);
    }

    #[test]
    fn non_skew_gyroscopic_matrix_fails() {
        let sys = PhSystem::builder(2, 2)
            .mass(DMatrix::identity(2, 2))
            .gyroscopic(|g: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[0.0, g[0], g[0], 0.0]))
            .build()
            .unwrap();
        let samples = draw_samples(&sys, 42, 40, &default_bounds(&sys)).unwrap();
        let report = verify_system(&sys, &samples, &VerifyConfig::default());
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "gyroscopic_skew")
            .unwrap();
        assert_eq!(check.verdict, Verdict::Fail);
    }

    #[test]
    fn wrong_gradient_is_caught_by_cross_check() {
        let sys = PhSystem::cartesian(1)
            .mass(DMatrix::identity(1, 1))
            .potential(
                |z: &DVector<f64>| 0.5 * z[0] * z[0],
                |z: &DVector<f64>| DVector::from_element(1, 2.0 * z[0]),
            )
            .build()
            .unwrap();
        let samples = draw_samples(&sys, 1, 30, &default_bounds(&sys)).unwrap();
        let report = verify_system(&sys, &samples, &VerifyConfig::default());
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "potential_grad_consistency")
            .unwrap();
        assert_eq!(check.verdict, Verdict::Fail);
    }

    #[test]
    fn psd_singular_mass_still_verifies_storage() {
        let sys = PhSystem::cartesian(2)
            .mass(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))
            .build()
            .unwrap();
        let samples = draw_samples(&sys, 42, 30, &default_bounds(&sys)).unwrap();
        let report = verify_system(&sys, &samples, &VerifyConfig::default());
        assert!(report.overall_pass(), "{report}");
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "mass_semidefinite")
            .unwrap();
        assert!(check.detail.contains("singular"));
    }

    #[test]
    fn report_serialization_is_deterministic() {
        let sys = damped_cart();
        let samples = draw_samples(&sys, 42, 20, &default_bounds(&sys)).unwrap();
        let a = verify_system(&sys, &samples, &VerifyConfig::default()).to_string();
        let b = verify_system(&sys, &samples, &VerifyConfig::default()).to_string();
        assert_eq!(a, b);
        assert!(a.contains("overall = pass"));
    }

    #[test]
    fn guarded_domain_restricts_samples() {
        let sys = PhSystem::builder(1, 1)
            .mass(DMatrix::identity(1, 1))
            .domain_guard(|z: &DVector<f64>| z[0] > 0.0)
            .build()
            .unwrap();
        let samples = draw_samples(&sys, 3, 25, &default_bounds(&sys)).unwrap();
        assert!(samples.points.iter().all(|x| x[0] > 0.0));
        let _ = Arc::strong_count(&sys.domain_guard);
    }
}
