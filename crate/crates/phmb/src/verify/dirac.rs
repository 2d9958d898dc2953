//! Pointwise Dirac-structure tests, continuous kernel bases, and the
//! constrained reduction that turns an unconstrained structure plus a
//! velocity-constraint matrix into the constrained one.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::linalg::{
    gather_columns, max_abs, numerical_rank, select_independent_columns, skew_defect,
};
use crate::sample::SampleSet;
use crate::system::PhSystem;

/// Default absolute tolerance for the algebraic Dirac conditions.
pub const DEFAULT_DIRAC_TOL: f64 = 1e-10;

/// Image representation of a candidate structure in flow-effort space:
/// the columns of `[flows; efforts]` span the subspace.
#[derive(Debug, Clone)]
pub struct ImageRep {
    pub flows: DMatrix<f64>,
    pub efforts: DMatrix<f64>,
}

impl ImageRep {
    pub fn new(flows: DMatrix<f64>, efforts: DMatrix<f64>) -> Result<Self, PhError> {
        if flows.nrows() != efforts.nrows() || flows.ncols() != efforts.ncols() {
            return Err(PhError::shape(
                "image representation",
                format!("{}x{}", flows.nrows(), flows.ncols()),
                format!("{}x{}", efforts.nrows(), efforts.ncols()),
            ));
        }
        Ok(ImageRep { flows, efforts })
    }

    /// Dimension of the flow (and effort) space.
    pub fn n(&self) -> usize {
        self.flows.nrows()
    }

    pub fn cols(&self) -> usize {
        self.flows.ncols()
    }

    /// The stacked `2n x q` matrix `[flows; efforts]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.n();
        let q = self.cols();
        let mut s = DMatrix::zeros(2 * n, q);
        s.view_mut((0, 0), (n, q)).copy_from(&self.flows);
        s.view_mut((n, 0), (n, q)).copy_from(&self.efforts);
        s
    }
}

/// Result of the pointwise Dirac test.
#[derive(Debug, Clone)]
pub struct DiracVerdict {
    pub pass: bool,
    /// Numerical rank of the stacked representation (= subspace dimension).
    pub rank: usize,
    /// Required rank (the space dimension n).
    pub required_rank: usize,
    /// `max |K^T L + L^T K|` over the representation columns: the pairing of
    /// column i with column j is exactly that matrix entry.
    pub skew_violation: f64,
    /// Singular-value gap of the rank decision.
    pub rank_gap: f64,
}

/// Test whether the column span of `[K; L]` is a Dirac structure: the span
/// must have dimension `n` (numerical rank of the stacked matrix, threshold
/// `tol * sigma_max`) and every pair of spanning columns must annihilate the
/// power pairing, `K^T L + L^T K = 0`. For a row-spanned representation with
/// matrices `K'`, `L'` (where the criterion reads `K' L'^T + L' K'^T = 0`)
/// this is the same test applied to the transposes.
pub fn check_dirac_pointwise(rep: &ImageRep, tol: f64) -> DiracVerdict {
    let n = rep.n();
    let info = numerical_rank(&rep.stacked(), tol);
    let product = rep.flows.transpose() * &rep.efforts + rep.efforts.transpose() * &rep.flows;
    let skew_violation = max_abs(&product);
    DiracVerdict {
        pass: info.rank == n && skew_violation <= tol,
        rank: info.rank,
        required_rank: n,
        skew_violation,
        rank_gap: info.gap,
    }
}

/// Basis of the kernel of `E`, built by the pivoted elimination construction:
/// after row/column permutation with complete pivoting, the kernel of
/// `[E11 E12]` is spanned by `[-E11^{-1} E12; I]`. The pivot order is
/// deterministic, so nearby inputs produce continuously varying bases.
///
/// `expected_rank` must equal the numerical rank of `E`.
pub fn continuous_kernel_basis(
    e: &DMatrix<f64>,
    expected_rank: usize,
    tol: f64,
) -> Result<DMatrix<f64>, PhError> {
    let info = numerical_rank(e, crate::linalg::DEFAULT_RANK_TOL);
    if info.rank != expected_rank {
        return Err(PhError::Rank(format!(
            "kernel basis: numerical rank {} does not match expected rank {} (gap {:.2e})",
            info.rank, expected_rank, info.gap
        )));
    }
    let pivots = kernel_pivots(e, expected_rank);
    kernel_basis_from_pivots(e, expected_rank, &pivots, tol)
}

/// Row/column pivot order chosen by complete-pivoting elimination. The first
/// `rank` entries of each permutation locate the invertible block.
fn kernel_pivots(e: &DMatrix<f64>, rank: usize) -> (Vec<usize>, Vec<usize>) {
    let (rows, n) = (e.nrows(), e.ncols());
    let mut work = e.clone();
    let mut row_perm: Vec<usize> = (0..rows).collect();
    let mut col_perm: Vec<usize> = (0..n).collect();
    for step in 0..rank {
        let mut best = (step, step);
        let mut best_abs = -1.0;
        for i in step..rows {
            for j in step..n {
                let a = work[(i, j)].abs();
                if a > best_abs {
                    best_abs = a;
                    best = (i, j);
                }
            }
        }
        work.swap_rows(step, best.0);
        work.swap_columns(step, best.1);
        row_perm.swap(step, best.0);
        col_perm.swap(step, best.1);
        let pivot = work[(step, step)];
        for i in step + 1..rows {
            let factor = work[(i, step)] / pivot;
            for j in step..n {
                work[(i, j)] -= factor * work[(step, j)];
            }
        }
    }
    (row_perm, col_perm)
}

/// Kernel basis for a given pivot order: solve the pivot block against the
/// remaining columns and undo the column permutation.
fn kernel_basis_from_pivots(
    e: &DMatrix<f64>,
    rank: usize,
    pivots: &(Vec<usize>, Vec<usize>),
    tol: f64,
) -> Result<DMatrix<f64>, PhError> {
    let n = e.ncols();
    let r = rank;
    if r == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    if r == n {
        return Ok(DMatrix::zeros(n, 0));
    }
    let (row_perm, col_perm) = pivots;
    let e11 = DMatrix::from_fn(r, r, |i, j| e[(row_perm[i], col_perm[j])]);
    let e12 = DMatrix::from_fn(r, n - r, |i, j| e[(row_perm[i], col_perm[r + j])]);
    let lu = e11.lu();
    let x = lu
        .solve(&e12)
        .ok_or_else(|| PhError::Rank("kernel basis: pivot block singular".into()))?;

    let mut basis = DMatrix::zeros(n, n - r);
    for i in 0..r {
        for j in 0..n - r {
            basis[(col_perm[i], j)] = -x[(i, j)];
        }
    }
    for j in 0..n - r {
        basis[(col_perm[r + j], j)] = 1.0;
    }

    let residual = max_abs(&(e * &basis));
    if residual > tol * (1.0 + max_abs(e)) {
        return Err(PhError::Rank(format!(
            "kernel basis residual {residual:.3e} above tolerance"
        )));
    }
    Ok(basis)
}

/// Assemble the unconstrained structure of a system at `(zeta, gamma)` as the
/// image of `[J; I]`, where `J` is the skew block matrix built from the
/// kinematics, gyroscopic, and port matrices. Block layout of the flow and
/// effort tuples: position rates, momentum rates, resistive channel, external
/// channel.
pub fn assemble_unconstrained_dirac(
    sys: &PhSystem,
    zeta: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<ImageRep, PhError> {
    sys.guard(zeta)?;
    let (np, nk, m) = (sys.n_pot, sys.n_kin, sys.m_ports);
    let z = (sys.kinematics)(zeta);
    let g = (sys.gyroscopic)(gamma);
    let b = (sys.port_directions)(zeta);
    if z.nrows() != np || z.ncols() != nk {
        return Err(PhError::shape(
            "Z(zeta)",
            format!("{np}x{nk}"),
            format!("{}x{}", z.nrows(), z.ncols()),
        ));
    }
    if g.nrows() != nk || g.ncols() != nk {
        return Err(PhError::shape(
            "G(gamma)",
            format!("{nk}x{nk}"),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    if b.nrows() != nk || b.ncols() != m {
        return Err(PhError::shape(
            "B(zeta)",
            format!("{nk}x{m}"),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }

    let n_hat = np + 2 * nk + m;
    let mut j = DMatrix::zeros(n_hat, n_hat);
    // column offsets: [potential efforts | velocities | resistive | external]
    let (c0, c1, c2, c3) = (0, np, np + nk, np + 2 * nk);
    j.view_mut((c0, c1), (np, nk)).copy_from(&z);
    j.view_mut((c1, c0), (nk, np)).copy_from(&(-z.transpose()));
    j.view_mut((c1, c1), (nk, nk)).copy_from(&(-&g));
    j.view_mut((c1, c2), (nk, nk))
        .copy_from(&(-DMatrix::<f64>::identity(nk, nk)));
    j.view_mut((c1, c3), (nk, m)).copy_from(&(-&b));
    j.view_mut((c2, c1), (nk, nk))
        .copy_from(&DMatrix::<f64>::identity(nk, nk));
    j.view_mut((c3, c1), (m, nk)).copy_from(&b.transpose());

    ImageRep::new(j, DMatrix::identity(n_hat, n_hat))
}

/// Constraint matrix acting on the effort tuple of the unconstrained
/// structure: `[0, A(zeta), 0, 0]`.
pub fn constraint_effort_matrix(sys: &PhSystem, zeta: &DVector<f64>) -> DMatrix<f64> {
    let (np, nk, m) = (sys.n_pot, sys.n_kin, sys.m_ports);
    let a = (sys.vel_constraint)(zeta);
    let mut e = DMatrix::zeros(sys.l_vel, np + 2 * nk + m);
    e.view_mut((0, np), (sys.l_vel, nk)).copy_from(&a);
    e
}

/// The deterministic choices made during one constrained reduction: the
/// kernel rank and pivot order of `E L`, and the columns selected from the
/// candidate matrix. Reusing a plan at a nearby point reproduces the same
/// representation columns, which is what makes finite-difference continuity
/// checks of the family meaningful.
#[derive(Debug, Clone)]
pub struct ReductionPlan {
    pub kernel_rank: usize,
    pub kernel_pivots: (Vec<usize>, Vec<usize>),
    pub selected_columns: Vec<usize>,
}

/// Constrained reduction: from a Dirac structure `D = im [K; L]` and a
/// constraint matrix `E`, build an image representation of
/// `{(f, e) : E e = 0, exists mu with (f + E^T mu, e) in D}`
/// via `[K J1, E^T; L J1, 0]` with `J1` a kernel basis of `E L`, followed by
/// reduction to `n` independent columns.
pub fn assemble_constrained_dirac(
    rep: &ImageRep,
    e: &DMatrix<f64>,
    tol: f64,
) -> Result<ImageRep, PhError> {
    assemble_constrained_dirac_planned(rep, e, tol, None).map(|(rep, _)| rep)
}

/// [`assemble_constrained_dirac`] with the pivot and column choices exposed.
/// With `plan = None` the choices are made fresh and returned; with a plan
/// from a nearby point the same choices are replayed, and any failure
/// (kernel rank change, singular pivot block, dependent columns) signals a
/// discontinuity of the family between the two points.
pub fn assemble_constrained_dirac_planned(
    rep: &ImageRep,
    e: &DMatrix<f64>,
    tol: f64,
    plan: Option<&ReductionPlan>,
) -> Result<(ImageRep, ReductionPlan), PhError> {
    let n = rep.n();
    if e.ncols() != n {
        return Err(PhError::shape(
            "constraint matrix",
            format!("_x{n}"),
            format!("_x{}", e.ncols()),
        ));
    }
    let input = check_dirac_pointwise(rep, tol.max(DEFAULT_DIRAC_TOL));
    if !input.pass {
        return Err(PhError::Rank(format!(
            "constrained reduction requires a Dirac input (rank {}/{}, skew violation {:.3e})",
            input.rank, input.required_rank, input.skew_violation
        )));
    }

    let el = e * &rep.efforts;
    let r1 = numerical_rank(&el, crate::linalg::DEFAULT_RANK_TOL).rank;
    let (kernel_rank, kernel_pivots) = match plan {
        Some(p) => {
            if r1 != p.kernel_rank {
                return Err(PhError::Rank(format!(
                    "kernel rank changed from {} to {r1} under the frozen plan",
                    p.kernel_rank
                )));
            }
            (p.kernel_rank, p.kernel_pivots.clone())
        }
        None => (r1, kernel_pivots(&el, r1)),
    };
    let j1 = kernel_basis_from_pivots(&el, kernel_rank, &kernel_pivots, tol)?;

    let top_left = &rep.flows * &j1;
    let bottom_left = &rep.efforts * &j1;
    let q = j1.ncols() + e.nrows();
    let mut stacked = DMatrix::zeros(2 * n, q);
    stacked
        .view_mut((0, 0), (n, j1.ncols()))
        .copy_from(&top_left);
    stacked
        .view_mut((0, j1.ncols()), (n, e.nrows()))
        .copy_from(&e.transpose());
    stacked
        .view_mut((n, 0), (n, j1.ncols()))
        .copy_from(&bottom_left);

    let rank = numerical_rank(&stacked, crate::linalg::DEFAULT_RANK_TOL).rank;
    if rank != n {
        return Err(PhError::Rank(format!(
            "constrained reduction produced rank {rank}, expected {n}; the dimension-constancy hypothesis fails at this point"
        )));
    }
    let selected_columns = match plan {
        Some(p) => {
            let gathered = gather_columns(&stacked, &p.selected_columns);
            if numerical_rank(&gathered, crate::linalg::DEFAULT_RANK_TOL).rank != n {
                return Err(PhError::Rank(
                    "frozen column selection became dependent at this point".into(),
                ));
            }
            p.selected_columns.clone()
        }
        None => select_independent_columns(&stacked, n, crate::linalg::DEFAULT_RANK_TOL)?,
    };
    let reduced = gather_columns(&stacked, &selected_columns);
    let flows = reduced.view((0, 0), (n, n)).into_owned();
    let efforts = reduced.view((n, 0), (n, n)).into_owned();
    Ok((
        ImageRep::new(flows, efforts)?,
        ReductionPlan {
            kernel_rank,
            kernel_pivots,
            selected_columns,
        },
    ))
}

/// Outcome of the local-continuity proxy check.
#[derive(Debug, Clone)]
pub struct ContinuityVerdict {
    pub pass: bool,
    /// Worst column deviation per unit of perturbation, over all samples and
    /// coordinate directions that stayed inside the domain.
    pub worst_slope: f64,
    /// Sample at which the frozen-plan reassembly failed or the deviation
    /// exceeded the bound.
    pub witness: Option<DVector<f64>>,
    /// Failure message from the frozen-plan reassembly, when that is what
    /// broke.
    pub detail: String,
}

/// Finite-difference proxy for local continuity of the constrained family:
/// at each sample the reduction plan is frozen and replayed at
/// coordinate-perturbed points; the representation columns must move
/// proportionally to the perturbation. A rank or pivot failure under the
/// frozen plan, or a column jump, marks the family discontinuous there.
pub fn check_local_continuity(
    rep_fn: &dyn Fn(&DVector<f64>) -> Result<ImageRep, PhError>,
    e_fn: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    samples: &SampleSet,
    delta: f64,
    max_slope: f64,
) -> Result<ContinuityVerdict, PhError> {
    if samples.points.is_empty() {
        return Err(PhError::Param("continuity check needs samples".into()));
    }
    let mut worst_slope = 0.0_f64;
    for x in &samples.points {
        let rep0 = rep_fn(x)?;
        let e0 = e_fn(x);
        let (base, plan) = assemble_constrained_dirac_planned(&rep0, &e0, 1e-8, None)?;
        let base_stacked = base.stacked();
        let scale = 1.0 + max_abs(&base_stacked);
        for i in 0..x.len() {
            for sign in [-1.0, 1.0] {
                let mut xp = x.clone();
                xp[i] += sign * delta;
                let Ok(repp) = rep_fn(&xp) else { continue };
                let ep = e_fn(&xp);
                match assemble_constrained_dirac_planned(&repp, &ep, 1e-8, Some(&plan)) {
                    Ok((shifted, _)) => {
                        let deviation = max_abs(&(shifted.stacked() - &base_stacked));
                        let slope = deviation / (delta * scale);
                        worst_slope = worst_slope.max(slope);
                        if slope > max_slope {
                            return Ok(ContinuityVerdict {
                                pass: false,
                                worst_slope,
                                witness: Some(x.clone()),
                                detail: format!(
                                    "columns moved at slope {slope:.3e} (bound {max_slope:.3e})"
                                ),
                            });
                        }
                    }
                    Err(err) => {
                        return Ok(ContinuityVerdict {
                            pass: false,
                            worst_slope,
                            witness: Some(x.clone()),
                            detail: err.to_string(),
                        });
                    }
                }
            }
        }
    }
    Ok(ContinuityVerdict {
        pass: true,
        worst_slope,
        witness: None,
        detail: String::new(),
    })
}

/// Outcome of the dimension-constancy test across a sample set.
#[derive(Debug, Clone)]
pub struct DimConstancyVerdict {
    pub pass: bool,
    /// `dim(D_x  cap  (R^n x ker E(x))) = n - rank(E(x) L(x))` per sample.
    pub dims: Vec<usize>,
    /// First sample whose dimension differs from the most common value.
    pub witness: Option<(DVector<f64>, usize)>,
}

/// Check that `dim(D_x cap (R^n x ker E(x)))` is the same integer at every
/// sample; this is the hypothesis under which the constrained reduction
/// yields a modulated structure.
pub fn check_dim_constancy(
    rep_fn: &dyn Fn(&DVector<f64>) -> Result<ImageRep, PhError>,
    e_fn: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    samples: &SampleSet,
    _tol: f64,
) -> Result<DimConstancyVerdict, PhError> {
    if samples.points.is_empty() {
        return Err(PhError::Param(
            "dimension-constancy check needs samples".into(),
        ));
    }
    let mut dims = Vec::with_capacity(samples.points.len());
    for x in &samples.points {
        let rep = rep_fn(x)?;
        let e = e_fn(x);
        if e.ncols() != rep.n() {
            return Err(PhError::shape(
                "E(x)",
                format!("_x{}", rep.n()),
                format!("_x{}", e.ncols()),
            ));
        }
        let el = &e * &rep.efforts;
        let rank = numerical_rank(&el, crate::linalg::DEFAULT_RANK_TOL).rank;
        dims.push(rep.n() - rank);
    }
    // majority value; ties resolved toward the smaller dimension
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for &d in &dims {
        *counts.entry(d).or_insert(0) += 1;
    }
    let mode = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1))
        .map(|(&d, _)| d)
        .unwrap();
    let witness = dims
        .iter()
        .position(|&d| d != mode)
        .map(|i| (samples.points[i].clone(), dims[i]));
    Ok(DimConstancyVerdict {
        pass: witness.is_none(),
        dims,
        witness,
    })
}

/// Skewness defect of the assembled block matrix; diagnostic only.
pub fn assembled_skew_defect(rep: &ImageRep) -> f64 {
    skew_defect(&rep.flows)
}
