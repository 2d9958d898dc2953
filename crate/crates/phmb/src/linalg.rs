//! Small dense linear-algebra helpers: numerical rank with gap reporting,
//! kernel projections, deterministic column selection, and finite
//! differences for derivative cross-checks.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Outcome of a numerical rank decision.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    /// Largest singular value (0 for an empty matrix).
    pub max_sv: f64,
    /// Ratio sigma_rank / sigma_{rank+1}; infinite when the tail is exactly zero
    /// or the matrix has full rank.
    pub gap: f64,
    /// All singular values, sorted in decreasing order.
    pub singular_values: Vec<f64>,
}

/// Numerical rank of `m`: singular values above `rel_tol * sigma_max` count.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> RankInfo {
    if m.nrows() == 0 || m.ncols() == 0 {
        return RankInfo {
            rank: 0,
            max_sv: 0.0,
            gap: f64::INFINITY,
            singular_values: Vec::new(),
        };
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max_sv = sv[0];
    let thresh = rel_tol * max_sv;
    let rank = sv.iter().filter(|&&s| s > thresh).count();
    let gap = if rank == 0 {
        f64::INFINITY
    } else if rank < sv.len() && sv[rank] > 0.0 {
        sv[rank - 1] / sv[rank]
    } else {
        f64::INFINITY
    };
    RankInfo {
        rank,
        max_sv,
        gap,
        singular_values: sv,
    }
}

/// True when `a` and `b` span the same column space.
pub fn same_span(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> bool {
    if a.nrows() != b.nrows() {
        return false;
    }
    let ra = numerical_rank(a, rel_tol).rank;
    let rb = numerical_rank(b, rel_tol).rank;
    if ra != rb {
        return false;
    }
    let mut joint = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    joint.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    joint
        .view_mut((0, a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    numerical_rank(&joint, rel_tol).rank == ra
}

/// Euclidean projection of `v` onto the kernel of `j`, via the SVD
/// pseudo-inverse. Returns `v` unchanged when `j` has no rows.
pub fn project_onto_kernel(j: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if j.nrows() == 0 {
        return v.clone();
    }
    let svd = j.clone().svd(true, true);
    let correction = svd
        .solve(&(j * v), DEFAULT_RANK_TOL * svd.singular_values.max())
        .expect("svd solve");
    v - correction
}

/// Projection of `v` onto the kernel of `j`, orthogonal in the inner product
/// induced by the symmetric positive definite `w`:
/// `v - w^{-1} j^T (j w^{-1} j^T)^{-1} j v`.
pub fn project_onto_kernel_weighted(
    j: &DMatrix<f64>,
    w_inv_jt: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>, PhError> {
    if j.nrows() == 0 {
        return Ok(v.clone());
    }
    let gram = j * w_inv_jt;
    let rhs = j * v;
    let svd = gram.clone().svd(true, true);
    let mu = svd
        .solve(&rhs, DEFAULT_RANK_TOL * svd.singular_values.max())
        .map_err(|e| PhError::SingularSystem(format!("weighted projection: {e}")))?;
    Ok(v - w_inv_jt * mu)
}

/// Maximum absolute entry; 0 for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Asymmetry measure `max |m - m^T|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// Skewness defect `max |m + m^T|`.
pub fn skew_defect(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m + m.transpose()))
}

/// Greedy deterministic selection of `want` linearly independent columns
/// (modified Gram-Schmidt with max-residual pivoting). Returns the selected
/// column indices in pivot order, or an error when the matrix does not
/// contain `want` independent columns above the tolerance.
pub fn select_independent_columns(
    m: &DMatrix<f64>,
    want: usize,
    rel_tol: f64,
) -> Result<Vec<usize>, PhError> {
    let mut work = m.clone();
    let scale = max_abs(m).max(1.0);
    let mut selected = Vec::with_capacity(want);
    let mut used = vec![false; m.ncols()];
    for _ in 0..want {
        let mut best = None;
        let mut best_norm = rel_tol * scale;
        for (c, &taken) in used.iter().enumerate() {
            if taken {
                continue;
            }
            let n = work.column(c).norm();
            if n > best_norm {
                best_norm = n;
                best = Some(c);
            }
        }
        let Some(pivot) = best else {
            return Err(PhError::Rank(format!(
                "requested {want} independent columns, found only {}",
                selected.len()
            )));
        };
        used[pivot] = true;
        selected.push(pivot);
        let q = work.column(pivot).normalize();
        for (c, &taken) in used.iter().enumerate() {
            if taken {
                continue;
            }
            let coeff = q.dot(&work.column(c));
            let update = &q * coeff;
            let mut col = work.column_mut(c);
            col -= update;
        }
    }
    Ok(selected)
}

/// Extract the listed columns into a new matrix.
pub fn gather_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        out.column_mut(k).copy_from(&m.column(c));
    }
    out
}

/// Central finite-difference gradient with per-coordinate step
/// `h_rel * (1 + |x_i|)`.
pub fn fd_gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h_rel: f64) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let h = h_rel * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Central finite-difference Jacobian of a vector-valued function.
pub fn fd_jacobian(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h_rel: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), n);
    for i in 0..n {
        let h = h_rel * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let d = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.column_mut(i).copy_from(&d);
    }
    jac
}

/// Central finite-difference directional derivative of a matrix-valued
/// function along `dir`, with absolute step `h`.
pub fn fd_matrix_directional(
    a: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x: &DVector<f64>,
    dir: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let xp = x + dir * h;
    let xm = x - dir * h;
    (a(&xp) - a(&xm)) / (2.0 * h)
}
