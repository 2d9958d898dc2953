//! Property tests for the structure-verification machinery.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use phmb::models;
use phmb::verify::{
    assemble_constrained_dirac, assemble_unconstrained_dirac, check_dirac_pointwise,
    constraint_effort_matrix, continuous_kernel_basis, draw_samples, ImageRep,
};
use proptest::prelude::*;

fn skew_from(values: &[f64], n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    let mut it = values.iter().cycle();
    for i in 0..n {
        for k in i + 1..n {
            let v = *it.next().unwrap();
            j[(i, k)] = v;
            j[(k, i)] = -v;
        }
    }
    j
}

fn symmetric_from(values: &[f64], n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    let mut it = values.iter().cycle();
    for i in 0..n {
        for k in i..n {
            let v = *it.next().unwrap();
            s[(i, k)] = v;
            s[(k, i)] = v;
        }
    }
    s
}

proptest! {
    #[test]
    fn skew_graphs_are_dirac_and_symmetric_perturbations_are_not(
        n in 1usize..=12,
        values in proptest::collection::vec(-10.0..10.0f64, 1..80),
        sym in proptest::collection::vec(-1.0..1.0f64, 1..80),
    ) {
        let j = skew_from(&values, n);
        let rep = ImageRep::new(j.clone(), DMatrix::identity(n, n)).unwrap();
        prop_assert!(check_dirac_pointwise(&rep, 1e-10).pass);

        let s = symmetric_from(&sym, n);
        if s.amax() > 1e-3 {
            let bad = ImageRep::new(&j + s * 1e-3, DMatrix::identity(n, n)).unwrap();
            prop_assert!(!check_dirac_pointwise(&bad, 1e-10).pass);
        }
    }

    #[test]
    fn kernel_basis_annihilates_and_has_full_column_rank(
        rows in 1usize..=5,
        cols in 1usize..=6,
        rank in 0usize..=5,
        left in proptest::collection::vec(-2.0..2.0f64, 30),
        right in proptest::collection::vec(-2.0..2.0f64, 30),
    ) {
        let r = rank.min(rows).min(cols);
        // construct a matrix of exactly rank r as a product of full-rank factors
        let u = DMatrix::from_fn(rows, r, |i, k| left[(i * r + k) % left.len()] + if i == k { 3.0 } else { 0.0 });
        let v = DMatrix::from_fn(r, cols, |k, j| right[(k * cols + j) % right.len()] + if k == j { 3.0 } else { 0.0 });
        let e = if r == 0 { DMatrix::zeros(rows, cols) } else { u * v };
        let info = phmb::linalg::numerical_rank(&e, 1e-10);
        prop_assume!(info.rank == r);
        // only keep well-separated ranks, so the pivot block stays
        // moderately conditioned and the residual bound is meaningful
        if r > 0 {
            prop_assume!(info.singular_values[r - 1] > 1e-6 * info.max_sv);
        }

        let basis = continuous_kernel_basis(&e, r, 1e-8).unwrap();
        prop_assert_eq!(basis.ncols(), cols - r);
        prop_assert!((&e * &basis).amax() <= 1e-8 * (1.0 + e.amax()));
        if basis.ncols() > 0 {
            let min_sv = basis
                .clone()
                .svd(false, false)
                .singular_values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            prop_assert!(min_sv > 1e-8);
        }
    }

    #[test]
    fn diagonal_nonnegative_damping_is_passive(
        d in proptest::collection::vec(0.0..10.0f64, 3),
        w in proptest::collection::vec(-5.0..5.0f64, 3),
    ) {
        let damping = move |_: &DVector<f64>, vel: &DVector<f64>| {
            DVector::from_fn(3, |i, _| d[i] * vel[i])
        };
        let samples = vec![(DVector::zeros(1), DVector::from_row_slice(&w))];
        prop_assert!(phmb::verify::check_resistive(&damping, &samples, 1e-12).pass);
    }
}

#[test]
fn constrained_roundtrip_passes_on_the_built_in_models() {
    for name in ["diff-drive", "rod-slider", "slider-crank"] {
        let entry = models::build(name, &BTreeMap::new()).unwrap();
        let sys = &entry.system;
        let samples = draw_samples(sys, 11, 40, &entry.sample_bounds).unwrap();
        for x in &samples.points {
            let zeta = x.rows(0, sys.n_pot).into_owned();
            let gamma = x.rows(sys.n_pot, sys.n_kin).into_owned();
            let rep = assemble_unconstrained_dirac(sys, &zeta, &gamma).unwrap();
            assert!(
                check_dirac_pointwise(&rep, 1e-10).pass,
                "{name}: unconstrained"
            );
            let e = constraint_effort_matrix(sys, &zeta);
            let reduced = assemble_constrained_dirac(&rep, &e, 1e-10).unwrap();
            let verdict = check_dirac_pointwise(&reduced, 1e-10);
            assert!(
                verdict.pass,
                "{name}: constrained reduction, violation {:.3e}",
                verdict.skew_violation
            );
        }
    }
}

#[test]
fn unconstrained_assembly_blocks_are_as_documented() {
    // at the identity configuration of the gyroscope, the kinematics block
    // of the assembled matrix is the identity
    let entry = models::build("gyroscope", &BTreeMap::new()).unwrap();
    let rep = assemble_unconstrained_dirac(&entry.system, &DVector::zeros(3), &DVector::zeros(3))
        .unwrap();
    let j = &rep.flows;
    assert_eq!(
        j.view((0, 3), (3, 3)).clone_owned(),
        DMatrix::identity(3, 3)
    );
    assert_eq!(
        j.view((3, 0), (3, 3)).clone_owned(),
        -DMatrix::<f64>::identity(3, 3)
    );
    // skewness of the whole block matrix
    assert!(phmb::linalg::skew_defect(j) < 1e-15);

    // zero momentum kills the gyroscopic block of the planar robot
    let dd = models::build("diff-drive", &BTreeMap::new()).unwrap();
    let rep =
        assemble_unconstrained_dirac(&dd.system, &DVector::zeros(3), &DVector::zeros(3)).unwrap();
    let g_block = rep.flows.view((3, 3), (3, 3)).clone_owned();
    assert_eq!(g_block, DMatrix::zeros(3, 3));
}
