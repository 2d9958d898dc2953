//! Negative fixtures for the verification machinery.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::sample::SampleSet;
use crate::verify::dirac::{check_dim_constancy, DimConstancyVerdict, ImageRep};

/// The constant structure `im [1 0; 0 0; 0 0; 0 1]` whose constrained
/// reduction under `E(x) = [1, x]` changes dimension at `x = 0`. The family
/// is a pointwise Dirac structure everywhere but fails the
/// dimension-constancy hypothesis, so it is not modulated.
pub fn counterexample_rep() -> ImageRep {
    let flows = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let efforts = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    ImageRep::new(flows, efforts).unwrap()
}

/// The modulating constraint `E(x) = [1, x]`.
pub fn counterexample_constraint(x: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 2, &[1.0, x])
}

/// Run the dimension-constancy check for the counterexample family over the
/// given scalar samples.
pub fn counterexample_dim_constancy(samples: &SampleSet) -> Result<DimConstancyVerdict, PhError> {
    let rep_fn = |_: &DVector<f64>| Ok(counterexample_rep());
    let e_fn = |x: &DVector<f64>| counterexample_constraint(x[0]);
    check_dim_constancy(&rep_fn, &e_fn, samples, 1e-10)
}

/// Run the local-continuity proxy for the counterexample family over the
/// given scalar samples.
pub fn counterexample_continuity(
    samples: &SampleSet,
) -> Result<crate::verify::dirac::ContinuityVerdict, PhError> {
    let rep_fn = |_: &DVector<f64>| Ok(counterexample_rep());
    let e_fn = |x: &DVector<f64>| counterexample_constraint(x[0]);
    crate::verify::dirac::check_local_continuity(&rep_fn, &e_fn, samples, 1e-6, 1e4)
}
