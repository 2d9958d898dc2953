//! Deterministic sample sets that discretize "for all x in U" quantifiers
//! over user-declared boxes. Points come from a seed-offset Halton sequence,
//! so a `(seed, count, box)` triple always reproduces the same set.

use nalgebra::DVector;

use crate::error::PhError;
use crate::system::DomainGuard;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse in the given base.
fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// A reproducible, guard-filtered point set inside a coordinate box.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub points: Vec<DVector<f64>>,
    pub seed: u64,
    pub count: usize,
    /// Per-coordinate bounds (lo, hi).
    pub bounds: Vec<(f64, f64)>,
}

impl SampleSet {
    /// Generate `count` points inside `bounds`, dropping points rejected by
    /// the optional domain guard. Fails when the box has invalid bounds,
    /// exceeds the supported dimension, or is almost entirely infeasible.
    pub fn generate(
        seed: u64,
        count: usize,
        bounds: &[(f64, f64)],
        guard: Option<&DomainGuard>,
    ) -> Result<Self, PhError> {
        if count == 0 {
            return Err(PhError::Param("sample count must be at least 1".into()));
        }
        if bounds.is_empty() || bounds.len() > PRIMES.len() {
            return Err(PhError::Param(format!(
                "sample box dimension {} unsupported (1..={})",
                bounds.len(),
                PRIMES.len()
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(PhError::Param(format!(
                    "invalid bounds for coordinate {i}: [{lo}, {hi}]"
                )));
            }
        }
        let offset = splitmix64(seed) % 1_000_003;
        let mut points = Vec::with_capacity(count);
        let limit = 1000 * count as u64 + 1000;
        let mut index = 0u64;
        while points.len() < count && index < limit {
            let raw = offset + 1 + index;
            index += 1;
            let point = DVector::from_fn(bounds.len(), |j, _| {
                let (lo, hi) = bounds[j];
                lo + (hi - lo) * radical_inverse(PRIMES[j], raw)
            });
            if guard.is_none_or(|g| g(&point)) {
                points.push(point);
            }
        }
        if points.len() < count {
            return Err(PhError::Param(format!(
                "could not draw {count} samples inside the guard after {limit} attempts"
            )));
        }
        Ok(SampleSet {
            points,
            seed,
            count,
            bounds: bounds.to_vec(),
        })
    }
}
