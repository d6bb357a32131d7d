//! Deterministic evaluation grids for sup-norm estimates.
//!
//! Sup norms over the input space are estimated by maximizing over a fixed
//! low-discrepancy (Halton) grid, optionally augmented with sample points.
//! The result is an estimate from below; callers treat it as such.

use crate::features::Domain;

/// How many grid points to use when estimating sup norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPolicy {
    pub sup_points: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            sup_points: 100_000,
        }
    }
}

const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse of `index` in the given base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while index > 0 {
        denom *= base as f64;
        inv += (index % base) as f64 / denom;
        index /= base;
    }
    inv
}

/// The `index`-th Halton point mapped into the domain box (1-based index so
/// the degenerate all-zeros point is skipped).
pub fn halton_point(domain: &Domain, index: u64) -> Vec<f64> {
    domain
        .bounds()
        .iter()
        .enumerate()
        .map(|(axis, &(lo, hi))| {
            let u = radical_inverse(index, HALTON_BASES[axis % HALTON_BASES.len()]);
            lo + u * (hi - lo)
        })
        .collect()
}

/// Deterministic low-discrepancy grid of `count` points in the domain.
pub fn halton_grid(domain: &Domain, count: usize) -> Vec<Vec<f64>> {
    (1..=count as u64).map(|i| halton_point(domain, i)).collect()
}

/// Maximize |f| over the policy grid plus the supplied extra points.
pub fn sup_on_grid<F>(domain: &Domain, policy: &GridPolicy, extra: &[Vec<f64>], f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = 0.0f64;
    for i in 1..=policy.sup_points as u64 {
        let x = halton_point(domain, i);
        best = best.max(f(&x).abs());
    }
    for x in extra {
        best = best.max(f(x).abs());
    }
    best
}
