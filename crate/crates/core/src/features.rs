//! Feature maps: evaluable bases h = (h_1, …, h_d) on a box domain.
//!
//! Component ordering is fixed and documented because coefficient vectors
//! travel between modules as raw arrays:
//!
//! * the intercept (constant 1), when requested, is always component 0;
//! * monomial and Legendre components follow in graded lexicographic order
//!   of their exponent tuples (total degree first, then lexicographic);
//! * Fourier components follow in graded lexicographic order of their
//!   frequency tuples, and within one tuple every sin/cos assignment of the
//!   active axes is enumerated with sin before cos (univariate:
//!   1, sin 2πt, cos 2πt, sin 4πt, cos 4πt, …);
//! * indicator components enumerate the tensor cells in row-major order of
//!   the per-axis cell indices.
//!
//! Legendre components are shifted to the domain box and normalized so that
//! the Gram matrix under the uniform distribution on the box is exactly the
//! identity. Multivariate bases are tensor products truncated by total
//! degree.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Hard cap on basis dimension; construction fails beyond this.
pub const MAX_DIMENSION: usize = 4096;

/// Axis-aligned box in R^p.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Invalid("domain needs at least one axis".into()));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::EmptyDomain { axis, lo, hi });
            }
        }
        Ok(Domain { bounds })
    }

    pub fn unit_box(p: usize) -> Self {
        Domain {
            bounds: vec![(0.0, 1.0); p],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.len(),
                got: x.len(),
            });
        }
        for (axis, (&v, &(lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::OutsideDomain { axis, value: v });
            }
        }
        Ok(())
    }

    /// Whether `other` fits inside this box.
    pub fn contains_box(&self, other: &Domain) -> bool {
        self.bounds.len() == other.bounds.len()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(&(lo, hi), &(olo, ohi))| lo <= olo && ohi <= hi)
    }

    /// Map x to per-axis unit coordinates t = (x - lo) / (hi - lo).
    fn unit_coords(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }
}

/// Basis families supported by `make_basis`.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisSpec {
    Monomial { degree: usize },
    Legendre { degree: usize },
    Fourier { max_frequency: usize },
    /// Strictly increasing interior knots per axis.
    Indicator { knots: Vec<Vec<f64>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trig {
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq)]
struct FourierTerm {
    freqs: Vec<u32>,
    /// One sin/cos choice per axis with a positive frequency, in axis order.
    phases: Vec<Trig>,
}

#[derive(Clone, Debug)]
enum MapKind {
    /// Raw powers of the unit coordinates.
    Monomial { exponents: Vec<Vec<u32>> },
    /// Orthonormal shifted Legendre in the unit coordinates.
    Legendre { exponents: Vec<Vec<u32>> },
    Fourier { terms: Vec<FourierTerm> },
    /// Tensor cells; `cells[j]` holds the per-axis cell index of component j.
    Indicator {
        knots: Vec<Vec<f64>>,
        cells: Vec<Vec<usize>>,
    },
    /// x ↦ W · inner(x).
    Transformed { inner: Box<FeatureMap>, weight: Mat },
}

/// An evaluable feature map h : domain → R^d.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    kind: MapKind,
    domain: Domain,
    dim: usize,
    intercept: bool,
}

/// Exponent tuples of total degree ≤ `degree` in graded lexicographic order,
/// with the zero tuple included only when `intercept` is set.
fn graded_exponents(p: usize, degree: usize, intercept: bool) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let lo = if intercept { 0 } else { 1 };
    for total in lo..=degree {
        let mut tuple = vec![0u32; p];
        fill_tuples(&mut out, &mut tuple, 0, total as u32);
    }
    out
}

fn fill_tuples(out: &mut Vec<Vec<u32>>, tuple: &mut Vec<u32>, axis: usize, remaining: u32) {
    if axis + 1 == tuple.len() {
        tuple[axis] = remaining;
        out.push(tuple.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        tuple[axis] = v;
        fill_tuples(out, tuple, axis + 1, remaining - v);
    }
}

fn fourier_terms(p: usize, max_frequency: usize) -> Vec<FourierTerm> {
    let mut terms = Vec::new();
    for tuple in graded_exponents(p, max_frequency, false) {
        let active: Vec<usize> = (0..p).filter(|&a| tuple[a] > 0).collect();
        let combos = 1usize << active.len();
        for mask in 0..combos {
            let phases = (0..active.len())
                .map(|i| {
                    // Lowest bit drives the first active axis; sin comes first.
                    if mask >> i & 1 == 0 {
                        Trig::Sin
                    } else {
                        Trig::Cos
                    }
                })
                .collect();
            terms.push(FourierTerm {
                freqs: tuple.clone(),
                phases,
            });
        }
    }
    terms
}

/// Construct a feature map.
///
/// Errors on an empty domain, non-increasing or out-of-range knots, and on
/// dimensions beyond [`MAX_DIMENSION`].
pub fn make_basis(spec: &BasisSpec, domain: &Domain, intercept: bool) -> Result<FeatureMap> {
    let p = domain.dim();
    let (kind, active_dim) = match spec {
        BasisSpec::Monomial { degree } | BasisSpec::Legendre { degree } => {
            let exps = graded_exponents(p, *degree, false);
            let kind = match spec {
                BasisSpec::Monomial { .. } => MapKind::Monomial { exponents: exps },
                _ => MapKind::Legendre { exponents: exps },
            };
            let n = match &kind {
                MapKind::Monomial { exponents } | MapKind::Legendre { exponents } => {
                    exponents.len()
                }
                _ => unreachable!(),
            };
            (kind, n)
        }
        BasisSpec::Fourier { max_frequency } => {
            let terms = fourier_terms(p, *max_frequency);
            let n = terms.len();
            (MapKind::Fourier { terms }, n)
        }
        BasisSpec::Indicator { knots } => {
            if knots.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: knots.len(),
                });
            }
            for (axis, (axis_knots, &(lo, hi))) in knots.iter().zip(domain.bounds()).enumerate() {
                let increasing = axis_knots.windows(2).all(|w| w[0] < w[1]);
                let inside = axis_knots.iter().all(|&t| t > lo && t < hi);
                if !increasing || !inside {
                    return Err(Error::BadKnots { axis });
                }
            }
            let cells_per_axis: Vec<usize> = knots.iter().map(|k| k.len() + 1).collect();
            let mut cells = vec![vec![0usize; p]];
            for (axis, &count) in cells_per_axis.iter().enumerate() {
                let mut next = Vec::with_capacity(cells.len() * count);
                for cell in &cells {
                    for c in 0..count {
                        let mut e = cell.clone();
                        e[axis] = c;
                        next.push(e);
                    }
                }
                cells = next;
            }
            let n = cells.len();
            (
                MapKind::Indicator {
                    knots: knots.clone(),
                    cells,
                },
                n,
            )
        }
    };

    let dim = active_dim + intercept as usize;
    if dim == 0 {
        return Err(Error::Invalid(
            "basis has no components; use an intercept or a positive degree".into(),
        ));
    }
    if dim > MAX_DIMENSION {
        return Err(Error::DimensionOverflow {
            dim,
            max: MAX_DIMENSION,
        });
    }
    Ok(FeatureMap {
        kind,
        domain: domain.clone(),
        dim,
        intercept,
    })
}

/// Orthonormal shifted Legendre values √(2k+1) P_k(2t−1) for k = 0..=max_deg.
fn legendre_column(t: f64, max_deg: usize) -> Vec<f64> {
    let u = 2.0 * t - 1.0;
    let mut vals = Vec::with_capacity(max_deg + 1);
    let mut p0 = 1.0;
    vals.push(1.0);
    if max_deg == 0 {
        return vals;
    }
    let mut p1 = u;
    vals.push(3f64.sqrt() * p1);
    for k in 2..=max_deg {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * u * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
        vals.push(((2 * k + 1) as f64).sqrt() * p2);
    }
    vals
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Whether every component is smooth on the domain.
    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            MapKind::Indicator { .. } => false,
            MapKind::Transformed { inner, .. } => inner.is_smooth(),
            _ => true,
        }
    }

    /// Per-axis discontinuity locations, if any.
    pub fn breakpoints(&self) -> Option<Vec<Vec<f64>>> {
        match &self.kind {
            MapKind::Indicator { knots, .. } => Some(knots.clone()),
            MapKind::Transformed { inner, .. } => inner.breakpoints(),
            _ => None,
        }
    }

    /// Evaluate h(x). `x` must lie inside the domain; clamping is an error.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.domain.check(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    /// Evaluate without the domain check, for inner loops over points that
    /// are known to come from the domain (samples, quadrature nodes).
    pub fn evaluate_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        if self.intercept && !matches!(self.kind, MapKind::Transformed { .. }) {
            out.push(1.0);
        }
        match &self.kind {
            MapKind::Monomial { exponents } => {
                let t = self.domain.unit_coords(x);
                let max_per_axis = per_axis_max(exponents, self.domain.dim());
                let tables: Vec<Vec<f64>> = t
                    .iter()
                    .zip(&max_per_axis)
                    .map(|(&ti, &m)| power_table(ti, m))
                    .collect();
                for exp in exponents {
                    out.push(tuple_product(&tables, exp));
                }
            }
            MapKind::Legendre { exponents } => {
                let t = self.domain.unit_coords(x);
                let max_per_axis = per_axis_max(exponents, self.domain.dim());
                let tables: Vec<Vec<f64>> = t
                    .iter()
                    .zip(&max_per_axis)
                    .map(|(&ti, &m)| legendre_column(ti, m as usize))
                    .collect();
                for exp in exponents {
                    out.push(tuple_product(&tables, exp));
                }
            }
            MapKind::Fourier { terms } => {
                let t = self.domain.unit_coords(x);
                for term in terms {
                    let mut v = 1.0;
                    let mut phase_idx = 0;
                    for (axis, &k) in term.freqs.iter().enumerate() {
                        if k == 0 {
                            continue;
                        }
                        let arg = 2.0 * std::f64::consts::PI * k as f64 * t[axis];
                        v *= match term.phases[phase_idx] {
                            Trig::Sin => arg.sin(),
                            Trig::Cos => arg.cos(),
                        };
                        phase_idx += 1;
                    }
                    out.push(v);
                }
            }
            MapKind::Indicator { knots, cells } => {
                let hit: Vec<usize> = x
                    .iter()
                    .zip(knots)
                    .map(|(&v, axis_knots)| axis_knots.partition_point(|&k| k <= v))
                    .collect();
                for cell in cells {
                    out.push(if *cell == hit { 1.0 } else { 0.0 });
                }
            }
            MapKind::Transformed { inner, weight } => {
                let base = inner.evaluate_unchecked(x);
                out = weight.matvec(&base);
            }
        }
        out
    }

    /// Compose with a linear map: x ↦ W h(x). The result spans the same
    /// function space when W is invertible.
    pub fn compose_linear(&self, weight: Mat) -> Result<FeatureMap> {
        if weight.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: weight.ncols(),
            });
        }
        Ok(FeatureMap {
            dim: weight.nrows(),
            domain: self.domain.clone(),
            intercept: false,
            kind: MapKind::Transformed {
                inner: Box::new(self.clone()),
                weight,
            },
        })
    }

    /// Rough per-point evaluation cost in flops, for the cost counters.
    pub fn eval_flops(&self) -> u64 {
        match &self.kind {
            MapKind::Monomial { .. } => 4 * self.dim as u64,
            MapKind::Legendre { .. } => 8 * self.dim as u64,
            MapKind::Fourier { .. } => 20 * self.dim as u64,
            MapKind::Indicator { .. } => 2 * self.dim as u64,
            MapKind::Transformed { inner, weight } => {
                inner.eval_flops() + 2 * (weight.nrows() * weight.ncols()) as u64
            }
        }
    }
}

fn per_axis_max(exponents: &[Vec<u32>], p: usize) -> Vec<u32> {
    let mut m = vec![0u32; p];
    for exp in exponents {
        for (mi, &e) in m.iter_mut().zip(exp) {
            *mi = (*mi).max(e);
        }
    }
    m
}

fn power_table(t: f64, max: u32) -> Vec<f64> {
    let mut v = Vec::with_capacity(max as usize + 1);
    v.push(1.0);
    for _ in 0..max {
        v.push(v.last().unwrap() * t);
    }
    v
}

fn tuple_product(tables: &[Vec<f64>], exp: &[u32]) -> f64 {
    tables
        .iter()
        .zip(exp)
        .map(|(table, &e)| table[e as usize])
        .product()
}

/// Rule mapping sample size n to a feature dimension d_n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DimensionSchedule {
    Constant { dim: usize },
    /// d_n = max(1, ⌊n^exponent⌋) with exponent in (0, 1).
    PowerLaw { exponent: f64 },
}

impl DimensionSchedule {
    pub fn new_constant(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dimension schedule must give d ≥ 1".into()));
        }
        Ok(DimensionSchedule::Constant { dim })
    }

    pub fn new_power_law(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::Invalid(format!(
                "power-law exponent must lie in (0, 1), got {exponent}"
            )));
        }
        Ok(DimensionSchedule::PowerLaw { exponent })
    }

    pub fn dimension_for(&self, n: usize) -> usize {
        match *self {
            DimensionSchedule::Constant { dim } => dim,
            DimensionSchedule::PowerLaw { exponent } => {
                // Nudge before flooring so that exact powers (64^{1/3} = 4)
                // do not round down through floating point.
                (((n as f64).powf(exponent) + 1e-9).floor() as usize).max(1)
            }
        }
    }
}

/// Build a basis of the given family with exactly `dim` components, by
/// searching the family parameter. Errors when no parameter hits `dim`
/// exactly (e.g. a Fourier basis can only produce odd dimensions with an
/// intercept).
pub fn basis_of_dimension(
    kind: &str,
    domain: &Domain,
    intercept: bool,
    dim: usize,
) -> Result<FeatureMap> {
    for param in 0..=dim {
        let spec = match kind {
            "monomial" => BasisSpec::Monomial { degree: param },
            "legendre" => BasisSpec::Legendre { degree: param },
            "fourier" => BasisSpec::Fourier {
                max_frequency: param,
            },
            "indicator" => {
                let p = domain.dim();
                if p != 1 {
                    return Err(Error::Invalid(
                        "scheduled indicator bases are univariate".into(),
                    ));
                }
                let (lo, hi) = domain.bounds()[0];
                let knots: Vec<f64> = (1..=param)
                    .map(|j| lo + (hi - lo) * j as f64 / (param + 1) as f64)
                    .collect();
                BasisSpec::Indicator { knots: vec![knots] }
            }
            other => return Err(Error::Invalid(format!("unknown basis kind '{other}'"))),
        };
        match make_basis(&spec, domain, intercept) {
            Ok(map) if map.dim() == dim => return Ok(map),
            Ok(map) if map.dim() > dim => break,
            _ => continue,
        }
    }
    Err(Error::DimensionNotAchievable { dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gauss_legendre;
    use approx::assert_abs_diff_eq;

    fn unit() -> Domain {
        Domain::unit_box(1)
    }

    #[test]
    fn monomial_degree_two_with_intercept() {
        let map = make_basis(&BasisSpec::Monomial { degree: 2 }, &unit(), true).unwrap();
        assert_eq!(map.dim(), 3);
        let h = map.evaluate(&[0.3]).unwrap();
        assert_abs_diff_eq!(h[0], 1.0);
        assert_abs_diff_eq!(h[1], 0.3);
        assert_abs_diff_eq!(h[2], 0.09, epsilon = 1e-15);
        // Powers of zero.
        assert_eq!(map.evaluate(&[0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn indicator_partitions_the_domain() {
        let map = make_basis(
            &BasisSpec::Indicator {
                knots: vec![vec![0.5]],
            },
            &unit(),
            false,
        )
        .unwrap();
        assert_eq!(map.dim(), 2);
        assert_eq!(map.evaluate(&[0.25]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(map.evaluate(&[0.75]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(map.evaluate(&[0.5]).unwrap(), vec![0.0, 1.0]);
        // Pointwise partition on a fine grid.
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0;
            let h = map.evaluate(&[x]).unwrap();
            let total: f64 = h.iter().sum();
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn legendre_gram_is_diagonal_under_uniform() {
        // Oracle: 64-point Gauss–Legendre quadrature of the Gram entries.
        let map = make_basis(&BasisSpec::Legendre { degree: 3 }, &unit(), true).unwrap();
        assert_eq!(map.dim(), 4);
        let (nodes, weights) = gauss_legendre(64);
        let d = map.dim();
        let mut gram = vec![vec![0.0; d]; d];
        for (&u, &w) in nodes.iter().zip(&weights) {
            let x = 0.5 * (u + 1.0);
            let h = map.evaluate(&[x]).unwrap();
            for i in 0..d {
                for j in 0..d {
                    gram[i][j] += 0.5 * w * h[i] * h[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    assert_abs_diff_eq!(gram[i][j], 1.0, epsilon = 1e-12);
                } else {
                    assert!(gram[i][j].abs() < 1e-12, "off-diagonal {i},{j}");
                }
            }
        }
    }

    #[test]
    fn fourier_at_zero() {
        let map = make_basis(&BasisSpec::Fourier { max_frequency: 1 }, &unit(), true).unwrap();
        assert_eq!(map.dim(), 3);
        let h = map.evaluate(&[0.0]).unwrap();
        assert_abs_diff_eq!(h[0], 1.0);
        assert_abs_diff_eq!(h[1], 0.0); // sin(0)
        assert_abs_diff_eq!(h[2], 1.0); // cos(0)
    }

    #[test]
    fn legendre_recurrence_matches_expanded_polynomial() {
        // Independent oracle: explicit coefficients of the shifted,
        // orthonormalized Legendre polynomials on [0, 1].
        // P̃_0 = 1
        // P̃_1 = √3 (2x − 1)
        // P̃_2 = √5 (6x² − 6x + 1)
        let map = make_basis(&BasisSpec::Legendre { degree: 2 }, &unit(), true).unwrap();
        let x = 0.5f64;
        let h = map.evaluate(&[x]).unwrap();
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h[1], 3f64.sqrt() * (2.0 * x - 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(
            h[2],
            5f64.sqrt() * (6.0 * x * x - 6.0 * x + 1.0),
            epsilon = 1e-14
        );
        let x = 0.3f64;
        let h = map.evaluate(&[x]).unwrap();
        assert_abs_diff_eq!(h[1], 3f64.sqrt() * (2.0 * x - 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(
            h[2],
            5f64.sqrt() * (6.0 * x * x - 6.0 * x + 1.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn intercept_adds_one_leading_component() {
        for spec in [
            BasisSpec::Monomial { degree: 3 },
            BasisSpec::Legendre { degree: 3 },
            BasisSpec::Fourier { max_frequency: 2 },
        ] {
            let with = make_basis(&spec, &unit(), true).unwrap();
            let without = make_basis(&spec, &unit(), false).unwrap();
            assert_eq!(with.dim(), without.dim() + 1);
            let x = [0.37];
            let a = with.evaluate(&x).unwrap();
            let b = without.evaluate(&x).unwrap();
            assert_eq!(a[0], 1.0);
            assert_eq!(&a[1..], &b[..]);
        }
    }

    #[test]
    fn rejects_out_of_domain_points() {
        let map = make_basis(&BasisSpec::Monomial { degree: 1 }, &unit(), true).unwrap();
        assert!(matches!(
            map.evaluate(&[1.5]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(matches!(
            map.evaluate(&[-0.01]),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Domain::new(vec![(1.0, 1.0)]).is_err());
        assert!(Domain::new(vec![(2.0, 1.0)]).is_err());
        let dup = BasisSpec::Indicator {
            knots: vec![vec![0.5, 0.5]],
        };
        assert!(matches!(
            make_basis(&dup, &unit(), false),
            Err(Error::BadKnots { .. })
        ));
        let outside = BasisSpec::Indicator {
            knots: vec![vec![1.5]],
        };
        assert!(matches!(
            make_basis(&outside, &unit(), false),
            Err(Error::BadKnots { .. })
        ));
        let huge = BasisSpec::Monomial {
            degree: MAX_DIMENSION + 5,
        };
        assert!(matches!(
            make_basis(&huge, &unit(), true),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn multivariate_total_degree_count() {
        let domain = Domain::unit_box(2);
        let map = make_basis(&BasisSpec::Monomial { degree: 2 }, &domain, true).unwrap();
        // 1, x, y, x², xy, y² → 6 components.
        assert_eq!(map.dim(), 6);
        let h = map.evaluate(&[0.5, 0.25]).unwrap();
        assert_eq!(h.len(), 6);
        assert_abs_diff_eq!(h[1] * h[2], 0.125, epsilon = 1e-15);
    }

    #[test]
    fn multivariate_indicator_partition() {
        let domain = Domain::unit_box(2);
        let map = make_basis(
            &BasisSpec::Indicator {
                knots: vec![vec![0.5], vec![0.3, 0.6]],
            },
            &domain,
            false,
        )
        .unwrap();
        assert_eq!(map.dim(), 6);
        for i in 0..100 {
            for j in 0..100 {
                let x = [i as f64 / 99.0, j as f64 / 99.0];
                let h = map.evaluate(&x).unwrap();
                assert_eq!(h.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn schedule_dimensions() {
        let s = DimensionSchedule::new_power_law(1.0 / 3.0).unwrap();
        assert_eq!(s.dimension_for(8), 2);
        assert_eq!(s.dimension_for(27), 3);
        assert_eq!(s.dimension_for(64), 4);
        assert_eq!(s.dimension_for(1000), 10);
        assert_eq!(s.dimension_for(999), 9);
        let mut prev = 0;
        for n in 1..5000 {
            let d = s.dimension_for(n);
            assert!(d >= 1 && d >= prev);
            prev = d;
        }
        assert!(DimensionSchedule::new_power_law(1.0).is_err());
        assert!(DimensionSchedule::new_constant(0).is_err());
    }

    #[test]
    fn basis_of_dimension_hits_target() {
        let domain = unit();
        for d in 1..=9 {
            let map = basis_of_dimension("legendre", &domain, true, d).unwrap();
            assert_eq!(map.dim(), d);
        }
        let map = basis_of_dimension("indicator", &domain, false, 4).unwrap();
        assert_eq!(map.dim(), 4);
        // Fourier with intercept has odd dimension only.
        assert!(basis_of_dimension("fourier", &domain, true, 4).is_err());
        let map = basis_of_dimension("fourier", &domain, true, 5).unwrap();
        assert_eq!(map.dim(), 5);
    }
}
