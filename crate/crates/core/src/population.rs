//! Input distributions with computable expectations.
//!
//! A `PopulationModel` is a distribution on a box together with a moment
//! oracle. Smooth and piecewise-smooth integrands go through composite
//! tensor Gauss–Legendre quadrature (the box is split at every declared
//! discontinuity, so indicator-style integrands are integrated exactly piece
//! by piece). Integrands that declare no discontinuity structure and are not
//! smooth fall back to a seeded large-N Monte Carlo oracle whose sample
//! count, seed and standard error are reported alongside the value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{Domain, FeatureMap};
use crate::linalg::{gauss_legendre, Mat};
use crate::linear_core::{GramMatrix, Provenance};

/// Φ(z), the standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(p): Acklam's rational approximation polished with one Halley step.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    let mut x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement against the high-accuracy erfc-based CDF.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= u / (1.0 + x * u / 2.0);
    x
}

/// Distribution family of a population model.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// Uniform on the domain box.
    UniformBox,
    /// Axis-independent normal truncated to the domain box.
    TruncatedGaussian { mean: Vec<f64>, sd: Vec<f64> },
}

/// Oracle configuration: quadrature order per axis per cell, and the Monte
/// Carlo fallback's sample count and seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleConfig {
    pub quad_order: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            quad_order: 64,
            mc_samples: 10_000_000,
            mc_seed: 7919,
        }
    }
}

/// What the caller knows about an integrand's regularity.
#[derive(Clone, Debug, Default)]
pub struct IntegrandHints {
    pub smooth: bool,
    /// Per-axis discontinuity locations, for the composite rule.
    pub breakpoints: Option<Vec<Vec<f64>>>,
}

impl IntegrandHints {
    pub fn smooth() -> Self {
        IntegrandHints {
            smooth: true,
            breakpoints: None,
        }
    }

    pub fn union(&self, other: &IntegrandHints, p: usize) -> IntegrandHints {
        let breakpoints = match (&self.breakpoints, &other.breakpoints) {
            (None, None) => None,
            (a, b) => {
                let mut merged = vec![Vec::new(); p];
                for src in [a, b].into_iter().flatten() {
                    for (axis, pts) in src.iter().enumerate() {
                        merged[axis].extend_from_slice(pts);
                    }
                }
                for axis in &mut merged {
                    axis.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    axis.dedup();
                }
                Some(merged)
            }
        };
        IntegrandHints {
            smooth: self.smooth && other.smooth,
            breakpoints,
        }
    }

    /// Quadrature applies when the integrand is smooth between declared
    /// breakpoints (smooth everywhere, or piecewise with known cuts).
    fn quadrature_applicable(&self) -> bool {
        self.smooth || self.breakpoints.is_some()
    }
}

/// How a population expectation was computed, and how accurate it is.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum OracleAccuracy {
    Quadrature { order: usize, cells: usize },
    MonteCarlo { samples: usize, std_error: f64, seed: u64 },
}

/// A population expectation P(g) with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub accuracy: OracleAccuracy,
}

impl OracleAccuracy {
    /// Conservative absolute error bound: ~machine precision for the
    /// quadrature route, three standard errors for Monte Carlo.
    pub fn error_bound(&self) -> f64 {
        match self {
            OracleAccuracy::Quadrature { .. } => 1e-12,
            OracleAccuracy::MonteCarlo { std_error, .. } => 3.0 * std_error,
        }
    }
}

impl MomentEstimate {
    pub fn error_bound(&self) -> f64 {
        self.accuracy.error_bound()
    }
}

/// A sampleable input distribution with a moment oracle.
#[derive(Clone, Debug)]
pub struct PopulationModel {
    domain: Domain,
    dist: Distribution,
    oracle: OracleConfig,
}

impl PopulationModel {
    pub fn uniform(domain: Domain) -> Self {
        PopulationModel {
            domain,
            dist: Distribution::UniformBox,
            oracle: OracleConfig::default(),
        }
    }

    pub fn truncated_gaussian(domain: Domain, mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        let p = domain.dim();
        if mean.len() != p || sd.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: mean.len().max(sd.len()),
            });
        }
        if sd.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Invalid("gaussian sd must be positive".into()));
        }
        for (axis, (&(lo, hi), (&m, &s))) in domain
            .bounds()
            .iter()
            .zip(mean.iter().zip(&sd))
            .enumerate()
        {
            let z = normal_cdf((hi - m) / s) - normal_cdf((lo - m) / s);
            if z < 1e-12 {
                return Err(Error::Invalid(format!(
                    "truncated gaussian has negligible mass on axis {axis}"
                )));
            }
        }
        Ok(PopulationModel {
            domain,
            dist: Distribution::TruncatedGaussian { mean, sd },
            oracle: OracleConfig::default(),
        })
    }

    pub fn with_oracle(mut self, oracle: OracleConfig) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn oracle_config(&self) -> &OracleConfig {
        &self.oracle
    }

    /// Draw n points with a fresh generator seeded by `seed`.
    pub fn sample_n(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// Draw one point.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.dist {
            Distribution::UniformBox => self
                .domain
                .bounds()
                .iter()
                .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect(),
            Distribution::TruncatedGaussian { mean, sd } => self
                .domain
                .bounds()
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(&(lo, hi), (&m, &s))| {
                    let a = normal_cdf((lo - m) / s);
                    let b = normal_cdf((hi - m) / s);
                    let u = rng.random::<f64>();
                    let p = (a + u * (b - a)).clamp(1e-16, 1.0 - 1e-16);
                    (m + s * normal_quantile(p)).clamp(lo, hi)
                })
                .collect(),
        }
    }

    /// Density of the model at x (normalized to the box).
    fn density(&self, x: &[f64]) -> f64 {
        match &self.dist {
            Distribution::UniformBox => self
                .domain
                .bounds()
                .iter()
                .map(|&(lo, hi)| 1.0 / (hi - lo))
                .product(),
            Distribution::TruncatedGaussian { mean, sd } => self
                .domain
                .bounds()
                .iter()
                .zip(mean.iter().zip(sd))
                .zip(x)
                .map(|((&(lo, hi), (&m, &s)), &xi)| {
                    let z = normal_cdf((hi - m) / s) - normal_cdf((lo - m) / s);
                    let u = (xi - m) / s;
                    (-(u * u) / 2.0).exp() / (s * z * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product(),
        }
    }

    /// Composite quadrature grid honoring the declared breakpoints. Weights
    /// include the density, so Σ w_i g(x_i) approximates P(g).
    fn quadrature_grid(&self, hints: &IntegrandHints) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let p = self.domain.dim();
        let order = self.oracle.quad_order;
        let (gl_nodes, gl_weights) = gauss_legendre(order);
        let mut axis_nodes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(p);
        for (axis, &(lo, hi)) in self.domain.bounds().iter().enumerate() {
            let mut edges = vec![lo];
            if let Some(bp) = &hints.breakpoints {
                for &t in &bp[axis] {
                    if t > lo && t < hi {
                        edges.push(t);
                    }
                }
            }
            edges.push(hi);
            edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
            edges.dedup();
            let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
            for cell in edges.windows(2) {
                let (a, b) = (cell[0], cell[1]);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (&u, &w) in gl_nodes.iter().zip(&gl_weights) {
                    nodes.push((mid + half * u, w * half));
                }
            }
            axis_nodes.push(nodes);
        }
        let total: usize = axis_nodes.iter().map(Vec::len).product();
        if total > 20_000_000 {
            return Err(Error::Invalid(format!(
                "quadrature grid of {total} points is too large; reduce order or breakpoints"
            )));
        }
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; p];
        loop {
            let mut x = Vec::with_capacity(p);
            let mut w = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                let (xv, wv) = axis_nodes[axis][i];
                x.push(xv);
                w *= wv;
            }
            w *= self.density(&x);
            points.push(x);
            weights.push(w);
            // Advance the odometer.
            let mut axis = 0;
            loop {
                if axis == p {
                    return Ok((points, weights));
                }
                idx[axis] += 1;
                if idx[axis] < axis_nodes[axis].len() {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }

    fn quadrature_cells(&self, hints: &IntegrandHints) -> usize {
        let mut cells = 1usize;
        if let Some(bp) = &hints.breakpoints {
            for (axis, pts) in bp.iter().enumerate() {
                let (lo, hi) = self.domain.bounds()[axis];
                let inside = pts.iter().filter(|&&t| t > lo && t < hi).count();
                cells *= inside + 1;
            }
        }
        cells
    }

    /// P(g) for a scalar integrand.
    pub fn integrate<F>(&self, g: F, hints: &IntegrandHints) -> Result<MomentEstimate>
    where
        F: Fn(&[f64]) -> f64,
    {
        if hints.quadrature_applicable() {
            let (points, weights) = self.quadrature_grid(hints)?;
            let value = points
                .iter()
                .zip(&weights)
                .map(|(x, &w)| w * g(x))
                .sum();
            Ok(MomentEstimate {
                value,
                accuracy: OracleAccuracy::Quadrature {
                    order: self.oracle.quad_order,
                    cells: self.quadrature_cells(hints),
                },
            })
        } else {
            self.integrate_mc(g)
        }
    }

    /// Monte Carlo route, always available.
    pub fn integrate_mc<F>(&self, g: F) -> Result<MomentEstimate>
    where
        F: Fn(&[f64]) -> f64,
    {
        let n = self.oracle.mc_samples;
        let mut rng = ChaCha8Rng::seed_from_u64(self.oracle.mc_seed);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = self.sample(&mut rng);
            let v = g(&x);
            if !v.is_finite() {
                return Err(Error::NonFiniteResponse {
                    label: "monte-carlo oracle integrand".into(),
                });
            }
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        Ok(MomentEstimate {
            value: mean,
            accuracy: OracleAccuracy::MonteCarlo {
                samples: n,
                std_error: (var / n as f64).sqrt(),
                seed: self.oracle.mc_seed,
            },
        })
    }

    /// Population Gram P(h hᵀ) of a feature map, via one pass over the
    /// composite quadrature grid.
    pub fn population_gram(&self, map: &FeatureMap) -> Result<(GramMatrix, OracleAccuracy)> {
        let hints = IntegrandHints {
            smooth: map.is_smooth(),
            breakpoints: map.breakpoints(),
        };
        if !hints.quadrature_applicable() {
            return Err(Error::Invalid(
                "population Gram needs a quadrature-compatible feature map".into(),
            ));
        }
        let (points, weights) = self.quadrature_grid(&hints)?;
        let d = map.dim();
        let mut g = Mat::zeros(d, d);
        for (x, &w) in points.iter().zip(&weights) {
            let h = map.evaluate_unchecked(x);
            for j in 0..d {
                let hj = w * h[j];
                for k in j..d {
                    g[(j, k)] += hj * h[k];
                }
            }
        }
        for j in 0..d {
            for k in (j + 1)..d {
                g[(k, j)] = g[(j, k)];
            }
        }
        let gram = GramMatrix::new(g, Provenance::Population)?;
        Ok((
            gram,
            OracleAccuracy::Quadrature {
                order: self.oracle.quad_order,
                cells: self.quadrature_cells(&hints),
            },
        ))
    }

    /// Cross moment vector P(h f).
    pub fn cross_moment<F>(
        &self,
        map: &FeatureMap,
        f: F,
        f_hints: &IntegrandHints,
    ) -> Result<(Vec<f64>, OracleAccuracy)>
    where
        F: Fn(&[f64]) -> f64,
    {
        let map_hints = IntegrandHints {
            smooth: map.is_smooth(),
            breakpoints: map.breakpoints(),
        };
        let hints = map_hints.union(f_hints, self.domain.dim());
        let d = map.dim();
        if hints.quadrature_applicable() {
            let (points, weights) = self.quadrature_grid(&hints)?;
            let mut out = vec![0.0; d];
            for (x, &w) in points.iter().zip(&weights) {
                let h = map.evaluate_unchecked(x);
                let fv = w * f(x);
                for (o, hv) in out.iter_mut().zip(&h) {
                    *o += fv * hv;
                }
            }
            Ok((
                out,
                OracleAccuracy::Quadrature {
                    order: self.oracle.quad_order,
                    cells: self.quadrature_cells(&hints),
                },
            ))
        } else {
            let n = self.oracle.mc_samples;
            let mut rng = ChaCha8Rng::seed_from_u64(self.oracle.mc_seed);
            let mut sum = vec![0.0; d];
            let mut sum_sq = vec![0.0; d];
            for _ in 0..n {
                let x = self.sample(&mut rng);
                let h = map.evaluate_unchecked(&x);
                let fv = f(&x);
                for ((s, ss), hv) in sum.iter_mut().zip(&mut sum_sq).zip(&h) {
                    let v = fv * hv;
                    *s += v;
                    *ss += v * v;
                }
            }
            let out: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
            let worst_se = sum_sq
                .iter()
                .zip(&out)
                .map(|(&ss, &m)| ((ss / n as f64 - m * m).max(0.0) / n as f64).sqrt())
                .fold(0.0f64, f64::max);
            Ok((
                out,
                OracleAccuracy::MonteCarlo {
                    samples: n,
                    std_error: worst_se,
                    seed: self.oracle.mc_seed,
                },
            ))
        }
    }
}
