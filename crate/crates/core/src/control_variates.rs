//! Monte Carlo integration with control variates.
//!
//! Controls are centered feature-map components: g = h − P(h), so P(g) = 0
//! with the centering constants taken from the population oracle (exactly
//! zero for Legendre bases under the uniform box, where orthogonality to the
//! constant does the centering analytically). The control-variate estimate
//! of P(f) is the intercept of the least-squares regression of f on (1, g);
//! its weights depend on the design and the controls but not on the
//! integrand, so one weight vector serves any number of integrands.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{basis_of_dimension, DimensionSchedule, FeatureMap};
use crate::linalg::{dot, CostBreakdown, Mat};
use crate::linear_core::{empirical_gram, empirical_gram_flops, factorize, CholeskyFactor, FactorPolicy, GramMatrix, Provenance};
use crate::population::{IntegrandHints, OracleAccuracy, PopulationModel};
use crate::response::{Response, ResponseFamily};
use crate::risk::{mean_and_stderr, replicate_seed, upper_half, validate_grid, RateCurve, RatePoint};

/// A set of centered control variates g = (g_1, …, g_K) with P(g) = 0.
#[derive(Clone, Debug)]
pub struct ControlVariateSet {
    base: Option<FeatureMap>,
    centers: Vec<f64>,
    center_accuracy: Option<OracleAccuracy>,
}

impl ControlVariateSet {
    /// Center the components of a feature map under the model. The map must
    /// not carry an intercept (the estimator adds its own).
    pub fn centered(map: FeatureMap, model: &PopulationModel) -> Result<Self> {
        if map.has_intercept() {
            return Err(Error::Invalid(
                "control variates must not include an intercept component".into(),
            ));
        }
        let (centers, accuracy) = model.cross_moment(&map, |_: &[f64]| 1.0, &IntegrandHints::smooth())?;
        Ok(ControlVariateSet {
            base: Some(map),
            centers,
            center_accuracy: Some(accuracy),
        })
    }

    /// No controls at all; the estimator degenerates to the sample mean.
    pub fn none() -> Self {
        ControlVariateSet {
            base: None,
            centers: Vec::new(),
            center_accuracy: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center_accuracy(&self) -> Option<&OracleAccuracy> {
        self.center_accuracy.as_ref()
    }

    pub fn base_map(&self) -> Option<&FeatureMap> {
        self.base.as_ref()
    }

    /// g(x) = h(x) − centers.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match &self.base {
            None => Vec::new(),
            Some(map) => map
                .evaluate_unchecked(x)
                .iter()
                .zip(&self.centers)
                .map(|(h, c)| h - c)
                .collect(),
        }
    }

    pub fn hints(&self) -> IntegrandHints {
        match &self.base {
            None => IntegrandHints::smooth(),
            Some(map) => IntegrandHints {
                smooth: map.is_smooth(),
                breakpoints: map.breakpoints(),
            },
        }
    }

    /// Verify |P(g_k)| ≤ tol under the model's oracle.
    pub fn verify_centering(&self, model: &PopulationModel, tol: f64) -> Result<f64> {
        let Some(map) = &self.base else { return Ok(0.0) };
        let (means, _) = model.cross_moment(map, |_: &[f64]| 1.0, &IntegrandHints::smooth())?;
        let worst = means
            .iter()
            .zip(&self.centers)
            .map(|(m, c)| (m - c).abs())
            .fold(0.0f64, f64::max);
        if worst > tol {
            return Err(Error::OracleAccuracy {
                quantity: "control centering".into(),
                achieved: worst,
                needed: tol,
            });
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EstimatorKind {
    Vanilla,
    ControlVariate,
    Oracle,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Vanilla => "vanilla",
            EstimatorKind::ControlVariate => "cv",
            EstimatorKind::Oracle => "oracle",
        }
    }
}

/// One integral estimate with its weight representation.
#[derive(Clone, Debug)]
pub struct CvEstimate {
    pub value: f64,
    /// Control coefficients β̂ (empty for the vanilla estimator).
    pub beta: Vec<f64>,
    /// Weights with Σ w_i = 1; the estimate is Σ w_i f(X_i).
    pub weights: Arc<Vec<f64>>,
    pub kind: EstimatorKind,
}

/// Sample mean P_n(f) with uniform weights.
pub fn vanilla_mc(f: &Response, points: &[Vec<f64>]) -> Result<CvEstimate> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Invalid("vanilla estimator needs n ≥ 1".into()));
    }
    let mut sum = 0.0;
    for x in points {
        let v = f.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteResponse {
                label: f.label().to_string(),
            });
        }
        sum += v;
    }
    Ok(CvEstimate {
        value: sum / n as f64,
        beta: Vec::new(),
        weights: Arc::new(vec![1.0 / n as f64; n]),
        kind: EstimatorKind::Vanilla,
    })
}

/// The oracle estimator P_n[f − gᵀ β*] built from the population-optimal
/// control coefficient. With β* = 0 it reduces to the sample mean.
pub fn oracle_estimate(
    f: &Response,
    points: &[Vec<f64>],
    controls: &ControlVariateSet,
    beta_star: &[f64],
) -> Result<CvEstimate> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Invalid("oracle estimator needs n ≥ 1".into()));
    }
    if beta_star.len() != controls.dim() {
        return Err(Error::DimensionMismatch {
            expected: controls.dim(),
            got: beta_star.len(),
        });
    }
    let mut sum = 0.0;
    for x in points {
        let v = f.eval(x) - dot(&controls.eval(x), beta_star);
        if !v.is_finite() {
            return Err(Error::NonFiniteResponse {
                label: f.label().to_string(),
            });
        }
        sum += v;
    }
    Ok(CvEstimate {
        value: sum / n as f64,
        beta: beta_star.to_vec(),
        weights: Arc::new(vec![1.0 / n as f64; n]),
        kind: EstimatorKind::Oracle,
    })
}

/// The regression machinery shared by every integrand on one design: the
/// augmented Gram of (1, g) is factored once and the weight vector is built
/// once; estimating an integral is then one back-substitution.
#[derive(Clone, Debug)]
pub struct CvEstimator {
    points: Arc<Vec<Vec<f64>>>,
    controls: ControlVariateSet,
    augmented: Mat,
    factor: CholeskyFactor,
    weights: Arc<Vec<f64>>,
    cost: CostBreakdown,
}

impl CvEstimator {
    pub fn new(points: &[Vec<f64>], controls: &ControlVariateSet) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Invalid("cv estimator needs n ≥ 1".into()));
        }
        let k = controls.dim();
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|x| {
                let mut row = Vec::with_capacity(k + 1);
                row.push(1.0);
                row.extend(controls.eval(x));
                row
            })
            .collect();
        let augmented = Mat::from_rows(&rows);
        let gram = empirical_gram(&augmented);
        // Collinear controls land in pseudo-inverse mode; flagged, not fatal.
        let factor = factorize(&gram, &FactorPolicy::default())?;
        let z = factor.solve(&unit_vector(k + 1));
        let weights: Vec<f64> = (0..n)
            .map(|i| dot(&z, augmented.row(i)) / n as f64)
            .collect();
        let cost = CostBreakdown {
            factorizations: 1,
            gram_flops: empirical_gram_flops(n, k + 1),
            factor_flops: factor.factor_flops(),
            solve_flops: factor.solve_flops() + (n * (k + 1)) as u64,
            eval_flops: (n * (k + 1)) as u64 * 4,
        };
        Ok(CvEstimator {
            points: Arc::new(points.to_vec()),
            controls: controls.clone(),
            augmented,
            factor,
            weights: Arc::new(weights),
            cost,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn pseudo_inverse_used(&self) -> bool {
        self.factor.pseudo_inverse_used()
    }

    /// Weights shared by every integrand; Σ w_i = 1.
    pub fn weights(&self) -> &Arc<Vec<f64>> {
        &self.weights
    }

    pub fn cost(&self) -> &CostBreakdown {
        &self.cost
    }

    pub fn controls(&self) -> &ControlVariateSet {
        &self.controls
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Regression form: (α̂, β̂) from one back-substitution; α̂ is the
    /// estimate of P(f).
    pub fn estimate(&self, f: &Response) -> Result<CvEstimate> {
        let n = self.n();
        let k = self.controls.dim();
        let mut rhs = vec![0.0; k + 1];
        for i in 0..n {
            let v = f.eval(&self.points[i]);
            if !v.is_finite() {
                return Err(Error::NonFiniteResponse {
                    label: f.label().to_string(),
                });
            }
            for (r, u) in rhs.iter_mut().zip(self.augmented.row(i)) {
                *r += v * u;
            }
        }
        for r in &mut rhs {
            *r /= n as f64;
        }
        let coef = self.factor.solve(&rhs);
        Ok(CvEstimate {
            value: coef[0],
            beta: coef[1..].to_vec(),
            weights: Arc::clone(&self.weights),
            kind: EstimatorKind::ControlVariate,
        })
    }

    /// Weight form Σ w_i f(X_i); equals the regression form.
    pub fn estimate_via_weights(&self, f: &Response) -> Result<f64> {
        let mut sum = 0.0;
        for (x, &w) in self.points.iter().zip(self.weights.iter()) {
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteResponse {
                    label: f.label().to_string(),
                });
            }
            sum += w * v;
        }
        Ok(sum)
    }
}

fn unit_vector(len: usize) -> Vec<f64> {
    let mut e = vec![0.0; len];
    e[0] = 1.0;
    e
}

/// Population-side regression of integrands on (1, g): P(g gᵀ) is assembled
/// from the control map's population Gram and the centering constants, and
/// factored once. `coefficients` returns (α = P(f), β) per integrand.
#[derive(Clone, Debug)]
pub struct CvPopulation {
    model: PopulationModel,
    controls: ControlVariateSet,
    factor: Option<CholeskyFactor>,
    accuracy: OracleAccuracy,
}

impl CvPopulation {
    pub fn new(model: &PopulationModel, controls: &ControlVariateSet) -> Result<Self> {
        let (factor, accuracy) = match controls.base_map() {
            None => (
                None,
                OracleAccuracy::Quadrature {
                    order: model.oracle_config().quad_order,
                    cells: 1,
                },
            ),
            Some(map) => {
                let (gram_hh, accuracy) = model.population_gram(map)?;
                // P(g gᵀ) = P(h hᵀ) − c cᵀ.
                let k = map.dim();
                let mut m = gram_hh.mat().clone();
                for i in 0..k {
                    for j in 0..k {
                        m[(i, j)] -= controls.centers()[i] * controls.centers()[j];
                    }
                }
                let gram_gg = GramMatrix::new(m, Provenance::Population)?;
                let factor = factorize(&gram_gg, &FactorPolicy::default())?;
                if factor.pseudo_inverse_used() {
                    return Err(Error::PseudoInverseMode);
                }
                (Some(factor), accuracy)
            }
        };
        Ok(CvPopulation {
            model: model.clone(),
            controls: controls.clone(),
            factor,
            accuracy,
        })
    }

    pub fn accuracy(&self) -> &OracleAccuracy {
        &self.accuracy
    }

    /// Truth P(f) for an integrand.
    pub fn truth(&self, f: &Response) -> Result<crate::population::MomentEstimate> {
        self.model.integrate(|x: &[f64]| f.eval(x), f.hints())
    }

    /// Population-optimal (α, β) for the regression of f on (1, g):
    /// α = P(f) and β = P(g gᵀ)⁻¹ P(g f).
    pub fn coefficients(&self, f: &Response) -> Result<(f64, Vec<f64>)> {
        let alpha = self.truth(f)?.value;
        let Some(map) = self.controls.base_map() else {
            return Ok((alpha, Vec::new()));
        };
        let (cross_hf, _) = self
            .model
            .cross_moment(map, |x: &[f64]| f.eval(x), f.hints())?;
        // P(g f) = P(h f) − c P(f).
        let rhs: Vec<f64> = cross_hf
            .iter()
            .zip(self.controls.centers())
            .map(|(hf, c)| hf - c * alpha)
            .collect();
        let beta = self.factor.as_ref().unwrap().solve(&rhs);
        Ok((alpha, beta))
    }
}

/// Which controls to use at each grid point of a rate check.
#[derive(Clone, Debug)]
pub enum ControlSource {
    Fixed(ControlVariateSet),
    /// Centered basis of dimension `schedule(n)` within the named family.
    Scheduled {
        kind: String,
        schedule: DimensionSchedule,
    },
}

impl ControlSource {
    pub fn controls_for(&self, model: &PopulationModel, n: usize) -> Result<ControlVariateSet> {
        match self {
            ControlSource::Fixed(c) => Ok(c.clone()),
            ControlSource::Scheduled { kind, schedule } => {
                let map =
                    basis_of_dimension(kind, model.domain(), false, schedule.dimension_for(n))?;
                ControlVariateSet::centered(map, model)
            }
        }
    }
}

/// Sup-error rate curves for the three estimators on one family.
#[derive(Clone, Debug, Serialize)]
pub struct CvRateResult {
    pub vanilla: RateCurve,
    pub cv: RateCurve,
    pub oracle: RateCurve,
    /// Largest oracle error bound among the truths P(f).
    pub truth_error_bound: f64,
    /// Flops summed over every estimator construction in the sweep.
    pub total_cost: CostBreakdown,
}

/// Replicated sup_f |α̂_f − P(f)| decay for the vanilla, control-variate and
/// oracle estimators on a shared design. Truths and oracle coefficients come
/// from the population oracle, computed once per family member. Aborts when
/// the truth accuracy is insufficient relative to the observed errors.
pub fn uniform_cv_rate_check(
    model: &PopulationModel,
    source: &ControlSource,
    family: &ResponseFamily,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<CvRateResult> {
    validate_grid(n_grid, replications)?;
    let mut van_stats = Vec::new();
    let mut cv_stats = Vec::new();
    let mut or_stats = Vec::new();
    let mut truth_bound = 0.0f64;
    let mut total_cost = CostBreakdown::default();
    // Truths and oracle coefficients, cached per control dimension.
    let mut cached: Option<(usize, ControlVariateSet, Vec<f64>, Vec<Vec<f64>>)> = None;

    for (i, &n) in n_grid.iter().enumerate() {
        let controls = source.controls_for(model, n)?;
        let needs_rebuild = cached
            .as_ref()
            .map(|(k, _, _, _)| *k != controls.dim())
            .unwrap_or(true);
        if needs_rebuild {
            let pop = CvPopulation::new(model, &controls)?;
            let mut truths = Vec::with_capacity(family.len());
            let mut betas = Vec::with_capacity(family.len());
            for f in family.members() {
                let truth = pop.truth(f)?;
                truth_bound = truth_bound.max(truth.error_bound());
                truths.push(truth.value);
                let (_, beta) = pop.coefficients(f)?;
                betas.push(beta);
            }
            cached = Some((controls.dim(), controls.clone(), truths, betas));
        }
        let (_, controls, truths, betas) = cached.as_ref().unwrap();

        let sups: Vec<(f64, f64, f64, CostBreakdown)> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let points = model.sample_n(n, replicate_seed(seed, i, replications, r));
                let estimator = CvEstimator::new(&points, controls)?;
                let mut sup_v = 0.0f64;
                let mut sup_c = 0.0f64;
                let mut sup_o = 0.0f64;
                for (idx, f) in family.members().iter().enumerate() {
                    let truth = truths[idx];
                    sup_v = sup_v.max((vanilla_mc(f, &points)?.value - truth).abs());
                    sup_c = sup_c.max((estimator.estimate(f)?.value - truth).abs());
                    sup_o = sup_o
                        .max((oracle_estimate(f, &points, controls, &betas[idx])?.value - truth).abs());
                }
                Ok((sup_v, sup_c, sup_o, *estimator.cost()))
            })
            .collect::<Result<Vec<_>>>()?;
        for (_, _, _, cost) in &sups {
            total_cost.merge(cost);
        }

        let dim = controls.dim() + 1;
        for (stats, pick) in [
            (&mut van_stats, 0usize),
            (&mut cv_stats, 1),
            (&mut or_stats, 2),
        ] {
            let values: Vec<f64> = sups
                .iter()
                .map(|t| match pick {
                    0 => t.0,
                    1 => t.1,
                    _ => t.2,
                })
                .collect();
            let (mean, se) = mean_and_stderr(&values);
            stats.push(RatePoint {
                n,
                dim,
                mean_error: mean,
                std_error: se,
            });
        }
    }

    // Truth accuracy must be negligible against the observed errors, except
    // in the exact-fit zone where both sit at rounding level.
    for stats in [&van_stats, &cv_stats, &or_stats] {
        for p in upper_half(stats) {
            if p.mean_error > 1e-10 && truth_bound > 0.25 * p.mean_error {
                return Err(Error::OracleAccuracy {
                    quantity: format!("P(f) truths at n={}", p.n),
                    achieved: truth_bound,
                    needed: 0.25 * p.mean_error,
                });
            }
        }
    }

    Ok(CvRateResult {
        vanilla: RateCurve::from_stats(van_stats, replications)?,
        cv: RateCurve::from_stats(cv_stats, replications)?,
        oracle: RateCurve::from_stats(or_stats, replications)?,
        truth_error_bound: truth_bound,
        total_cost,
    })
}
