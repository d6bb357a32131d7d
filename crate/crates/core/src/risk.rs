//! Excess prediction risk, worst-case suprema over response families, and
//! the replication harness for empirical convergence-rate checks.
//!
//! Replications are embarrassingly parallel: replicate r of the grid point
//! with index i uses seed `master + i * R + r`, so no stream is shared
//! across grid points, and the reduction over replicates is a fixed-order
//! sum, which keeps outputs bit-identical regardless of scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{basis_of_dimension, DimensionSchedule, FeatureMap};
use crate::grid::GridPolicy;
use crate::linalg::CostBreakdown;
use crate::linear_core::{leverage, CholeskyFactor};
use crate::population::{MomentEstimate, OracleAccuracy, PopulationModel};
use crate::response::{Response, ResponseFamily};
use crate::surrogate::{draw_design, fit_many, residual_value, PopulationBeta, PopulationContext};

/// Excess risk (b − β)ᵀ G (b − β), evaluated through the factor of the
/// population Gram matrix. Nonnegative by construction.
pub fn excess_risk(
    beta_hat: &[f64],
    beta_star: &[f64],
    population_factor: &CholeskyFactor,
) -> Result<f64> {
    if beta_hat.len() != beta_star.len() || beta_hat.len() != population_factor.dim() {
        return Err(Error::DimensionMismatch {
            expected: population_factor.dim(),
            got: beta_hat.len(),
        });
    }
    let diff: Vec<f64> = beta_hat
        .iter()
        .zip(beta_star)
        .map(|(a, b)| a - b)
        .collect();
    Ok(population_factor.quadratic_form(&diff))
}

/// Per-response and worst-case excess risks for one fitted design.
#[derive(Clone, Debug, Serialize)]
pub struct RiskReport {
    /// Excess risk per family member; None where the fit was rejected.
    pub excess: Vec<Option<f64>>,
    /// Deterministic modelling error L_f(β_f) per member.
    pub modelling_errors: Vec<f64>,
    pub worst_case: f64,
    /// Index attaining the worst case.
    pub worst_index: usize,
    /// Members excluded because their fit failed.
    pub excluded: Vec<(usize, String)>,
}

/// Fit the whole family on the design and take the supremum of the excess
/// risks against the precomputed population betas.
pub fn worst_case_risk(
    design: &crate::surrogate::Design,
    family: &ResponseFamily,
    ctx: &PopulationContext,
    betas: &[PopulationBeta],
) -> Result<RiskReport> {
    if betas.len() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            got: betas.len(),
        });
    }
    let fit = fit_many(design, family)?;
    let mut excess = Vec::with_capacity(family.len());
    let mut worst = f64::NEG_INFINITY;
    let mut worst_index = 0;
    for idx in 0..family.len() {
        match fit.coefficients(idx) {
            Some(beta_hat) => {
                let e = excess_risk(beta_hat, &betas[idx].beta, ctx.factor())?;
                if e > worst {
                    worst = e;
                    worst_index = idx;
                }
                excess.push(Some(e));
            }
            None => excess.push(None),
        }
    }
    if !worst.is_finite() {
        return Err(Error::Invalid(
            "every response in the family failed to fit".into(),
        ));
    }
    Ok(RiskReport {
        excess,
        modelling_errors: betas.iter().map(|b| b.modelling_error).collect(),
        worst_case: worst,
        worst_index,
        excluded: fit.rejected().to_vec(),
    })
}

/// One grid point on a rate curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub dim: usize,
    pub mean_error: f64,
    pub std_error: f64,
}

/// An (n, error) series with replication counts and fitted log-log slopes.
/// The slope is fitted by ordinary least squares on the upper half of the
/// grid only, since the rates are asymptotic and small n biases the fit.
#[derive(Clone, Debug, Serialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    pub replications: usize,
    /// Slope of log(mean error) against log n.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Slope of log(mean error / log n) against log n.
    pub log_adjusted_slope: Option<f64>,
}

impl RateCurve {
    pub(crate) fn from_stats(stats: Vec<RatePoint>, replications: usize) -> Result<Self> {
        if stats.is_empty() || stats.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::BadSampleGrid);
        }
        let raw: Vec<(f64, f64)> = stats
            .iter()
            .map(|p| (p.n as f64, p.mean_error))
            .collect();
        let fitted = fit_log_log_slope(upper_half(&raw));
        let adjusted: Vec<(f64, f64)> = stats
            .iter()
            .map(|p| (p.n as f64, p.mean_error / (p.n as f64).ln()))
            .collect();
        let log_adjusted = fit_log_log_slope(upper_half(&adjusted)).map(|(s, _)| s);
        Ok(RateCurve {
            points: stats,
            replications,
            slope: fitted.map(|(s, _)| s),
            intercept: fitted.map(|(_, i)| i),
            log_adjusted_slope: log_adjusted,
        })
    }
}

/// The upper (large-n) half of a grid: the last ⌈len/2⌉ entries.
pub fn upper_half<T>(points: &[T]) -> &[T] {
    &points[points.len() / 2..]
}

/// OLS of log y on log x. Returns None if any y is nonpositive or fewer
/// than two points are given.
pub fn fit_log_log_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

pub(crate) fn validate_grid(n_grid: &[usize], replications: usize) -> Result<()> {
    if n_grid.is_empty()
        || n_grid[0] == 0
        || n_grid.windows(2).any(|w| w[0] >= w[1])
        || replications == 0
    {
        return Err(Error::BadSampleGrid);
    }
    Ok(())
}

/// Seed for replicate `r` of grid point `i`: streams are never shared
/// across grid points.
pub fn replicate_seed(master: u64, grid_index: usize, replications: usize, replicate: usize) -> u64 {
    master
        .wrapping_add((grid_index * replications) as u64)
        .wrapping_add(replicate as u64)
}

/// Result of the single-response rate check: the rate curve, the ratio
/// series n · E[excess] / P(q ε²) (which tends to one), and the residual
/// moment itself.
#[derive(Clone, Debug, Serialize)]
pub struct SingleRateResult {
    pub curve: RateCurve,
    /// (n, ratio) pairs.
    pub ratios: Vec<(usize, f64)>,
    pub residual_moment: MomentEstimate,
    /// How the population beta behind the excess risks was computed.
    pub beta_accuracy: OracleAccuracy,
    /// Flops summed over every design draw and fit in the sweep.
    pub total_cost: CostBreakdown,
}

/// Replicated excess-risk decay for one response on a fixed basis. Errors
/// when the response lies in the span (the check would be vacuous).
pub fn single_response_rate_check(
    model: &PopulationModel,
    map: &FeatureMap,
    response: &Response,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<SingleRateResult> {
    validate_grid(n_grid, replications)?;
    let ctx = PopulationContext::new(model, map)?;
    let pb = ctx.beta(response)?;
    let profile = leverage(ctx.factor(), map)?;
    let q_eps2 = ctx.integrate_with_map_hints(
        |x: &[f64]| {
            let h = map.evaluate_unchecked(x);
            let q = profile.q_of_features(&h);
            let eps = residual_value(map, &pb.beta, response, x);
            q * eps * eps
        },
        response.hints(),
    )?;
    if q_eps2.value < 1e-14 {
        return Err(Error::VacuousRateCheck { value: q_eps2.value });
    }

    let mut stats = Vec::with_capacity(n_grid.len());
    let mut ratios = Vec::with_capacity(n_grid.len());
    let mut total_cost = CostBreakdown::default();
    for (i, &n) in n_grid.iter().enumerate() {
        let results: Vec<(f64, CostBreakdown)> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let design = draw_design(model, map, n, replicate_seed(seed, i, replications, r))?;
                let family = ResponseFamily::singleton(response.clone(), f64::MAX)
                    .expect("singleton family");
                let fit = fit_many(&design, &family)?;
                let beta_hat = fit
                    .coefficients(0)
                    .ok_or_else(|| Error::NonFiniteResponse {
                        label: response.label().to_string(),
                    })?;
                let mut cost = *design.cost();
                cost.merge(fit.cost());
                Ok((excess_risk(beta_hat, &pb.beta, ctx.factor())?, cost))
            })
            .collect::<Result<Vec<_>>>()?;
        let errors: Vec<f64> = results.iter().map(|(e, _)| *e).collect();
        for (_, cost) in &results {
            total_cost.merge(cost);
        }
        let (mean, se) = mean_and_stderr(&errors);
        stats.push(RatePoint {
            n,
            dim: map.dim(),
            mean_error: mean,
            std_error: se,
        });
        ratios.push((n, n as f64 * mean / q_eps2.value));
    }
    Ok(SingleRateResult {
        curve: RateCurve::from_stats(stats, replications)?,
        ratios,
        residual_moment: q_eps2,
        beta_accuracy: pb.accuracy,
        total_cost,
    })
}

/// Where the basis for each grid point comes from: one fixed map, or a
/// dimension schedule realized within a basis family.
#[derive(Clone, Debug)]
pub enum BasisSource {
    Fixed(FeatureMap),
    Scheduled {
        kind: String,
        intercept: bool,
        schedule: DimensionSchedule,
    },
}

impl BasisSource {
    pub fn map_for(&self, model: &PopulationModel, n: usize) -> Result<FeatureMap> {
        match self {
            BasisSource::Fixed(map) => Ok(map.clone()),
            BasisSource::Scheduled {
                kind,
                intercept,
                schedule,
            } => basis_of_dimension(kind, model.domain(), *intercept, schedule.dimension_for(n)),
        }
    }
}

/// Per-grid-point condition diagnostics for the rate checks: the two
/// alternative ratios that should be o(1). The threshold 1 used for the
/// warn annotation is a convention, not part of the theory.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionDiag {
    pub n: usize,
    pub dim: usize,
    /// P(q²) / n.
    pub ratio_a: f64,
    /// ‖q‖∞ log(2d) / n.
    pub ratio_b: f64,
    pub warn: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WorstCaseRateResult {
    pub curve: RateCurve,
    pub conditions: Vec<ConditionDiag>,
    pub warnings: Vec<String>,
    /// Least accurate oracle route among the population betas used,
    /// across every dimension the sweep visited.
    pub worst_beta_accuracy: Option<OracleAccuracy>,
    /// Flops summed over every design draw and fit in the sweep.
    pub total_cost: CostBreakdown,
}

/// Replicated worst-case excess risk over a family, with the headline slope
/// fitted on log(error / log n) and the raw log-log slope kept alongside.
/// A condition-ratio excursion above 1 only warns; the run proceeds.
pub fn worst_case_rate_check(
    model: &PopulationModel,
    source: &BasisSource,
    family: &ResponseFamily,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
    policy: &GridPolicy,
) -> Result<WorstCaseRateResult> {
    validate_grid(n_grid, replications)?;
    let mut stats = Vec::with_capacity(n_grid.len());
    let mut conditions = Vec::with_capacity(n_grid.len());
    let mut warnings = Vec::new();
    let mut total_cost = CostBreakdown::default();
    let mut worst_beta_accuracy: Option<OracleAccuracy> = None;
    // Population context per distinct dimension (one entry for fixed maps).
    let mut cached: Option<(usize, PopulationContext, Vec<PopulationBeta>)> = None;

    for (i, &n) in n_grid.iter().enumerate() {
        let map = source.map_for(model, n)?;
        let needs_rebuild = cached
            .as_ref()
            .map(|(d, _, _)| *d != map.dim())
            .unwrap_or(true);
        if needs_rebuild {
            let ctx = PopulationContext::new(model, &map)?;
            let betas = ctx.betas(family)?;
            for pb in &betas {
                let current = worst_beta_accuracy.as_ref().map(OracleAccuracy::error_bound);
                if current.map_or(true, |c| pb.accuracy.error_bound() > c) {
                    worst_beta_accuracy = Some(pb.accuracy.clone());
                }
            }
            cached = Some((map.dim(), ctx, betas));
        }
        let (_, ctx, betas) = cached.as_ref().unwrap();

        let mut profile = leverage(ctx.factor(), &map)?;
        let q_sup = profile.estimate_sup(policy, &[]);
        let (_, p_q2) = profile.compute_moments(model)?;
        let ratio_a = p_q2 / n as f64;
        let ratio_b = q_sup * (2.0 * map.dim() as f64).ln() / n as f64;
        let warn = ratio_a.min(ratio_b) > 1.0;
        if warn {
            warnings.push(format!(
                "condition ratios exceed 1 at n={n} (a={ratio_a:.3}, b={ratio_b:.3}); asymptotic regime not reached"
            ));
        }
        conditions.push(ConditionDiag {
            n,
            dim: map.dim(),
            ratio_a,
            ratio_b,
            warn,
        });

        let results: Vec<(f64, CostBreakdown)> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let design = draw_design(model, &map, n, replicate_seed(seed, i, replications, r))?;
                let report = worst_case_risk(&design, family, ctx, betas)?;
                Ok((report.worst_case, *design.cost()))
            })
            .collect::<Result<Vec<_>>>()?;
        let worst: Vec<f64> = results.iter().map(|(w, _)| *w).collect();
        for (_, cost) in &results {
            total_cost.merge(cost);
        }
        let (mean, se) = mean_and_stderr(&worst);
        stats.push(RatePoint {
            n,
            dim: map.dim(),
            mean_error: mean,
            std_error: se,
        });
    }
    Ok(WorstCaseRateResult {
        curve: RateCurve::from_stats(stats, replications)?,
        conditions,
        warnings,
        worst_beta_accuracy,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{make_basis, BasisSpec, Domain};
    use crate::linalg::Mat;
    use crate::linear_core::{factorize, FactorPolicy, GramMatrix, Provenance};
    use crate::population::IntegrandHints;
    use approx::assert_abs_diff_eq;

    fn identity_factor(d: usize) -> CholeskyFactor {
        let g = GramMatrix::new(Mat::identity(d), Provenance::Population).unwrap();
        factorize(&g, &FactorPolicy::default()).unwrap()
    }

    #[test]
    fn excess_risk_basics() {
        let f = identity_factor(2);
        assert_eq!(excess_risk(&[1.0, 2.0], &[1.0, 2.0], &f).unwrap(), 0.0);
        assert_abs_diff_eq!(
            excess_risk(&[3.0, 4.0], &[0.0, 0.0], &f).unwrap(),
            25.0,
            epsilon = 1e-13
        );
        assert!(excess_risk(&[1.0], &[1.0, 2.0], &f).is_err());
    }

    #[test]
    fn excess_risk_matches_quadrature_of_the_squared_gap() {
        // Oracle: ∫ {h(x)ᵀ Δ}² dP(x) by quadrature.
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 3 }, model.domain(), true).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        let beta_hat = vec![0.2, -0.7, 1.1, 0.4];
        let beta_star = vec![0.1, 0.3, -0.2, 0.0];
        let via_factor = excess_risk(&beta_hat, &beta_star, ctx.factor()).unwrap();
        let diff: Vec<f64> = beta_hat.iter().zip(&beta_star).map(|(a, b)| a - b).collect();
        let via_quad = model
            .integrate(
                |x: &[f64]| {
                    let h = map.evaluate_unchecked(x);
                    crate::linalg::dot(&h, &diff).powi(2)
                },
                &IntegrandHints::smooth(),
            )
            .unwrap()
            .value;
        assert_abs_diff_eq!(via_factor, via_quad, epsilon = 1e-8);
    }

    #[test]
    fn worst_case_zero_on_span_families() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 4 }, model.domain(), true).unwrap();
        let family = ResponseFamily::from_basis(&map, &GridPolicy::default()).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        let betas = ctx.betas(&family).unwrap();
        let design = draw_design(&model, &map, 256, 4).unwrap();
        let report = worst_case_risk(&design, &family, &ctx, &betas).unwrap();
        assert!(report.worst_case <= 1e-12, "worst = {}", report.worst_case);
    }

    #[test]
    fn worst_case_equals_exhaustive_max_over_singletons() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 5 }, model.domain(), true).unwrap();
        let family = ResponseFamily::step(50, 0.05, 0.95, model.domain()).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        let betas = ctx.betas(&family).unwrap();
        let design = draw_design(&model, &map, 512, 2024).unwrap();
        let report = worst_case_risk(&design, &family, &ctx, &betas).unwrap();

        // Brute force: loop the members one by one.
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for idx in 0..family.len() {
            let single = ResponseFamily::singleton(family.member(idx).clone(), 1.0).unwrap();
            let fit = fit_many(&design, &single).unwrap();
            let e = excess_risk(fit.coefficients(0).unwrap(), &betas[idx].beta, ctx.factor())
                .unwrap();
            assert_eq!(e, report.excess[idx].unwrap());
            if e > best {
                best = e;
                best_idx = idx;
            }
        }
        assert_eq!(report.worst_case, best);
        assert_eq!(report.worst_index, best_idx);
    }

    #[test]
    fn worst_case_lists_excluded_responses() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 1 }, model.domain(), true).unwrap();
        let design = draw_design(&model, &map, 32, 3).unwrap();
        let good = Response::smooth("fine", |x: &[f64]| (2.0 * x[0]).sin());
        let bad = Response::smooth("nan", |x: &[f64]| if x[0] > 0.1 { f64::NAN } else { 0.0 });
        let family = ResponseFamily::new(vec![good.clone(), bad], 1.0).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        // The excluded column never consults its beta; any placeholder works.
        let betas = vec![ctx.beta(&good).unwrap(), ctx.beta(&good).unwrap()];
        let report = worst_case_risk(&design, &family, &ctx, &betas).unwrap();
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.excluded[0].0, 1);
        assert!(report.excess[0].is_some());
        assert!(report.excess[1].is_none());
    }

    #[test]
    fn worst_case_monotone_under_family_growth() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 3 }, model.domain(), true).unwrap();
        let design = draw_design(&model, &map, 128, 8).unwrap();
        let full = ResponseFamily::oscillatory(10, 0.5, 2.0, model.domain()).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        let betas_full = ctx.betas(&full).unwrap();
        let mut prev = 0.0;
        for k in 1..=10 {
            let sub = ResponseFamily::new(full.members()[..k].to_vec(), 1.0).unwrap();
            let report = worst_case_risk(&design, &sub, &ctx, &betas_full[..k]).unwrap();
            assert!(report.worst_case >= prev);
            prev = report.worst_case;
        }
    }

    #[test]
    fn scaling_a_response_scales_excess_risk_quadratically() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 1 }, model.domain(), true).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        let design = draw_design(&model, &map, 64, 5).unwrap();
        let f = Response::smooth("sq", |x: &[f64]| x[0] * x[0]);

        let run = |resp: &Response| {
            let fam = ResponseFamily::singleton(resp.clone(), 4.0).unwrap();
            let fit = fit_many(&design, &fam).unwrap();
            let pb = ctx.beta(resp).unwrap();
            excess_risk(fit.coefficients(0).unwrap(), &pb.beta, ctx.factor()).unwrap()
        };
        let base = run(&f);
        // Powers of two scale exactly in floating point.
        let doubled = run(&f.scaled(2.0));
        assert_eq!(doubled, 4.0 * base);
        let scaled = run(&f.scaled(1.7));
        assert_abs_diff_eq!(scaled, 1.7 * 1.7 * base, epsilon = 1e-12 * base.abs());
    }

    #[test]
    fn span_response_makes_rate_check_vacuous() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 2 }, model.domain(), true).unwrap();
        let in_span = Response::smooth("in-span", |x: &[f64]| 1.0 - 2.0 * x[0] * x[0]);
        let err = single_response_rate_check(&model, &map, &in_span, &[64, 128], 4, 9);
        assert!(matches!(err, Err(Error::VacuousRateCheck { .. })));
    }

    #[test]
    fn slope_fit_recovers_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [256.0, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|&n| (n, 3.0 / n))
            .collect();
        let (slope, intercept) = fit_log_log_slope(&pts).unwrap();
        assert_abs_diff_eq!(slope, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(intercept, 3.0f64.ln(), epsilon = 1e-12);
        assert!(fit_log_log_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }

    #[test]
    fn upper_half_takes_the_large_n_side() {
        let v = [1, 2, 3, 4, 5, 6];
        assert_eq!(upper_half(&v), &[4, 5, 6]);
        let v = [1, 2, 3, 4, 5];
        assert_eq!(upper_half(&v), &[3, 4, 5]);
    }

    #[test]
    fn single_rate_smoke_run_decays() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 1 }, model.domain(), true).unwrap();
        let f = Response::smooth("x^2", |x: &[f64]| x[0] * x[0]);
        let result =
            single_response_rate_check(&model, &map, &f, &[128, 256, 512, 1024], 40, 123).unwrap();
        assert_eq!(result.curve.points.len(), 4);
        let first = result.curve.points[0].mean_error;
        let last = result.curve.points[3].mean_error;
        assert!(last < first, "errors should decay: {first} vs {last}");
        let slope = result.curve.slope.unwrap();
        assert!((-1.6..=-0.4).contains(&slope), "slope = {slope}");
        // Ratio near one at the largest n (loose smoke bound).
        let (_, ratio) = result.ratios[3];
        assert!((0.5..=2.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn worst_case_rate_with_schedule_runs() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let source = BasisSource::Scheduled {
            kind: "legendre".into(),
            intercept: true,
            schedule: DimensionSchedule::new_power_law(1.0 / 3.0).unwrap(),
        };
        let family = ResponseFamily::oscillatory(5, 0.5, 2.0, model.domain()).unwrap();
        let policy = GridPolicy { sup_points: 2000 };
        let result =
            worst_case_rate_check(&model, &source, &family, &[64, 128, 256], 10, 77, &policy)
                .unwrap();
        assert_eq!(result.curve.points.len(), 3);
        assert_eq!(result.conditions.len(), 3);
        // Dimensions follow the schedule.
        assert_eq!(result.curve.points[0].dim, 4);
        assert_eq!(result.curve.points[2].dim, 6);
        // The curve decays.
        assert!(result.curve.points[2].mean_error < result.curve.points[0].mean_error);
    }

    #[test]
    fn replicate_seeds_never_collide_across_grid() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..6 {
            for r in 0..100 {
                assert!(seen.insert(replicate_seed(42, i, 100, r)));
            }
        }
    }
}
