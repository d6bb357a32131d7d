//! End-to-end demos on top of the estimators: CDF/quantile estimation with
//! control variates, and sample-average-approximation optimization.
//!
//! A control-variate CDF estimate can leave [0, 1] or lose monotonicity, so
//! the raw per-level estimates are kept and a corrected sequence is produced
//! by isotonic (pool-adjacent-violators) projection followed by clipping.
//! The projection is a sup-norm contraction towards any true CDF, so the
//! uniform error guarantee survives the correction.

use std::sync::Arc;

use crate::control_variates::{vanilla_mc, ControlVariateSet, CvEstimator};
use crate::error::{Error, Result};
use crate::linalg::CostBreakdown;
use crate::response::Response;
use crate::surrogate::Design;

/// Scalar transformation g of the input, whose distribution is the target
/// of quantile estimation.
#[derive(Clone)]
pub enum Transform {
    /// g(x) = x_axis.
    Coordinate { axis: usize },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transform::Coordinate { axis } => write!(f, "Coordinate({axis})"),
            Transform::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Transform {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Transform::Coordinate { axis } => x[*axis],
            Transform::Custom(g) => g(x),
        }
    }

    /// The indicator response f_y = 1{g(x) ≤ y}. For coordinate transforms
    /// the discontinuity location is declared, so population moments stay on
    /// the quadrature route.
    pub fn indicator_at(&self, y: f64, input_dim: usize) -> Response {
        match self {
            Transform::Coordinate { axis } => {
                let axis = *axis;
                let mut breakpoints = vec![Vec::new(); input_dim];
                breakpoints[axis].push(y);
                Response::piecewise(
                    format!("cdf y={y:.6}"),
                    move |x: &[f64]| if x[axis] <= y { 1.0 } else { 0.0 },
                    breakpoints,
                )
            }
            Transform::Custom(g) => {
                let g = Arc::clone(g);
                Response::rough(format!("cdf y={y:.6}"), move |x: &[f64]| {
                    if g(x) <= y {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
        }
    }
}

/// CDF/quantile estimation task: the transformation, the target level, and
/// the y-grid indexing the indicator family.
#[derive(Clone)]
pub struct QuantileTask {
    transform: Transform,
    level: f64,
    y_grid: Vec<f64>,
    truth: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for QuantileTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuantileTask")
            .field("transform", &self.transform)
            .field("level", &self.level)
            .field("y_grid_len", &self.y_grid.len())
            .field("has_truth", &self.truth.is_some())
            .finish()
    }
}

impl QuantileTask {
    pub fn new(transform: Transform, level: f64, y_grid: Vec<f64>) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Invalid(format!(
                "quantile level must lie in (0,1), got {level}"
            )));
        }
        if y_grid.len() < 2 || y_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "y grid must be strictly increasing with at least two points".into(),
            ));
        }
        Ok(QuantileTask {
            transform,
            level,
            y_grid,
            truth: None,
        })
    }

    /// Attach a known true CDF for reporting.
    pub fn with_truth(mut self, cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.truth = Some(Arc::new(cdf));
        self
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn y_grid(&self) -> &[f64] {
        &self.y_grid
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn grid_step(&self) -> f64 {
        self.y_grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max)
    }
}

/// Which estimator drives an application run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvMethod {
    Vanilla,
    ControlVariate,
}

/// Per-level CDF estimates: raw, isotonically corrected, and the truth when
/// known.
#[derive(Clone, Debug)]
pub struct CdfEstimate {
    pub y: Vec<f64>,
    pub raw: Vec<f64>,
    pub corrected: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    /// Cost of the shared estimator; exactly one factorization regardless of
    /// the grid size.
    pub estimator_cost: CostBreakdown,
}

/// Estimate F(y) = P{g(X) ≤ y} on the task's y-grid over the shared design.
/// With the control-variate method the weights are computed once and reused
/// across every y.
pub fn estimate_cdf(
    task: &QuantileTask,
    design: &Design,
    controls: &ControlVariateSet,
    method: CvMethod,
) -> Result<CdfEstimate> {
    if design.n() == 0 {
        return Err(Error::Invalid("empty design".into()));
    }
    let p = design.map().domain().dim();
    let mut raw = Vec::with_capacity(task.y_grid.len());
    let estimator_cost;
    match method {
        CvMethod::Vanilla => {
            for &y in &task.y_grid {
                let f = task.transform.indicator_at(y, p);
                raw.push(vanilla_mc(&f, design.points())?.value);
            }
            estimator_cost = CostBreakdown::default();
        }
        CvMethod::ControlVariate => {
            let estimator = CvEstimator::new(design.points(), controls)?;
            for &y in &task.y_grid {
                let f = task.transform.indicator_at(y, p);
                raw.push(estimator.estimate(&f)?.value);
            }
            estimator_cost = *estimator.cost();
        }
    }
    let corrected: Vec<f64> = isotonic_projection(&raw)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    let truth = task
        .truth
        .as_ref()
        .map(|cdf| task.y_grid.iter().map(|&y| cdf(y)).collect());
    Ok(CdfEstimate {
        y: task.y_grid.clone(),
        raw,
        corrected,
        truth,
        estimator_cost,
    })
}

/// L² projection onto the nondecreasing cone (pool adjacent violators).
pub fn isotonic_projection(values: &[f64]) -> Vec<f64> {
    // Blocks of pooled entries: (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        let mut sum = v;
        let mut count = 1usize;
        while let Some(&(prev_sum, prev_count)) = blocks.last() {
            if prev_sum / prev_count as f64 > sum / count as f64 {
                sum += prev_sum;
                count += prev_count;
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push((sum, count));
    }
    let mut out = Vec::with_capacity(values.len());
    for (sum, count) in blocks {
        let mean = sum / count as f64;
        out.extend(std::iter::repeat(mean).take(count));
    }
    out
}

/// Quantile read off a corrected CDF estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileEstimate {
    pub value: f64,
    /// The corrected CDF never reached the level; the rightmost grid point
    /// was returned.
    pub saturated: bool,
}

/// Generalized inverse on the grid: the smallest grid y with estimate ≥ u.
pub fn estimate_quantile(task: &QuantileTask, cdf: &CdfEstimate) -> QuantileEstimate {
    estimate_quantile_at(task.level, cdf)
}

/// Generalized inverse at an arbitrary level.
pub fn estimate_quantile_at(level: f64, cdf: &CdfEstimate) -> QuantileEstimate {
    for (&y, &v) in cdf.y.iter().zip(&cdf.corrected) {
        if v >= level {
            return QuantileEstimate {
                value: y,
                saturated: false,
            };
        }
    }
    QuantileEstimate {
        value: *cdf.y.last().expect("y grid is nonempty"),
        saturated: true,
    }
}

/// Sample-average-approximation task: objective integrand f(θ, x) minimized
/// over a θ-grid.
#[derive(Clone)]
pub struct SaaTask {
    objective: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
    theta_grid: Vec<f64>,
    true_minimizer: Option<f64>,
}

impl std::fmt::Debug for SaaTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaaTask")
            .field("theta_grid_len", &self.theta_grid.len())
            .field("true_minimizer", &self.true_minimizer)
            .finish()
    }
}

impl SaaTask {
    pub fn new(
        objective: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        theta_grid: Vec<f64>,
    ) -> Result<Self> {
        if theta_grid.is_empty() {
            return Err(Error::Invalid("theta grid must be nonempty".into()));
        }
        Ok(SaaTask {
            objective: Arc::new(objective),
            theta_grid,
            true_minimizer: None,
        })
    }

    pub fn with_true_minimizer(mut self, theta: f64) -> Self {
        self.true_minimizer = Some(theta);
        self
    }

    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    pub fn true_minimizer(&self) -> Option<f64> {
        self.true_minimizer
    }

    pub fn objective_at(&self, theta: f64) -> Response {
        let obj = Arc::clone(&self.objective);
        Response::smooth(format!("saa theta={theta:.6}"), move |x: &[f64]| {
            obj(theta, x)
        })
    }
}

/// SAA result: the grid minimizer and the estimated objective curve.
#[derive(Clone, Debug)]
pub struct SaaResult {
    pub theta_hat: f64,
    /// (θ, estimated objective) for every retained grid point.
    pub objective: Vec<(f64, f64)>,
    /// Grid points dropped because the objective evaluated to NaN.
    pub excluded: Vec<(f64, String)>,
    pub estimator_cost: CostBreakdown,
}

/// Minimize the estimated objective over the θ-grid; ties break towards the
/// smallest θ. With the control-variate method the weights are shared across
/// the grid.
pub fn saa_minimize(
    task: &SaaTask,
    design: &Design,
    controls: &ControlVariateSet,
    method: CvMethod,
) -> Result<SaaResult> {
    let estimator = match method {
        CvMethod::Vanilla => None,
        CvMethod::ControlVariate => Some(CvEstimator::new(design.points(), controls)?),
    };
    let mut objective = Vec::with_capacity(task.theta_grid.len());
    let mut excluded = Vec::new();
    for &theta in &task.theta_grid {
        let f = task.objective_at(theta);
        let est = match &estimator {
            None => vanilla_mc(&f, design.points()),
            Some(e) => e.estimate(&f),
        };
        match est {
            Ok(e) => objective.push((theta, e.value)),
            Err(Error::NonFiniteResponse { label }) => excluded.push((theta, label)),
            Err(other) => return Err(other),
        }
    }
    let (theta_hat, _) = objective
        .iter()
        .copied()
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
        .ok_or_else(|| Error::Invalid("objective failed at every grid point".into()))?;
    Ok(SaaResult {
        theta_hat,
        objective,
        excluded,
        estimator_cost: estimator.map(|e| *e.cost()).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{make_basis, BasisSpec, Domain};
    use crate::population::PopulationModel;
    use crate::surrogate::draw_design;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, seed: u64) -> (PopulationModel, Design, ControlVariateSet) {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 4 }, model.domain(), false).unwrap();
        let controls = ControlVariateSet::centered(map.clone(), &model).unwrap();
        let design = draw_design(&model, &map, n, seed).unwrap();
        (model, design, controls)
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn isotonic_projection_leaves_monotone_input_alone() {
        let y = vec![0.0, 0.1, 0.1, 0.5, 0.9];
        assert_eq!(isotonic_projection(&y), y);
    }

    #[test]
    fn isotonic_projection_matches_naive_pooling_oracle() {
        // Oracle: repeatedly find any adjacent violator, pool, restart.
        fn naive(values: &[f64]) -> Vec<f64> {
            #[derive(Clone)]
            struct Block {
                sum: f64,
                count: usize,
            }
            let mut blocks: Vec<Block> = values
                .iter()
                .map(|&v| Block { sum: v, count: 1 })
                .collect();
            loop {
                let mut violated = None;
                for i in 0..blocks.len().saturating_sub(1) {
                    let a = blocks[i].sum / blocks[i].count as f64;
                    let b = blocks[i + 1].sum / blocks[i + 1].count as f64;
                    if a > b {
                        violated = Some(i);
                        break;
                    }
                }
                match violated {
                    None => break,
                    Some(i) => {
                        let nxt = blocks.remove(i + 1);
                        blocks[i].sum += nxt.sum;
                        blocks[i].count += nxt.count;
                    }
                }
            }
            blocks
                .iter()
                .flat_map(|b| std::iter::repeat(b.sum / b.count as f64).take(b.count))
                .collect()
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let len = 1 + (rng.random::<f64>() * 99.0) as usize;
            let values: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
            let fast = isotonic_projection(&values);
            let slow = naive(&values);
            for (a, b) in fast.iter().zip(&slow) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            // Result is nondecreasing.
            assert!(fast.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        }
    }

    #[test]
    fn isotonic_projection_contracts_sup_error_to_monotone_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let len = 2 + (rng.random::<f64>() * 60.0) as usize;
            let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            // A random nondecreasing target.
            let mut target: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            target.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let projected = isotonic_projection(&raw);
            let sup = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max)
            };
            assert!(sup(&projected, &target) <= sup(&raw, &target) + 1e-12);
        }
    }

    #[test]
    fn cdf_estimate_is_zero_below_the_support() {
        let (_, design, controls) = setup(256, 3);
        let task = QuantileTask::new(
            Transform::Coordinate { axis: 0 },
            0.5,
            vec![-0.5, -0.25, 0.5, 1.0],
        )
        .unwrap();
        let est = estimate_cdf(&task, &design, &controls, CvMethod::Vanilla).unwrap();
        assert_eq!(est.raw[0], 0.0);
        assert_eq!(est.raw[1], 0.0);
        assert_eq!(est.corrected[0], 0.0);
    }

    #[test]
    fn vanilla_and_cv_coincide_without_controls() {
        let (_, design, _) = setup(128, 9);
        let task =
            QuantileTask::new(Transform::Coordinate { axis: 0 }, 0.5, grid(21)).unwrap();
        let vanilla = estimate_cdf(&task, &design, &ControlVariateSet::none(), CvMethod::Vanilla)
            .unwrap();
        let cv = estimate_cdf(
            &task,
            &design,
            &ControlVariateSet::none(),
            CvMethod::ControlVariate,
        )
        .unwrap();
        for (a, b) in vanilla.raw.iter().zip(&cv.raw) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn corrected_cdf_is_monotone_and_bounded() {
        let (_, design, controls) = setup(512, 17);
        let task = QuantileTask::new(Transform::Coordinate { axis: 0 }, 0.9, grid(101))
            .unwrap()
            .with_truth(|y| y.clamp(0.0, 1.0));
        let est = estimate_cdf(&task, &design, &controls, CvMethod::ControlVariate).unwrap();
        assert!(est
            .corrected
            .windows(2)
            .all(|w| w[0] <= w[1]));
        assert!(est.corrected.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Weights were built exactly once.
        assert_eq!(est.estimator_cost.factorizations, 1);
    }

    #[test]
    fn corrected_cdf_sup_error_within_rate_budget() {
        // Uniform[0,1] with g = identity has F(y) = y; the corrected
        // estimate stays within 3·sqrt(log n / n) of it uniformly in y.
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map =
            make_basis(&BasisSpec::Legendre { degree: 8 }, model.domain(), false).unwrap();
        let controls = ControlVariateSet::centered(map.clone(), &model).unwrap();
        let n = 4096;
        let task = QuantileTask::new(Transform::Coordinate { axis: 0 }, 0.5, grid(101))
            .unwrap()
            .with_truth(|y| y.clamp(0.0, 1.0));
        let budget = 3.0 * ((n as f64).ln() / n as f64).sqrt();
        for seed in [1u64, 2, 3] {
            let design = draw_design(&model, &map, n, seed).unwrap();
            let est = estimate_cdf(&task, &design, &controls, CvMethod::ControlVariate).unwrap();
            let sup = est
                .corrected
                .iter()
                .zip(&est.y)
                .map(|(&v, &y)| (v - y).abs())
                .fold(0.0f64, f64::max);
            assert!(sup <= budget, "seed {seed}: sup error {sup} > {budget}");
        }
    }

    #[test]
    fn quantile_inversion_on_exact_grid() {
        let task =
            QuantileTask::new(Transform::Coordinate { axis: 0 }, 0.25, grid(101)).unwrap();
        let cdf = CdfEstimate {
            y: grid(101),
            raw: grid(101),
            corrected: grid(101),
            truth: None,
            estimator_cost: CostBreakdown::default(),
        };
        let q = estimate_quantile(&task, &cdf);
        assert!(!q.saturated);
        assert_abs_diff_eq!(q.value, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn quantile_saturates_when_cdf_stays_low() {
        let task =
            QuantileTask::new(Transform::Coordinate { axis: 0 }, 0.9, grid(11)).unwrap();
        let cdf = CdfEstimate {
            y: grid(11),
            raw: vec![0.1; 11],
            corrected: vec![0.1; 11],
            truth: None,
            estimator_cost: CostBreakdown::default(),
        };
        let q = estimate_quantile(&task, &cdf);
        assert!(q.saturated);
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quantile_inversion_is_monotone_in_the_level() {
        let (_, design, controls) = setup(256, 21);
        let task =
            QuantileTask::new(Transform::Coordinate { axis: 0 }, 0.5, grid(51)).unwrap();
        let est = estimate_cdf(&task, &design, &controls, CvMethod::ControlVariate).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..10 {
            let u = i as f64 / 10.0;
            let q = estimate_quantile_at(u, &est);
            assert!(q.value >= prev);
            prev = q.value;
        }
    }

    #[test]
    fn saa_quadratic_recovers_the_mean() {
        let (model, _, controls) = setup(8, 1);
        let map =
            make_basis(&BasisSpec::Legendre { degree: 4 }, model.domain(), false).unwrap();
        let task = SaaTask::new(|theta, x: &[f64]| (theta - x[0]).powi(2), grid(101))
            .unwrap()
            .with_true_minimizer(0.5);
        for seed in [100u64, 200, 300] {
            let design = draw_design(&model, &map, 1024, seed).unwrap();
            let result = saa_minimize(&task, &design, &controls, CvMethod::Vanilla).unwrap();
            assert!(
                (result.theta_hat - 0.5).abs() <= 0.01 + 0.05,
                "theta_hat = {}",
                result.theta_hat
            );
        }
    }

    #[test]
    fn saa_deterministic_objective_finds_exact_argmin() {
        let (_, design, controls) = setup(64, 2);
        let task = SaaTask::new(|theta, _: &[f64]| (theta - 0.37).powi(2), grid(101)).unwrap();
        let result = saa_minimize(&task, &design, &controls, CvMethod::Vanilla).unwrap();
        // Exact grid argmin of the deterministic objective.
        assert_abs_diff_eq!(result.theta_hat, 0.37, epsilon = 0.005 + 1e-12);
        // Ties break to the smallest theta.
        let flat = SaaTask::new(|_, _: &[f64]| 1.0, grid(11)).unwrap();
        let r = saa_minimize(&flat, &design, &controls, CvMethod::Vanilla).unwrap();
        assert_eq!(r.theta_hat, 0.0);
    }

    #[test]
    fn saa_excludes_nan_objectives_with_warning() {
        let (_, design, controls) = setup(32, 4);
        let task = SaaTask::new(
            |theta, x: &[f64]| {
                if theta > 0.5 {
                    f64::NAN
                } else {
                    (theta - x[0]).powi(2)
                }
            },
            grid(11),
        )
        .unwrap();
        let result = saa_minimize(&task, &design, &controls, CvMethod::Vanilla).unwrap();
        assert_eq!(result.excluded.len(), 5);
        assert!(result.theta_hat <= 0.5);
    }

    #[test]
    fn cv_objective_curve_has_no_more_variance_than_vanilla() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map =
            make_basis(&BasisSpec::Legendre { degree: 4 }, model.domain(), false).unwrap();
        let controls = ControlVariateSet::centered(map.clone(), &model).unwrap();
        let task = SaaTask::new(|theta, x: &[f64]| (theta - x[0]).powi(2), grid(21)).unwrap();
        let replications = 200;
        let thetas = task.theta_grid().len();
        let mut curves_v = vec![Vec::with_capacity(replications); thetas];
        let mut curves_c = vec![Vec::with_capacity(replications); thetas];
        for r in 0..replications {
            let design = draw_design(&model, &map, 1024, 90_000 + r as u64).unwrap();
            let rv = saa_minimize(&task, &design, &controls, CvMethod::Vanilla).unwrap();
            let rc = saa_minimize(&task, &design, &controls, CvMethod::ControlVariate).unwrap();
            for (j, &(_, v)) in rv.objective.iter().enumerate() {
                curves_v[j].push(v);
            }
            for (j, &(_, v)) in rc.objective.iter().enumerate() {
                curves_c[j].push(v);
            }
        }
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        for j in 0..thetas {
            assert!(
                var(&curves_c[j]) <= var(&curves_v[j]),
                "theta index {j}: cv var {} vanilla var {}",
                var(&curves_c[j]),
                var(&curves_v[j])
            );
        }
    }

    #[test]
    fn saa_cv_weights_are_built_once_for_the_whole_grid() {
        let (_, design, controls) = setup(256, 6);
        let task = SaaTask::new(|theta, x: &[f64]| (theta - x[0]).powi(2), grid(51)).unwrap();
        let result = saa_minimize(&task, &design, &controls, CvMethod::ControlVariate).unwrap();
        assert_eq!(result.estimator_cost.factorizations, 1);
        assert_eq!(result.objective.len(), 51);
    }
}
