//! Fitting many responses from one design with one factorization.
//!
//! A `Design` caches the sample, the feature matrix, the empirical Gram
//! matrix and its factorization exactly once. `fit_many` then solves the
//! normal equations for every response by back-substitution against the
//! cached factor; the flop counters record one factorization no matter how
//! many responses are fitted.

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{dot, CostBreakdown, Mat};
use crate::linear_core::{
    empirical_gram, empirical_gram_flops, factorize, CholeskyFactor, FactorPolicy, GramMatrix,
};
use crate::population::{IntegrandHints, MomentEstimate, OracleAccuracy, PopulationModel};
use crate::response::{Response, ResponseFamily};

/// One random design: sample, feature matrix, Gram and factor, all cached.
#[derive(Clone, Debug)]
pub struct Design {
    map: FeatureMap,
    points: Vec<Vec<f64>>,
    features: Mat,
    gram: GramMatrix,
    factor: CholeskyFactor,
    seed: u64,
    cost: CostBreakdown,
}

/// Draw n points from the model, evaluate the features, and factorize the
/// empirical Gram matrix. Deterministic given the seed. If the Gram matrix
/// is rank deficient the design is still returned, in pseudo-inverse mode.
pub fn draw_design(
    model: &PopulationModel,
    map: &FeatureMap,
    n: usize,
    seed: u64,
) -> Result<Design> {
    if n == 0 {
        return Err(Error::Invalid("a design needs n ≥ 1 points".into()));
    }
    if !model.domain().contains_box(map.domain()) && !map.domain().contains_box(model.domain()) {
        return Err(Error::Invalid(
            "feature map domain does not cover the model box".into(),
        ));
    }
    let points = model.sample_n(n, seed);
    let rows: Vec<Vec<f64>> = points.iter().map(|x| map.evaluate_unchecked(x)).collect();
    let features = Mat::from_rows(&rows);
    let gram = empirical_gram(&features);
    let factor = factorize(&gram, &FactorPolicy::default())?;
    let d = map.dim();
    let cost = CostBreakdown {
        factorizations: 1,
        gram_flops: empirical_gram_flops(n, d),
        factor_flops: factor.factor_flops(),
        solve_flops: 0,
        eval_flops: n as u64 * map.eval_flops(),
    };
    Ok(Design {
        map: map.clone(),
        points,
        features,
        gram,
        factor,
        seed,
        cost,
    })
}

impl Design {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pseudo_inverse_used(&self) -> bool {
        self.factor.pseudo_inverse_used()
    }

    pub fn cost(&self) -> &CostBreakdown {
        &self.cost
    }

    /// In-sample average of the empirical leverage; equals d exactly when
    /// the factorization is a genuine Cholesky.
    pub fn mean_leverage(&self) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        for i in 0..n {
            let h = self.features.row(i);
            let half = self.factor.half_solve(h);
            total += half.iter().map(|v| v * v).sum::<f64>();
        }
        total / n as f64
    }

    /// Empirical Gram of the population-whitened features,
    /// G^{-1/2} G_n G^{-1/2}; its smallest eigenvalue concentrates at 1.
    pub fn whitened_empirical_gram(&self, population: &GramMatrix) -> Result<GramMatrix> {
        let d = self.dim();
        if population.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: population.dim(),
            });
        }
        let (vals, vecs) = crate::linalg::eigh(population.mat())?;
        let lambda_max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if vals[0] <= 1e-10 * lambda_max {
            return Err(Error::PseudoInverseMode);
        }
        let mut w = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += vecs[(i, k)] * vecs[(j, k)] / vals[k].sqrt();
                }
                w[(i, j)] = s;
            }
        }
        let gn_w = w.matmul(self.gram.mat()).matmul(&w);
        GramMatrix::new(symmetrized(gn_w), crate::linear_core::Provenance::Empirical)
    }

    /// Regression weights w(x, X_i) = h(x)ᵀ G_n⁻¹ h(X_i).
    pub fn weights_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.map.evaluate(x)?;
        let z = self.factor.solve(&h);
        Ok((0..self.n())
            .map(|i| dot(&z, self.features.row(i)))
            .collect())
    }
}

fn symmetrized(mut m: Mat) -> Mat {
    m.symmetrize();
    m
}

/// Coefficients for a batch of responses fitted on one design.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// One coefficient vector per family member; None where the response
    /// evaluation failed.
    columns: Vec<Option<Vec<f64>>>,
    rejected: Vec<(usize, String)>,
    cost: CostBreakdown,
}

impl FitResult {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn coefficients(&self, idx: usize) -> Option<&[f64]> {
        self.columns[idx].as_deref()
    }

    pub fn rejected(&self) -> &[(usize, String)] {
        &self.rejected
    }

    pub fn cost(&self) -> &CostBreakdown {
        &self.cost
    }

    /// Max relative normal-equation residual ‖G_n β − P_n(h f)‖∞ / scale
    /// across fitted columns, for verification.
    pub fn normal_equation_residual(&self, design: &Design, family: &ResponseFamily) -> f64 {
        let mut worst = 0.0f64;
        for (idx, col) in self.columns.iter().enumerate() {
            let Some(beta) = col else { continue };
            let rhs = moment_vector(design, family.member(idx));
            let gb = design.gram.mat().matvec(beta);
            let scale = rhs
                .iter()
                .map(|v| v.abs())
                .fold(design.gram.mat().max_abs(), f64::max)
                .max(f64::MIN_POSITIVE);
            for (a, b) in gb.iter().zip(&rhs) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
        worst
    }
}

fn moment_vector(design: &Design, response: &Response) -> Vec<f64> {
    let n = design.n();
    let d = design.dim();
    let mut rhs = vec![0.0; d];
    for i in 0..n {
        let fv = response.eval(&design.points[i]);
        let row = design.features.row(i);
        for (r, hv) in rhs.iter_mut().zip(row) {
            *r += fv * hv;
        }
    }
    for r in &mut rhs {
        *r /= n as f64;
    }
    rhs
}

/// Fit every family member by two triangular solves against the design's
/// cached factor. The factorization is never recomputed: the returned cost
/// has `factorizations == 0`. A response that evaluates to NaN anywhere is
/// rejected individually; the others proceed.
pub fn fit_many(design: &Design, family: &ResponseFamily) -> Result<FitResult> {
    let n = design.n();
    let d = design.dim();
    let mut columns = Vec::with_capacity(family.len());
    let mut rejected = Vec::new();
    let mut cost = CostBreakdown::default();

    for (idx, response) in family.members().iter().enumerate() {
        let mut rhs = vec![0.0; d];
        let mut bad = false;
        for i in 0..n {
            let fv = response.eval(&design.points[i]);
            if !fv.is_finite() {
                bad = true;
                break;
            }
            let row = design.features.row(i);
            for (r, hv) in rhs.iter_mut().zip(row) {
                *r += fv * hv;
            }
        }
        cost.eval_flops += n as u64 * 8 + 2 * (n * d) as u64;
        if bad {
            rejected.push((idx, response.label().to_string()));
            columns.push(None);
            continue;
        }
        for r in &mut rhs {
            *r /= n as f64;
        }
        let beta = design.factor.solve(&rhs);
        cost.solve_flops += design.factor.solve_flops();
        columns.push(Some(beta));
    }
    Ok(FitResult {
        columns,
        rejected,
        cost,
    })
}

/// Predictions h(x)ᵀ β̂ for every fitted column; rejected columns yield NaN.
pub fn predict(result: &FitResult, design: &Design, x: &[f64]) -> Result<Vec<f64>> {
    let h = design.map.evaluate(x)?;
    Ok(result
        .columns
        .iter()
        .map(|col| col.as_ref().map_or(f64::NAN, |beta| dot(&h, beta)))
        .collect())
}

/// Predictions via the weight representation
/// f̂(x) = (1/n) Σ_i w(x, X_i) f(X_i); agrees with `predict`.
pub fn predict_via_weights(
    design: &Design,
    family: &ResponseFamily,
    x: &[f64],
) -> Result<Vec<f64>> {
    let w = design.weights_at(x)?;
    let n = design.n() as f64;
    Ok(family
        .members()
        .iter()
        .map(|f| {
            design
                .points
                .iter()
                .zip(&w)
                .map(|(xi, &wi)| wi * f.eval(xi))
                .sum::<f64>()
                / n
        })
        .collect())
}

/// Population-optimal coefficients and diagnostics for one response.
#[derive(Clone, Debug)]
pub struct PopulationBeta {
    pub beta: Vec<f64>,
    /// L_f(β_f) = P(ε_f²), the incompressible modelling error.
    pub modelling_error: f64,
    /// max_j |P(h_j ε_f)|, which is zero in exact arithmetic.
    pub orthogonality_residual: f64,
    pub accuracy: OracleAccuracy,
}

/// Shared population-side state for a (model, map) pair: the population
/// Gram and its factor are computed once and reused for every response.
#[derive(Clone, Debug)]
pub struct PopulationContext {
    model: PopulationModel,
    map: FeatureMap,
    gram: GramMatrix,
    factor: CholeskyFactor,
    gram_accuracy: OracleAccuracy,
}

impl PopulationContext {
    pub fn new(model: &PopulationModel, map: &FeatureMap) -> Result<Self> {
        let (gram, gram_accuracy) = model.population_gram(map)?;
        let factor = factorize(&gram, &FactorPolicy::default())?;
        if factor.pseudo_inverse_used() {
            return Err(Error::PseudoInverseMode);
        }
        Ok(PopulationContext {
            model: model.clone(),
            map: map.clone(),
            gram,
            factor,
            gram_accuracy,
        })
    }

    pub fn model(&self) -> &PopulationModel {
        &self.model
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn gram_accuracy(&self) -> &OracleAccuracy {
        &self.gram_accuracy
    }

    /// β_f = G⁻¹ P(h f), with the orthogonality of the residual checked and
    /// the modelling error P(ε_f²) evaluated by the oracle.
    pub fn beta(&self, response: &Response) -> Result<PopulationBeta> {
        let (cross, cross_acc) =
            self.model
                .cross_moment(&self.map, |x: &[f64]| response.eval(x), response.hints())?;
        let beta = self.factor.solve(&cross);
        let gb = self.gram.mat().matvec(&beta);
        let orthogonality_residual = gb
            .iter()
            .zip(&cross)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let map = self.map.clone();
        let beta_for_eps = beta.clone();
        let eps = move |x: &[f64]| {
            let h = map.evaluate_unchecked(x);
            response.eval(x) - dot(&h, &beta_for_eps)
        };
        let map_hints = IntegrandHints {
            smooth: self.map.is_smooth(),
            breakpoints: self.map.breakpoints(),
        };
        let hints = map_hints.union(response.hints(), self.map.domain().dim());
        let modelling = self.model.integrate(|x: &[f64]| eps(x).powi(2), &hints)?;
        let accuracy = worse_accuracy(&self.gram_accuracy, &cross_acc, &modelling.accuracy);
        Ok(PopulationBeta {
            beta,
            modelling_error: modelling.value.max(0.0),
            orthogonality_residual,
            accuracy,
        })
    }

    /// Population betas for a whole family.
    pub fn betas(&self, family: &ResponseFamily) -> Result<Vec<PopulationBeta>> {
        family.members().iter().map(|f| self.beta(f)).collect()
    }

    /// P(g) with the map's regularity folded into the hints.
    pub fn integrate_with_map_hints<F>(
        &self,
        g: F,
        extra: &IntegrandHints,
    ) -> Result<MomentEstimate>
    where
        F: Fn(&[f64]) -> f64,
    {
        let map_hints = IntegrandHints {
            smooth: self.map.is_smooth(),
            breakpoints: self.map.breakpoints(),
        };
        let hints = map_hints.union(extra, self.map.domain().dim());
        self.model.integrate(g, &hints)
    }
}

fn worse_accuracy(a: &OracleAccuracy, b: &OracleAccuracy, c: &OracleAccuracy) -> OracleAccuracy {
    [a, b, c]
        .into_iter()
        .max_by(|x, y| {
            let key = |acc: &OracleAccuracy| match acc {
                OracleAccuracy::Quadrature { .. } => 0.0,
                OracleAccuracy::MonteCarlo { std_error, .. } => *std_error,
            };
            key(x).partial_cmp(&key(y)).unwrap()
        })
        .unwrap()
        .clone()
}

/// β_f = G⁻¹ P(h f) for a single response (builds a one-off context).
pub fn population_beta(
    model: &PopulationModel,
    map: &FeatureMap,
    response: &Response,
) -> Result<PopulationBeta> {
    PopulationContext::new(model, map)?.beta(response)
}

/// Residual ε_f = f − hᵀβ evaluated pointwise.
pub fn residual_value(map: &FeatureMap, beta: &[f64], response: &Response, x: &[f64]) -> f64 {
    let h = map.evaluate_unchecked(x);
    response.eval(x) - dot(&h, beta)
}
