//! The shared linear-algebra substrate: Gram matrices, their Cholesky
//! factorizations (with a pseudo-inverse fallback for rank-deficient input),
//! the leverage function q(x) = h(x)ᵀ G⁻¹ h(x), whitening, and minimum
//! eigenvalue diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::grid::{sup_on_grid, GridPolicy};
use crate::linalg::{
    self, cholesky_lower, eigh, solve_lower, solve_lower_transpose, CholeskyOutcome, Mat,
};
use crate::population::{IntegrandHints, MomentEstimate, PopulationModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Empirical,
    Population,
}

/// Symmetric second-moment matrix of a feature map.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    mat: Mat,
    provenance: Provenance,
}

impl GramMatrix {
    /// Wrap a matrix, enforcing symmetry (to 1e−12 relative) and a
    /// nonnegative diagonal. Small asymmetries from accumulation order are
    /// symmetrized away.
    pub fn new(mut mat: Mat, provenance: Provenance) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        if !mat.is_finite() {
            return Err(Error::NonFiniteMatrix);
        }
        if mat.asymmetry() > 1e-12 {
            return Err(Error::Invalid(format!(
                "Gram matrix asymmetry {:.3e} exceeds 1e-12 relative",
                mat.asymmetry()
            )));
        }
        for i in 0..mat.nrows() {
            if mat[(i, i)] < 0.0 {
                return Err(Error::Invalid(format!(
                    "negative Gram diagonal at {i}: {}",
                    mat[(i, i)]
                )));
            }
        }
        mat.symmetrize();
        Ok(GramMatrix { mat, provenance })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// G_n = (1/n) Hᵀ H from an n×d feature matrix. Symmetric by construction.
pub fn empirical_gram(feature_matrix: &Mat) -> GramMatrix {
    let n = feature_matrix.nrows();
    let d = feature_matrix.ncols();
    assert!(n >= 1, "empirical Gram needs at least one row");
    let mut g = Mat::zeros(d, d);
    for i in 0..n {
        let row = feature_matrix.row(i);
        for j in 0..d {
            let hj = row[j];
            for k in j..d {
                g[(j, k)] += hj * row[k];
            }
        }
    }
    let scale = 1.0 / n as f64;
    for j in 0..d {
        for k in j..d {
            let v = g[(j, k)] * scale;
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    GramMatrix {
        mat: g,
        provenance: Provenance::Empirical,
    }
}

/// Flops of the empirical Gram accumulation.
pub fn empirical_gram_flops(n: usize, d: usize) -> u64 {
    (n * d * d) as u64
}

/// Policy knobs for `factorize`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorPolicy {
    /// Ridge added to the diagonal before factorizing (0 = none).
    pub jitter: f64,
    /// A Cholesky pivot below `pivot_rtol * max_diag` triggers the
    /// pseudo-inverse fallback.
    pub pivot_rtol: f64,
    /// In pseudo-inverse mode, eigenvalues below `eig_rtol * λ_max` are
    /// treated as zero.
    pub eig_rtol: f64,
}

impl Default for FactorPolicy {
    fn default() -> Self {
        FactorPolicy {
            jitter: 0.0,
            pivot_rtol: 1e-10,
            eig_rtol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
enum FactorRepr {
    Lower(Mat),
    /// Eigendecomposition G = V diag(vals) Vᵀ with `kept[i]` marking the
    /// eigenvalues above the cut-off.
    PseudoInverse {
        vecs: Mat,
        vals: Vec<f64>,
        kept: Vec<bool>,
    },
}

/// Factorization of a Gram matrix, either a genuine Cholesky factor or an
/// eigendecomposition-based pseudo-inverse.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    dim: usize,
    repr: FactorRepr,
    factor_flops: u64,
}

/// Factor a symmetric Gram matrix. Falls back to the pseudo-inverse when a
/// pivot collapses; NaN or infinite entries are an error.
pub fn factorize(gram: &GramMatrix, policy: &FactorPolicy) -> Result<CholeskyFactor> {
    let d = gram.dim();
    let mut mat = gram.mat().clone();
    if policy.jitter > 0.0 {
        for i in 0..d {
            mat[(i, i)] += policy.jitter;
        }
    }
    match cholesky_lower(&mat, policy.pivot_rtol)? {
        CholeskyOutcome::Lower(l) => Ok(CholeskyFactor {
            dim: d,
            repr: FactorRepr::Lower(l),
            factor_flops: linalg::cholesky_flops(d),
        }),
        CholeskyOutcome::PivotFailure(_) => {
            let (vals, vecs) = eigh(&mat)?;
            let lambda_max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let kept = vals
                .iter()
                .map(|&v| v > policy.eig_rtol * lambda_max)
                .collect();
            Ok(CholeskyFactor {
                dim: d,
                repr: FactorRepr::PseudoInverse { vecs, vals, kept },
                factor_flops: linalg::cholesky_flops(d) + linalg::eigh_flops(d),
            })
        }
    }
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pseudo_inverse_used(&self) -> bool {
        matches!(self.repr, FactorRepr::PseudoInverse { .. })
    }

    /// The lower-triangular factor, when not in pseudo-inverse mode.
    pub fn lower(&self) -> Option<&Mat> {
        match &self.repr {
            FactorRepr::Lower(l) => Some(l),
            FactorRepr::PseudoInverse { .. } => None,
        }
    }

    /// Flops spent building this factor.
    pub fn factor_flops(&self) -> u64 {
        self.factor_flops
    }

    /// Flops of one `solve` call.
    pub fn solve_flops(&self) -> u64 {
        match self.repr {
            FactorRepr::Lower(_) => 2 * linalg::triangular_solve_flops(self.dim),
            FactorRepr::PseudoInverse { .. } => 4 * (self.dim * self.dim) as u64,
        }
    }

    /// G⁻¹ b (or G⁺ b in pseudo-inverse mode).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        match &self.repr {
            FactorRepr::Lower(l) => {
                let y = solve_lower(l, b);
                solve_lower_transpose(l, &y)
            }
            FactorRepr::PseudoInverse { vecs, vals, kept } => {
                let mut coeffs = vecs.matvec_t(b);
                for ((c, &v), &keep) in coeffs.iter_mut().zip(vals).zip(kept) {
                    *c = if keep { *c / v } else { 0.0 };
                }
                vecs.matvec(&coeffs)
            }
        }
    }

    /// A vector y with |y|² = bᵀ G⁻¹ b (range-space part in pseudo-inverse
    /// mode). For the Cholesky representation this is the triangular solve
    /// L⁻¹ b.
    pub fn half_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        match &self.repr {
            FactorRepr::Lower(l) => solve_lower(l, b),
            FactorRepr::PseudoInverse { vecs, vals, kept } => {
                let mut coeffs = vecs.matvec_t(b);
                for ((c, &v), &keep) in coeffs.iter_mut().zip(vals).zip(kept) {
                    *c = if keep { *c / v.sqrt() } else { 0.0 };
                }
                coeffs
            }
        }
    }

    /// The quadratic form vᵀ G v of the factored matrix, evaluated through
    /// the factor: |Lᵀ v|², or Σ λ_i (vᵀ V e_i)² with negative eigenvalues
    /// clipped at zero in pseudo-inverse mode.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim);
        match &self.repr {
            FactorRepr::Lower(l) => {
                let mut total = 0.0;
                for i in 0..self.dim {
                    let mut s = 0.0;
                    for k in i..self.dim {
                        s += l[(k, i)] * v[k];
                    }
                    total += s * s;
                }
                total
            }
            FactorRepr::PseudoInverse { vecs, vals, .. } => {
                let coeffs = vecs.matvec_t(v);
                coeffs
                    .iter()
                    .zip(vals)
                    .map(|(c, &lam)| lam.max(0.0) * c * c)
                    .sum()
            }
        }
    }

    /// Max relative error of L Lᵀ against `gram`; None in pseudo-inverse
    /// mode.
    pub fn reconstruction_error(&self, gram: &GramMatrix) -> Option<f64> {
        let l = self.lower()?;
        let scale = gram.mat().max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += l[(i, k)] * l[(j, k)];
                }
                worst = worst.max((s - gram.mat()[(i, j)]).abs() / scale);
            }
        }
        Some(worst)
    }
}

/// Smallest eigenvalue of a symmetric Gram matrix.
pub fn min_eigenvalue(gram: &GramMatrix) -> f64 {
    let (vals, _) = eigh(gram.mat()).expect("Gram matrices are finite by construction");
    vals[0]
}

/// Whitening transform: returns the composed map ħ = G^{−1/2} h, using the
/// unique symmetric square root of G. Requires a positive definite Gram;
/// pseudo-inverse territory is an error.
pub fn whiten(map: &FeatureMap, gram: &GramMatrix, policy: &FactorPolicy) -> Result<FeatureMap> {
    let d = gram.dim();
    if map.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: map.dim(),
        });
    }
    let (vals, vecs) = eigh(gram.mat())?;
    let lambda_max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if vals[0] <= policy.eig_rtol * lambda_max {
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
    map.compose_linear(w)
}

/// The leverage function of a factored Gram matrix, with cached sup-norm
/// estimate and population moments.
#[derive(Clone, Debug)]
pub struct LeverageProfile {
    map: FeatureMap,
    factor: CholeskyFactor,
    sup_estimate: Option<f64>,
    p_q: Option<MomentEstimate>,
    p_q2: Option<MomentEstimate>,
}

/// Build the leverage function q(x) = h(x)ᵀ G⁻¹ h(x) from a factorization of
/// G, computed as the squared norm of the half solve. In pseudo-inverse mode
/// the profile reports leverage in the range space only.
pub fn leverage(factor: &CholeskyFactor, map: &FeatureMap) -> Result<LeverageProfile> {
    if factor.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: factor.dim(),
            got: map.dim(),
        });
    }
    Ok(LeverageProfile {
        map: map.clone(),
        factor: factor.clone(),
        sup_estimate: None,
        p_q: None,
        p_q2: None,
    })
}

impl LeverageProfile {
    pub fn q(&self, x: &[f64]) -> Result<f64> {
        let h = self.map.evaluate(x)?;
        Ok(self.q_of_features(&h))
    }

    /// Leverage of an already-evaluated feature vector.
    pub fn q_of_features(&self, h: &[f64]) -> f64 {
        self.factor
            .half_solve(h)
            .iter()
            .map(|v| v * v)
            .sum()
    }

    /// Whether the underlying factorization is a pseudo-inverse, in which
    /// case leverage values cover the range space only.
    pub fn range_space_only(&self) -> bool {
        self.factor.pseudo_inverse_used()
    }

    /// Estimate ‖q‖∞ over the deterministic low-discrepancy grid plus the
    /// supplied sample points. This is an estimate from below.
    pub fn estimate_sup(&mut self, policy: &GridPolicy, sample_points: &[Vec<f64>]) -> f64 {
        let sup = sup_on_grid(self.map.domain(), policy, sample_points, |x| {
            let h = self.map.evaluate_unchecked(x);
            self.q_of_features(&h)
        });
        self.sup_estimate = Some(sup);
        sup
    }

    /// Compute and cache P(q) and P(q²) under the model.
    pub fn compute_moments(&mut self, model: &PopulationModel) -> Result<(f64, f64)> {
        let hints = IntegrandHints {
            smooth: self.map.is_smooth(),
            breakpoints: self.map.breakpoints(),
        };
        let q = |x: &[f64]| {
            let h = self.map.evaluate_unchecked(x);
            self.q_of_features(&h)
        };
        let p_q = model.integrate(&q, &hints)?;
        let p_q2 = model.integrate(|x: &[f64]| q(x).powi(2), &hints)?;
        let out = (p_q.value, p_q2.value);
        self.p_q = Some(p_q);
        self.p_q2 = Some(p_q2);
        Ok(out)
    }

    pub fn sup_estimate(&self) -> Option<f64> {
        self.sup_estimate
    }

    pub fn p_q(&self) -> Option<&MomentEstimate> {
        self.p_q.as_ref()
    }

    pub fn p_q2(&self) -> Option<&MomentEstimate> {
        self.p_q2.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{make_basis, BasisSpec, Domain};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram_from(rows: &[Vec<f64>], provenance: Provenance) -> GramMatrix {
        GramMatrix::new(Mat::from_rows(rows), provenance).unwrap()
    }

    #[test]
    fn empirical_gram_single_outer_product() {
        let h = Mat::from_rows(&[vec![1.0, 0.5]]);
        let g = empirical_gram(&h);
        assert_eq!(g.mat()[(0, 0)], 1.0);
        assert_eq!(g.mat()[(0, 1)], 0.5);
        assert_eq!(g.mat()[(1, 0)], 0.5);
        assert_eq!(g.mat()[(1, 1)], 0.25);
        assert_eq!(g.provenance(), Provenance::Empirical);
    }

    #[test]
    fn empirical_gram_intercept_only() {
        let h = Mat::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let g = empirical_gram(&h);
        assert_eq!(g.dim(), 1);
        assert_eq!(g.mat()[(0, 0)], 1.0);
    }

    #[test]
    fn empirical_gram_two_points() {
        // h(x) = (1, x) at X = {0, 1}.
        let h = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let g = empirical_gram(&h);
        assert_eq!(g.mat()[(0, 0)], 1.0);
        assert_eq!(g.mat()[(0, 1)], 0.5);
        assert_eq!(g.mat()[(1, 1)], 0.5);
    }

    #[test]
    fn factorize_identity_and_known() {
        let g = gram_from(&[vec![1.0, 0.0], vec![0.0, 1.0]], Provenance::Population);
        let f = factorize(&g, &FactorPolicy::default()).unwrap();
        assert!(!f.pseudo_inverse_used());
        let l = f.lower().unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 1.0);
        assert_abs_diff_eq!(l[(1, 1)], 1.0);

        let g = gram_from(&[vec![4.0, 2.0], vec![2.0, 5.0]], Provenance::Population);
        let f = factorize(&g, &FactorPolicy::default()).unwrap();
        assert!(f.reconstruction_error(&g).unwrap() < 1e-10);
    }

    #[test]
    fn factorize_indefinite_goes_pseudo_inverse() {
        let g = gram_from(&[vec![1.0, 2.0], vec![2.0, 1.0]], Provenance::Population);
        let f = factorize(&g, &FactorPolicy::default()).unwrap();
        assert!(f.pseudo_inverse_used());
        // Solve agrees with the analytic pseudo-inverse on the kept space.
        // Eigenpairs: λ=3 with v=(1,1)/√2, λ=−1 with (1,−1)/√2 (dropped).
        let b = vec![1.0, 1.0];
        let x = f.solve(&b);
        assert_abs_diff_eq!(x[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn jitter_rescues_a_semidefinite_matrix() {
        let g = gram_from(&[vec![1.0, 1.0], vec![1.0, 1.0]], Provenance::Empirical);
        let plain = factorize(&g, &FactorPolicy::default()).unwrap();
        assert!(plain.pseudo_inverse_used());
        let jittered = factorize(
            &g,
            &FactorPolicy {
                jitter: 1e-6,
                ..FactorPolicy::default()
            },
        )
        .unwrap();
        assert!(!jittered.pseudo_inverse_used());
    }

    #[test]
    fn factorize_rejects_nonfinite() {
        let mut m = Mat::identity(2);
        m[(0, 0)] = f64::INFINITY;
        assert!(GramMatrix::new(m, Provenance::Empirical).is_err());
    }

    #[test]
    fn solve_matches_dense_inverse_on_random_pd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = 8;
            // A = B Bᵀ + 0.1 I is comfortably PD.
            let mut b = Mat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    b[(i, j)] = rng.random::<f64>() * 2.0 - 1.0;
                }
            }
            let mut a = b.matmul(&b.transpose());
            for i in 0..d {
                a[(i, i)] += 0.1;
            }
            let g = GramMatrix::new(a.clone(), Provenance::Population).unwrap();
            let f = factorize(&g, &FactorPolicy::default()).unwrap();
            let rhs: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let x = f.solve(&rhs);
            // Oracle: Gauss-Jordan dense inverse.
            let inv = dense_inverse(&a);
            let expect = inv.matvec(&rhs);
            for i in 0..d {
                assert_abs_diff_eq!(x[i], expect[i], epsilon = 1e-9);
            }
        }
    }

    fn dense_inverse(a: &Mat) -> Mat {
        let n = a.nrows();
        let mut aug = Mat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = a[(i, j)];
            }
            aug[(i, n + i)] = 1.0;
        }
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if aug[(r, col)].abs() > aug[(piv, col)].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..2 * n {
                    let tmp = aug[(col, j)];
                    aug[(col, j)] = aug[(piv, j)];
                    aug[(piv, j)] = tmp;
                }
            }
            let pv = aug[(col, col)];
            for j in 0..2 * n {
                aug[(col, j)] /= pv;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = aug[(r, col)];
                for j in 0..2 * n {
                    aug[(r, j)] -= factor * aug[(col, j)];
                }
            }
        }
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)];
            }
        }
        inv
    }

    #[test]
    fn min_eigenvalue_known_values() {
        let g = gram_from(&[vec![1.0, 0.0], vec![0.0, 1.0]], Provenance::Population);
        assert_abs_diff_eq!(min_eigenvalue(&g), 1.0, epsilon = 1e-13);
        let g = gram_from(&[vec![2.0, 0.0], vec![0.0, 0.5]], Provenance::Population);
        assert_abs_diff_eq!(min_eigenvalue(&g), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn leverage_intercept_only_is_one() {
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Monomial { degree: 0 }, &domain, true).unwrap();
        let g = gram_from(&[vec![1.0]], Provenance::Population);
        let f = factorize(&g, &FactorPolicy::default()).unwrap();
        let prof = leverage(&f, &map).unwrap();
        for x in [0.0, 0.25, 0.99] {
            assert_abs_diff_eq!(prof.q(&[x]).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn in_sample_leverage_averages_to_dimension() {
        // Trace identity: (1/n) Σ q_n(X_i) = d when G_n is invertible.
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Monomial { degree: 3 }, &domain, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 64;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let rows: Vec<Vec<f64>> = pts.iter().map(|x| map.evaluate(x).unwrap()).collect();
        let h = Mat::from_rows(&rows);
        let g = empirical_gram(&h);
        let f = factorize(&g, &FactorPolicy::default()).unwrap();
        let prof = leverage(&f, &map).unwrap();
        let mean: f64 =
            pts.iter().map(|x| prof.q(x).unwrap()).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, map.dim() as f64, epsilon = 1e-10);
    }

    #[test]
    fn orthonormal_leverage_is_sum_of_squares() {
        // Legendre under Uniform has G = I, so q(x) = Σ_j h_j(x)².
        // Oracle: direct solve against the factored population Gram.
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Legendre { degree: 5 }, &domain, true).unwrap();
        let g = GramMatrix::new(Mat::identity(map.dim()), Provenance::Population).unwrap();
        let f = factorize(&g, &FactorPolicy::default()).unwrap();
        let prof = leverage(&f, &map).unwrap();
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            let h = map.evaluate(&x).unwrap();
            let direct: f64 = h.iter().map(|v| v * v).sum();
            assert_abs_diff_eq!(prof.q(&x).unwrap(), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn leverage_invariant_under_linear_reparametrization() {
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Legendre { degree: 4 }, &domain, true).unwrap();
        let d = map.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // Well-conditioned random A: identity plus a small perturbation.
        let mut a = Mat::identity(d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] += 0.3 * (rng.random::<f64>() - 0.5);
            }
        }
        let remapped = map.compose_linear(a).unwrap();

        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random::<f64>()]).collect();
        let rows_h: Vec<Vec<f64>> = pts.iter().map(|x| map.evaluate(x).unwrap()).collect();
        let rows_a: Vec<Vec<f64>> = pts.iter().map(|x| remapped.evaluate(x).unwrap()).collect();
        let gh = empirical_gram(&Mat::from_rows(&rows_h));
        let ga = empirical_gram(&Mat::from_rows(&rows_a));
        let fh = factorize(&gh, &FactorPolicy::default()).unwrap();
        let fa = factorize(&ga, &FactorPolicy::default()).unwrap();
        let ph = leverage(&fh, &map).unwrap();
        let pa = leverage(&fa, &remapped).unwrap();
        for x in &pts {
            assert_abs_diff_eq!(ph.q(x).unwrap(), pa.q(x).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn whiten_orthonormal_basis_keeps_identity_gram() {
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Legendre { degree: 4 }, &domain, true).unwrap();
        let g = GramMatrix::new(Mat::identity(map.dim()), Provenance::Population).unwrap();
        let whitened = whiten(&map, &g, &FactorPolicy::default()).unwrap();
        for i in 0..20 {
            let x = [i as f64 / 19.0];
            let a = map.evaluate(&x).unwrap();
            let b = whitened.evaluate(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn leverage_moments_match_quadrature() {
        // P(q) = d to 1e-8 relative, with q built from a non-orthonormal
        // basis so the factor actually works.
        use crate::population::PopulationModel;
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 4 }, model.domain(), true).unwrap();
        let (gram, _) = model.population_gram(&map).unwrap();
        let factor = factorize(&gram, &FactorPolicy::default()).unwrap();
        let mut prof = leverage(&factor, &map).unwrap();
        let (p_q, p_q2) = prof.compute_moments(&model).unwrap();
        let d = map.dim() as f64;
        assert!((p_q - d).abs() / d < 1e-8, "P(q) = {p_q}");
        // Cauchy-Schwarz: P(q²) ≥ P(q)² = d².
        assert!(p_q2 >= d * d - 1e-8);
    }

    #[test]
    fn whiten_monomials_gives_identity_population_gram() {
        // Oracle: quadrature Gram of the whitened map.
        use crate::population::PopulationModel;
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 4 }, model.domain(), true).unwrap();
        let (gram, _) = model.population_gram(&map).unwrap();
        let whitened = whiten(&map, &gram, &FactorPolicy::default()).unwrap();
        let (wg, _) = model.population_gram(&whitened).unwrap();
        for i in 0..map.dim() {
            for j in 0..map.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(wg.mat()[(i, j)], expect, epsilon = 1e-8);
            }
        }
        // Leverage is invariant under the whitening transform.
        let f_raw = factorize(&gram, &FactorPolicy::default()).unwrap();
        let f_wht = factorize(&wg, &FactorPolicy::default()).unwrap();
        let p_raw = leverage(&f_raw, &map).unwrap();
        let p_wht = leverage(&f_wht, &whitened).unwrap();
        for i in 0..30 {
            let x = [i as f64 / 29.0];
            assert_abs_diff_eq!(
                p_raw.q(&x).unwrap(),
                p_wht.q(&x).unwrap(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn whiten_rejects_singular_gram() {
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Monomial { degree: 1 }, &domain, true).unwrap();
        let g = gram_from(&[vec![1.0, 1.0], vec![1.0, 1.0]], Provenance::Population);
        assert!(matches!(
            whiten(&map, &g, &FactorPolicy::default()),
            Err(Error::PseudoInverseMode)
        ));
    }
}
