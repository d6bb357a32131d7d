//! Runtime evaluation of the theoretical quantities that govern the rates:
//! the maximal residual M_n, the residual moments γ_n² and σ_n², the
//! leverage bounds, the condition ratios, and the minimum eigenvalue of the
//! whitened empirical Gram matrix.
//!
//! Condition checks never abort an experiment. The conditions are
//! asymptotic, so a finite-n threshold is a convention; ratios are reported
//! with a pass/warn annotation at threshold 1 and labelled as such.

use serde::Serialize;

use crate::error::Result;
use crate::features::FeatureMap;
use crate::grid::{halton_grid, GridPolicy};
use crate::linear_core::{leverage, min_eigenvalue};
use crate::population::{OracleAccuracy, PopulationModel};
use crate::response::ResponseFamily;
use crate::surrogate::{draw_design, residual_value, PopulationContext};

/// Flat summary of every diagnostic quantity for one (model, map, family, n)
/// configuration. Sup norms over x are grid estimates (from below); suprema
/// over the family are exact over the finite index set.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub dim: usize,
    /// Declared envelope ‖F‖∞ of the family.
    pub envelope: f64,
    /// M_n = sup_f ‖ε_f‖∞ (grid estimate).
    pub max_residual: f64,
    /// γ_n² = sup_f P(q ε_f²).
    pub gamma_sq: f64,
    /// L_n² = M_n² · ‖q‖∞.
    pub l_sq: f64,
    /// σ_n² = sup_f P(ε_f²).
    pub sigma_sq: f64,
    pub p_q: f64,
    pub p_q2: f64,
    /// ‖q‖∞ (grid estimate).
    pub q_sup: f64,
    /// P(q²) / n.
    pub condition_ratio_a: f64,
    /// ‖q‖∞ log(2d) / n.
    pub condition_ratio_b: f64,
    /// min(ratio_a, ratio_b) ≤ 1; threshold 1 is a convention.
    pub condition_pass: bool,
    /// λ_min of G^{-1/2} G_n G^{-1/2} on a seeded design.
    pub lambda_min_whitened: f64,
    /// |P(q) − d|, which is zero in exact arithmetic.
    pub trace_identity_gap: f64,
    /// γ² ≤ L², surfaced rather than asserted.
    pub ordering_gamma_le_l: bool,
    /// γ² ≤ σ² ‖q‖∞.
    pub ordering_gamma_le_sigma_qsup: bool,
    /// Worst standard error among Monte Carlo oracle calls (0 when all
    /// moments came from quadrature).
    pub oracle_mc_std_error: f64,
    /// Human-readable note on the oracle routes used.
    pub oracle_note: String,
    pub design_seed: u64,
}

/// Compute every diagnostic for the family on an n-point seeded design.
/// Deterministic given (model, map, family, n, seed, oracle seeds).
pub fn diagnose(
    model: &PopulationModel,
    map: &FeatureMap,
    family: &ResponseFamily,
    n: usize,
    seed: u64,
    policy: &GridPolicy,
) -> Result<DiagnosticsReport> {
    let ctx = PopulationContext::new(model, map)?;
    let betas = ctx.betas(family)?;
    let design = draw_design(model, map, n, seed)?;

    let mut profile = leverage(ctx.factor(), map)?;
    let q_sup = profile.estimate_sup(policy, design.points());
    let (p_q, p_q2) = profile.compute_moments(model)?;

    // Shared evaluation grid for the residual sup norms.
    let grid = halton_grid(map.domain(), policy.sup_points);
    let mut max_residual = 0.0f64;
    let mut gamma_sq = 0.0f64;
    let mut sigma_sq = 0.0f64;
    let mut mc_se = 0.0f64;
    let mut any_mc = false;

    for (idx, f) in family.members().iter().enumerate() {
        let beta = &betas[idx].beta;
        let mut sup = 0.0f64;
        for x in grid.iter().chain(design.points()) {
            sup = sup.max(residual_value(map, beta, f, x).abs());
        }
        max_residual = max_residual.max(sup);

        let q_eps2 = ctx.integrate_with_map_hints(
            |x: &[f64]| {
                let h = map.evaluate_unchecked(x);
                let q = profile.q_of_features(&h);
                let eps = residual_value(map, beta, f, x);
                q * eps * eps
            },
            f.hints(),
        )?;
        gamma_sq = gamma_sq.max(q_eps2.value.max(0.0));
        if let OracleAccuracy::MonteCarlo { std_error, .. } = q_eps2.accuracy {
            any_mc = true;
            mc_se = mc_se.max(std_error);
        }
        if let OracleAccuracy::MonteCarlo { std_error, .. } = &betas[idx].accuracy {
            any_mc = true;
            mc_se = mc_se.max(*std_error);
        }
        sigma_sq = sigma_sq.max(betas[idx].modelling_error);
    }

    let l_sq = max_residual * max_residual * q_sup;
    let whitened = design.whitened_empirical_gram(ctx.gram())?;
    let lambda_min_whitened = min_eigenvalue(&whitened);
    let d = map.dim() as f64;
    let ratio_a = p_q2 / n as f64;
    let ratio_b = q_sup * (2.0 * d).ln() / n as f64;
    // Small slack on the orderings: γ² uses exact moments while L² and ‖q‖∞
    // are grid estimates from below.
    let slack = 1e-9 * (1.0 + gamma_sq.abs());

    Ok(DiagnosticsReport {
        n,
        dim: map.dim(),
        envelope: family.envelope(),
        max_residual,
        gamma_sq,
        l_sq,
        sigma_sq,
        p_q,
        p_q2,
        q_sup,
        condition_ratio_a: ratio_a,
        condition_ratio_b: ratio_b,
        condition_pass: ratio_a.min(ratio_b) <= 1.0,
        lambda_min_whitened,
        trace_identity_gap: (p_q - d).abs(),
        ordering_gamma_le_l: gamma_sq <= l_sq + slack,
        ordering_gamma_le_sigma_qsup: gamma_sq <= sigma_sq * q_sup + slack,
        oracle_mc_std_error: mc_se,
        oracle_note: if any_mc {
            "residual moments used the seeded Monte Carlo oracle; std error attached".into()
        } else {
            "all moments from composite Gauss-Legendre quadrature".into()
        },
        design_seed: seed,
    })
}

/// Check the residual envelope bound M_n ≤ (1 + ‖q‖∞^{1/2}) ‖F‖∞.
/// Returns (holds, margin) with margin = bound − M_n.
pub fn residual_envelope_check(report: &DiagnosticsReport) -> (bool, f64) {
    let bound = (1.0 + report.q_sup.sqrt()) * report.envelope;
    let margin = bound - report.max_residual;
    (margin >= 0.0, margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{make_basis, BasisSpec, Domain};
    use crate::response::{Response, ResponseFamily};
    use approx::assert_abs_diff_eq;

    fn small_policy() -> GridPolicy {
        GridPolicy { sup_points: 5_000 }
    }

    #[test]
    fn span_family_zeroes_every_residual_quantity() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 3 }, model.domain(), true).unwrap();
        let family = ResponseFamily::from_basis(&map, &small_policy()).unwrap();
        let report = diagnose(&model, &map, &family, 128, 3, &small_policy()).unwrap();
        assert!(report.max_residual < 1e-9, "M = {}", report.max_residual);
        assert!(report.gamma_sq < 1e-12);
        assert!(report.l_sq < 1e-12);
        assert!(report.sigma_sq < 1e-12);
        assert!(report.trace_identity_gap < 1e-8);
        let (ok, margin) = residual_envelope_check(&report);
        assert!(ok && margin > 0.0);
    }

    #[test]
    fn intercept_only_identities() {
        // With q ≡ 1 and d = 1: γ² = σ² and L² = M² exactly.
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 0 }, model.domain(), true).unwrap();
        let family = ResponseFamily::step(3, 0.25, 0.75, model.domain()).unwrap();
        let report = diagnose(&model, &map, &family, 64, 5, &small_policy()).unwrap();
        assert_abs_diff_eq!(report.q_sup, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.gamma_sq, report.sigma_sq, epsilon = 1e-12);
        assert_abs_diff_eq!(
            report.l_sq,
            report.max_residual * report.max_residual,
            epsilon = 1e-12
        );
        assert!(report.ordering_gamma_le_l);
        assert!(report.ordering_gamma_le_sigma_qsup);
    }

    #[test]
    fn intercept_only_step_envelope_margin() {
        // f = 1{x > 1/2} against the constant basis: ε = f − 1/2, M = 1/2,
        // and the bound is (1 + 1) · 1 = 2.
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 0 }, model.domain(), true).unwrap();
        let f = Response::piecewise(
            "step-half",
            |x: &[f64]| if x[0] > 0.5 { 1.0 } else { 0.0 },
            vec![vec![0.5]],
        );
        let family = ResponseFamily::singleton(f, 1.0).unwrap();
        let report = diagnose(&model, &map, &family, 64, 7, &small_policy()).unwrap();
        assert_abs_diff_eq!(report.max_residual, 0.5, epsilon = 1e-9);
        let (ok, margin) = residual_envelope_check(&report);
        assert!(ok);
        assert_abs_diff_eq!(margin, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn quadratic_residual_moment_closed_form() {
        // f(x) = x² on basis (1, x) under Uniform[0,1]:
        // σ² = ∫ (x² − x + 1/6)² dx = 1/180.
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Monomial { degree: 1 }, model.domain(), true).unwrap();
        let f = Response::smooth("x^2", |x: &[f64]| x[0] * x[0]);
        let family = ResponseFamily::singleton(f, 1.0).unwrap();
        let report = diagnose(&model, &map, &family, 256, 11, &small_policy()).unwrap();
        assert_abs_diff_eq!(report.sigma_sq, 1.0 / 180.0, epsilon = 1e-12);
        assert!(report.gamma_sq <= report.sigma_sq * report.q_sup + 1e-12);
    }

    #[test]
    fn step_family_diagnostics_pass_envelope_check() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 7 }, model.domain(), true).unwrap();
        for seed in [1u64, 2, 3] {
            let family = ResponseFamily::step(20, 0.05, 0.95, model.domain()).unwrap();
            let report = diagnose(&model, &map, &family, 512, seed, &small_policy()).unwrap();
            let (ok, margin) = residual_envelope_check(&report);
            assert!(ok && margin > 0.0, "seed {seed}: margin {margin}");
            assert!(report.ordering_gamma_le_l);
            assert!(report.ordering_gamma_le_sigma_qsup);
        }
    }

    #[test]
    fn diagnose_is_deterministic() {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 4 }, model.domain(), true).unwrap();
        let family = ResponseFamily::oscillatory(4, 0.5, 2.0, model.domain()).unwrap();
        let a = diagnose(&model, &map, &family, 128, 9, &small_policy()).unwrap();
        let b = diagnose(&model, &map, &family, 128, 9, &small_policy()).unwrap();
        assert_eq!(a.gamma_sq, b.gamma_sq);
        assert_eq!(a.max_residual, b.max_residual);
        assert_eq!(a.lambda_min_whitened, b.lambda_min_whitened);
    }
}
