//! Property-based invariants that cut across modules.

use proptest::prelude::*;

use surrofit::features::{make_basis, BasisSpec, Domain};
use surrofit::linalg::Mat;
use surrofit::linear_core::{empirical_gram, factorize, leverage, FactorPolicy};
use surrofit::population::PopulationModel;
use surrofit::response::ResponseFamily;
use surrofit::risk::{excess_risk, worst_case_risk};
use surrofit::surrogate::{draw_design, fit_many, PopulationContext};

/// Distinct, strictly increasing knots inside (0, 1).
fn knot_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..0.95, 1..max_len).prop_map(|mut v| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out: Vec<f64> = Vec::with_capacity(v.len());
        for k in v {
            if out.last().map_or(true, |&prev| k > prev + 1e-6) {
                out.push(k);
            }
        }
        out
    })
}

fn basis_strategy() -> impl Strategy<Value = (BasisSpec, bool)> {
    let spec = prop_oneof![
        (0usize..6).prop_map(|degree| BasisSpec::Monomial { degree }),
        (0usize..6).prop_map(|degree| BasisSpec::Legendre { degree }),
        (1usize..4).prop_map(|max_frequency| BasisSpec::Fourier { max_frequency }),
        knot_strategy(5).prop_map(|knots| BasisSpec::Indicator { knots: vec![knots] }),
    ];
    (spec, any::<bool>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluate_returns_d_finite_values((spec, intercept) in basis_strategy(), xs in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
        let domain = Domain::unit_box(1);
        let Ok(map) = make_basis(&spec, &domain, intercept) else {
            // Zero-dimensional combinations are rejected; nothing to check.
            return Ok(());
        };
        for x in xs {
            let h = map.evaluate(&[x]).unwrap();
            prop_assert_eq!(h.len(), map.dim());
            prop_assert!(h.iter().all(|v| v.is_finite()));
            if intercept {
                prop_assert_eq!(h[0], 1.0);
            }
        }
    }

    #[test]
    fn indicator_components_partition_pointwise(knots in knot_strategy(6)) {
        let domain = Domain::unit_box(1);
        let spec = BasisSpec::Indicator { knots: vec![knots] };
        let map = make_basis(&spec, &domain, false).unwrap();
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0;
            let h = map.evaluate(&[x]).unwrap();
            let total: f64 = h.iter().sum();
            prop_assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn leverage_is_nonnegative_and_invariant_under_reparametrization(
        seed in 0u64..500,
        perturbation in 0.0f64..0.4,
    ) {
        let domain = Domain::unit_box(1);
        let map = make_basis(&BasisSpec::Legendre { degree: 4 }, &domain, true).unwrap();
        let d = map.dim();
        // Well-conditioned A = I + small perturbation from a seeded stream.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = Mat::identity(d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] += perturbation * (rng.random::<f64>() - 0.5);
            }
        }
        let remapped = map.compose_linear(a).unwrap();

        let pts: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random::<f64>()]).collect();
        let rows_h: Vec<Vec<f64>> = pts.iter().map(|x| map.evaluate(x).unwrap()).collect();
        let rows_a: Vec<Vec<f64>> = pts.iter().map(|x| remapped.evaluate(x).unwrap()).collect();
        let fh = factorize(&empirical_gram(&Mat::from_rows(&rows_h)), &FactorPolicy::default()).unwrap();
        let fa = factorize(&empirical_gram(&Mat::from_rows(&rows_a)), &FactorPolicy::default()).unwrap();
        let ph = leverage(&fh, &map).unwrap();
        let pa = leverage(&fa, &remapped).unwrap();
        for x in &pts {
            let qa = ph.q(x).unwrap();
            let qb = pa.q(x).unwrap();
            prop_assert!(qa >= 0.0);
            prop_assert!((qa - qb).abs() <= 1e-8 * (1.0 + qa.abs()));
        }
    }

    #[test]
    fn excess_risk_nonnegative_and_zero_only_at_the_optimum(
        seed in 0u64..200,
        shift in -2.0f64..2.0,
    ) {
        let model = PopulationModel::uniform(Domain::unit_box(1));
        let map = make_basis(&BasisSpec::Legendre { degree: 3 }, model.domain(), true).unwrap();
        let ctx = PopulationContext::new(&model, &map).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let beta_star: Vec<f64> = (0..map.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut beta_hat = beta_star.clone();
        let risk_same = excess_risk(&beta_hat, &beta_star, ctx.factor()).unwrap();
        prop_assert!(risk_same.abs() <= 1e-15);
        beta_hat[1] += shift;
        let risk_shifted = excess_risk(&beta_hat, &beta_star, ctx.factor()).unwrap();
        prop_assert!(risk_shifted >= -1e-12);
        if shift.abs() > 1e-6 {
            prop_assert!(risk_shifted > 0.0);
        }
    }
}

#[test]
fn worst_case_matches_exhaustive_singleton_sweep() {
    let model = PopulationModel::uniform(Domain::unit_box(1));
    let map = make_basis(&BasisSpec::Legendre { degree: 4 }, model.domain(), true).unwrap();
    let family = ResponseFamily::oscillatory(12, 0.4, 2.4, model.domain()).unwrap();
    let ctx = PopulationContext::new(&model, &map).unwrap();
    let betas = ctx.betas(&family).unwrap();
    let design = draw_design(&model, &map, 384, 55).unwrap();
    let report = worst_case_risk(&design, &family, &ctx, &betas).unwrap();
    let mut best = f64::NEG_INFINITY;
    for idx in 0..family.len() {
        let single = ResponseFamily::singleton(family.member(idx).clone(), 1.0).unwrap();
        let fit = fit_many(&design, &single).unwrap();
        let e = excess_risk(fit.coefficients(0).unwrap(), &betas[idx].beta, ctx.factor()).unwrap();
        best = best.max(e);
    }
    assert_eq!(report.worst_case, best);
}

#[test]
fn residual_envelope_bound_holds_for_mixed_families() {
    // sup |ε_f| ≤ (1 + ‖q‖∞^{1/2}) ‖F‖∞ on an evaluation grid.
    use surrofit::grid::GridPolicy;
    let model = PopulationModel::uniform(Domain::unit_box(1));
    let map = make_basis(&BasisSpec::Legendre { degree: 6 }, model.domain(), true).unwrap();
    let policy = GridPolicy { sup_points: 20_000 };
    for family in [
        ResponseFamily::oscillatory(8, 0.3, 4.0, model.domain()).unwrap(),
        ResponseFamily::step(8, 0.1, 0.9, model.domain()).unwrap(),
    ] {
        let report =
            surrofit::diagnostics::diagnose(&model, &map, &family, 256, 42, &policy).unwrap();
        let (holds, margin) = surrofit::diagnostics::residual_envelope_check(&report);
        assert!(holds, "margin {margin}");
    }
}
