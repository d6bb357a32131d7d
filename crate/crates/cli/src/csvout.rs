//! CSV emission with fixed headers and 10-significant-digit scientific
//! notation, so reruns are byte-identical and regression tests can compare
//! files directly.

use surrofit::applications::CdfEstimate;
use surrofit::risk::RateCurve;

/// Scientific notation with 10 significant digits.
pub fn sci(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.9e}")
    }
}

fn slope_cell(curve: &RateCurve) -> String {
    sci(curve.slope.unwrap_or(f64::NAN))
}

/// Rate-curve CSV: `n,d,mean_error,stderr,replications,slope`. The fitted
/// slope is a property of the whole curve and repeats on every row.
pub fn rate_csv(curve: &RateCurve) -> String {
    let mut out = String::from("n,d,mean_error,stderr,replications,slope\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.n,
            p.dim,
            sci(p.mean_error),
            sci(p.std_error),
            curve.replications,
            slope_cell(curve),
        ));
    }
    out
}

/// Rate-curve CSV with the extra estimator-kind column used by the
/// control-variate comparison.
pub fn rate_csv_with_kind(curve: &RateCurve, kind: &str) -> String {
    let mut out = String::from("n,d,mean_error,stderr,replications,slope,estimator\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.n,
            p.dim,
            sci(p.mean_error),
            sci(p.std_error),
            curve.replications,
            slope_cell(curve),
            kind,
        ));
    }
    out
}

/// Ratio series `n,ratio` for the single-response law check.
pub fn ratio_csv(ratios: &[(usize, f64)]) -> String {
    let mut out = String::from("n,ratio\n");
    for &(n, r) in ratios {
        out.push_str(&format!("{},{}\n", n, sci(r)));
    }
    out
}

/// Per-level CDF estimates `y,raw,corrected,truth`; the truth cell is empty
/// when no true CDF is known.
pub fn cdf_csv(est: &CdfEstimate) -> String {
    let mut out = String::from("y,raw,corrected,truth\n");
    for (i, &y) in est.y.iter().enumerate() {
        let truth = est
            .truth
            .as_ref()
            .map(|t| sci(t[i]))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            sci(y),
            sci(est.raw[i]),
            sci(est.corrected[i]),
            truth,
        ));
    }
    out
}

/// Quantile sweep summary, one row per n.
pub fn quantile_summary_csv(rows: &[QuantileSummaryRow]) -> String {
    let mut out =
        String::from("n,mean_quantile,mean_abs_error,stderr,replications,grid_step,saturated\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            sci(r.mean_quantile),
            sci(r.mean_abs_error),
            sci(r.std_error),
            r.replications,
            sci(r.grid_step),
            r.saturated,
        ));
    }
    out
}

pub struct QuantileSummaryRow {
    pub n: usize,
    pub mean_quantile: f64,
    /// Mean |q̂ − q*| when the truth is known, NaN otherwise.
    pub mean_abs_error: f64,
    pub std_error: f64,
    pub replications: usize,
    pub grid_step: f64,
    /// Replicates whose corrected CDF never reached the level.
    pub saturated: usize,
}

/// Estimated objective curve `theta,objective,stderr` (mean and standard
/// error across replications).
pub fn objective_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("theta,objective,stderr\n");
    for &(theta, obj, se) in rows {
        out.push_str(&format!("{},{},{}\n", sci(theta), sci(obj), sci(se)));
    }
    out
}

pub struct SaaSummaryRow {
    pub n: usize,
    pub mean_theta_hat: f64,
    /// Mean |θ̂ − θ*| when the true minimizer is known, NaN otherwise.
    pub mean_abs_error: f64,
    pub std_error: f64,
    pub replications: usize,
}

pub fn saa_summary_csv(rows: &[SaaSummaryRow]) -> String {
    let mut out = String::from("n,mean_theta_hat,mean_abs_error,stderr,replications\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            sci(r.mean_theta_hat),
            sci(r.mean_abs_error),
            sci(r.std_error),
            r.replications,
        ));
    }
    out
}
