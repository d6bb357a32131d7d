//! Response functions and finite indexed families.
//!
//! A family stands in for a (possibly infinite) collection of black-box
//! responses via a finite index grid; suprema over the family are therefore
//! lower bounds of the true suprema. Each response carries regularity hints
//! so the population oracle can pick its integration route.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{Domain, FeatureMap};
use crate::grid::{halton_grid, GridPolicy};
use crate::population::IntegrandHints;

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A single evaluable response function.
#[derive(Clone)]
pub struct Response {
    label: String,
    eval: EvalFn,
    hints: IntegrandHints,
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Response")
            .field("label", &self.label)
            .field("smooth", &self.hints.smooth)
            .finish()
    }
}

impl Response {
    pub fn smooth(label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Response {
            label: label.into(),
            eval: Arc::new(eval),
            hints: IntegrandHints::smooth(),
        }
    }

    /// Piecewise-smooth with known per-axis discontinuity locations.
    pub fn piecewise(
        label: impl Into<String>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<Vec<f64>>,
    ) -> Self {
        Response {
            label: label.into(),
            eval: Arc::new(eval),
            hints: IntegrandHints {
                smooth: false,
                breakpoints: Some(breakpoints),
            },
        }
    }

    /// No declared structure; population moments fall back to Monte Carlo.
    pub fn rough(label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Response {
            label: label.into(),
            eval: Arc::new(eval),
            hints: IntegrandHints {
                smooth: false,
                breakpoints: None,
            },
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hints(&self) -> &IntegrandHints {
        &self.hints
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// The response scaled by a constant.
    pub fn scaled(&self, c: f64) -> Response {
        let inner = Arc::clone(&self.eval);
        Response {
            label: format!("{} * {c}", self.label),
            eval: Arc::new(move |x| c * inner(x)),
            hints: self.hints.clone(),
        }
    }
}

/// A finite indexed family with a uniform envelope bound ‖F‖∞.
#[derive(Clone, Debug)]
pub struct ResponseFamily {
    members: Vec<Response>,
    envelope: f64,
}

impl ResponseFamily {
    pub fn new(members: Vec<Response>, envelope: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if !(envelope.is_finite() && envelope >= 0.0) {
            return Err(Error::Invalid("envelope must be finite and ≥ 0".into()));
        }
        Ok(ResponseFamily { members, envelope })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Response] {
        &self.members
    }

    pub fn member(&self, idx: usize) -> &Response {
        &self.members[idx]
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// Check |f(x)| ≤ ‖F‖∞ at the given points.
    pub fn check_envelope(&self, points: &[Vec<f64>]) -> Result<()> {
        let tol = self.envelope * (1.0 + 1e-12) + 1e-12;
        for f in &self.members {
            for x in points {
                let v = f.eval(x);
                if !v.is_finite() || v.abs() > tol {
                    return Err(Error::Invalid(format!(
                        "response '{}' breaks its envelope at {x:?}: {v}",
                        f.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Family consisting of the components of a feature map, so every member
    /// lies in the span by construction. The envelope is estimated on a
    /// deterministic grid.
    pub fn from_basis(map: &FeatureMap, policy: &GridPolicy) -> Result<Self> {
        let mut members = Vec::with_capacity(map.dim());
        let mut envelope = 0.0f64;
        let grid = halton_grid(map.domain(), policy.sup_points.min(20_000));
        for x in &grid {
            let h = map.evaluate_unchecked(x);
            for v in h {
                envelope = envelope.max(v.abs());
            }
        }
        for j in 0..map.dim() {
            let m = map.clone();
            let eval = move |x: &[f64]| m.evaluate_unchecked(x)[j];
            let hints = IntegrandHints {
                smooth: map.is_smooth(),
                breakpoints: map.breakpoints(),
            };
            members.push(Response {
                label: format!("basis[{j}]"),
                eval: Arc::new(eval),
                hints,
            });
        }
        ResponseFamily::new(members, envelope)
    }

    /// Smooth oscillatory family f_k(x) = sin(2π ω_k t + φ_k) in the unit
    /// coordinate t of the first axis, with frequencies on a uniform grid
    /// and staggered phases.
    pub fn oscillatory(
        count: usize,
        freq_min: f64,
        freq_max: f64,
        domain: &Domain,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyFamily);
        }
        if !(freq_min.is_finite() && freq_max.is_finite()) || freq_min > freq_max {
            return Err(Error::Invalid("bad frequency range".into()));
        }
        let (lo, hi) = domain.bounds()[0];
        let members = (0..count)
            .map(|k| {
                let omega = if count == 1 {
                    freq_min
                } else {
                    freq_min + (freq_max - freq_min) * k as f64 / (count - 1) as f64
                };
                let phase = 2.0 * std::f64::consts::PI * 0.618_033_988_749_895 * k as f64;
                Response::smooth(format!("osc[{k}] w={omega:.4}"), move |x: &[f64]| {
                    let t = (x[0] - lo) / (hi - lo);
                    (2.0 * std::f64::consts::PI * omega * t + phase).sin()
                })
            })
            .collect();
        ResponseFamily::new(members, 1.0)
    }

    /// Polynomial responses in the unit coordinate of the first axis. Each
    /// row of `coefficients` is one member: f(x) = Σ_j c_j t^j.
    pub fn polynomial(coefficients: Vec<Vec<f64>>, domain: &Domain) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let (lo, hi) = domain.bounds()[0];
        let envelope = coefficients
            .iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let members = coefficients
            .into_iter()
            .enumerate()
            .map(|(k, coeffs)| {
                Response::smooth(format!("poly[{k}]"), move |x: &[f64]| {
                    let t = (x[0] - lo) / (hi - lo);
                    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
                })
            })
            .collect();
        ResponseFamily::new(members, envelope)
    }

    /// Step functions f_k = 1{x_0 ≤ θ_k} with thresholds on a uniform grid
    /// strictly inside the first axis.
    pub fn step(count: usize, theta_min: f64, theta_max: f64, domain: &Domain) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyFamily);
        }
        let (lo, hi) = domain.bounds()[0];
        if !(theta_min > lo && theta_max < hi && theta_min <= theta_max) {
            return Err(Error::Invalid(
                "step thresholds must lie strictly inside the domain".into(),
            ));
        }
        let p = domain.dim();
        let members = (0..count)
            .map(|k| {
                let theta = if count == 1 {
                    theta_min
                } else {
                    theta_min + (theta_max - theta_min) * k as f64 / (count - 1) as f64
                };
                let mut breakpoints = vec![Vec::new(); p];
                breakpoints[0].push(theta);
                Response::piecewise(
                    format!("step[{k}] t={theta:.4}"),
                    move |x: &[f64]| if x[0] <= theta { 1.0 } else { 0.0 },
                    breakpoints,
                )
            })
            .collect();
        ResponseFamily::new(members, 1.0)
    }

    /// Singleton family.
    pub fn singleton(response: Response, envelope: f64) -> Result<Self> {
        ResponseFamily::new(vec![response], envelope)
    }
}
