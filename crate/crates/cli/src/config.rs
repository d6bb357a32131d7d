//! Declarative experiment configs: JSON in, fully validated typed config
//! out. Validation collects every problem it can find (unknown keys,
//! missing/ill-typed fields, semantic inconsistencies) instead of stopping
//! at the first, and `to_json` round-trips through `parse_config`.
//!
//! One experiment per file. The documented grammar:
//!
//! ```json
//! {
//!   "kind": "single-rate | worst-case-rate | cv-rate | quantile | saa | diagnose",
//!   "seed": 20240801,
//!   "n_grid": [256, 512, 1024],
//!   "replications": 100,
//!   "output_dir": "out",
//!   "model": { "type": "uniform-box", "bounds": [[0.0, 1.0]] },
//!   "basis": { "kind": "legendre", "degree": 5, "intercept": true },
//!   "schedule": { "kind": "legendre", "intercept": true, "exponent": 0.333 },
//!   "family": { "name": "oscillatory", "count": 25, "min_freq": 0.5, "max_freq": 3.0 },
//!   "response": { "name": "polynomial", "coefficients": [0.0, 0.0, 1.0] },
//!   "controls": { "kind": "legendre", "degree": 8 },
//!   "method": "cv",
//!   "task": { "transform": "identity", "level": 0.9,
//!             "y_min": 0.0, "y_max": 1.0, "y_points": 101,
//!             "truth": "uniform-identity" },
//!   "grid_policy": { "sup_points": 100000 },
//!   "oracle": { "quad_order": 64, "mc_samples": 10000000, "mc_seed": 7919 }
//! }
//! ```
//!
//! `basis` and `schedule` are mutually exclusive; a gaussian model adds
//! `"mean"` and `"sd"` arrays. Sections that a kind does not use are
//! rejected, so a config never silently carries dead settings.

use serde_json::{json, Map, Value};

pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_OUTPUT_DIR: &str = "out";
pub const DEFAULT_SUP_POINTS: usize = 100_000;
pub const DEFAULT_QUAD_ORDER: usize = 64;
pub const DEFAULT_MC_SAMPLES: usize = 10_000_000;
pub const DEFAULT_MC_SEED: u64 = 7919;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    SingleRate,
    WorstCaseRate,
    CvRate,
    Quantile,
    Saa,
    Diagnose,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SingleRate => "single-rate",
            ExperimentKind::WorstCaseRate => "worst-case-rate",
            ExperimentKind::CvRate => "cv-rate",
            ExperimentKind::Quantile => "quantile",
            ExperimentKind::Saa => "saa",
            ExperimentKind::Diagnose => "diagnose",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "single-rate" => ExperimentKind::SingleRate,
            "worst-case-rate" => ExperimentKind::WorstCaseRate,
            "cv-rate" => ExperimentKind::CvRate,
            "quantile" => ExperimentKind::Quantile,
            "saa" => ExperimentKind::Saa,
            "diagnose" => ExperimentKind::Diagnose,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    UniformBox {
        bounds: Vec<(f64, f64)>,
    },
    Gaussian {
        bounds: Vec<(f64, f64)>,
        mean: Vec<f64>,
        sd: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn bounds(&self) -> &[(f64, f64)] {
        match self {
            ModelSpec::UniformBox { bounds } | ModelSpec::Gaussian { bounds, .. } => bounds,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisNode {
    pub kind: String,
    pub degree: Option<usize>,
    pub knots: Option<Vec<Vec<f64>>>,
    pub intercept: bool,
    /// Domain bounds of the basis; defaults to the model's box and must
    /// contain it.
    pub domain: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleNode {
    pub kind: String,
    pub intercept: bool,
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasisChoice {
    Fixed(BasisNode),
    Scheduled(ScheduleNode),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    Oscillatory {
        count: usize,
        min_freq: f64,
        max_freq: f64,
    },
    Polynomial {
        coefficients: Vec<Vec<f64>>,
    },
    Step {
        count: usize,
        min: f64,
        max: f64,
    },
    /// The components of the configured basis (everything in the span).
    BasisSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResponseSpec {
    Polynomial { coefficients: Vec<f64> },
    Oscillatory { freq: f64, phase: f64 },
    Step { threshold: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlsSpec {
    pub kind: String,
    /// Fixed degree, or
    pub degree: Option<usize>,
    /// a power-law dimension schedule.
    pub exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskSpec {
    Quantile {
        transform: String,
        level: f64,
        y_min: f64,
        y_max: f64,
        y_points: usize,
        truth: Option<String>,
    },
    Saa {
        objective: String,
        theta_min: f64,
        theta_max: f64,
        theta_points: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Vanilla,
    Cv,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Cv => "cv",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replications: usize,
    pub n_grid: Vec<usize>,
    pub output_dir: String,
    pub model: ModelSpec,
    pub basis: Option<BasisChoice>,
    pub family: Option<FamilySpec>,
    pub response: Option<ResponseSpec>,
    pub controls: Option<ControlsSpec>,
    pub method: Option<Method>,
    pub task: Option<TaskSpec>,
    pub sup_points: usize,
    pub quad_order: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

/// Accumulates validation problems; the parser reports all of them.
struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn new() -> Self {
        Validator { errors: Vec::new() }
    }

    fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn check_keys(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.error(format!("{path}: unknown key '{key}'"));
            }
        }
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(o) => Some(o),
            None => {
                self.error(format!("{path}: expected an object"));
                None
            }
        }
    }

    fn str_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<String> {
        match obj.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.error(format!("{path}.{key}: expected a string"));
                None
            }
            None => {
                self.error(format!("{path}.{key}: missing required field"));
                None
            }
        }
    }

    fn f64_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match obj.get(key) {
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.error(format!("{path}.{key}: expected a finite number"));
                    None
                }
            },
            None => {
                self.error(format!("{path}.{key}: missing required field"));
                None
            }
        }
    }

    fn usize_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<usize> {
        match obj.get(key) {
            Some(v) => match v.as_u64() {
                Some(x) => Some(x as usize),
                None => {
                    self.error(format!("{path}.{key}: expected a nonnegative integer"));
                    None
                }
            },
            None => {
                self.error(format!("{path}.{key}: missing required field"));
                None
            }
        }
    }

    fn u64_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<u64> {
        match obj.get(key) {
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    self.error(format!("{path}.{key}: expected a nonnegative integer"));
                    None
                }
            },
            None => {
                self.error(format!("{path}.{key}: missing required field"));
                None
            }
        }
    }

    fn bool_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<bool> {
        match obj.get(key) {
            Some(Value::Bool(b)) => Some(*b),
            Some(_) => {
                self.error(format!("{path}.{key}: expected a boolean"));
                None
            }
            None => {
                self.error(format!("{path}.{key}: missing required field"));
                None
            }
        }
    }

    fn f64_array(&mut self, v: &Value, path: &str) -> Option<Vec<f64>> {
        let arr = match v.as_array() {
            Some(a) => a,
            None => {
                self.error(format!("{path}: expected an array of numbers"));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, e) in arr.iter().enumerate() {
            match e.as_f64() {
                Some(x) if x.is_finite() => out.push(x),
                _ => {
                    self.error(format!("{path}[{i}]: expected a finite number"));
                    return None;
                }
            }
        }
        Some(out)
    }
}

fn parse_model(val: &Value, v: &mut Validator) -> Option<ModelSpec> {
    let obj = v.object(val, "model")?;
    let type_name = v.str_field(obj, "model", "type");
    let is_gaussian = matches!(type_name.as_deref(), Some("gaussian"));
    let allowed: &[&str] = if is_gaussian {
        &["type", "bounds", "mean", "sd"]
    } else {
        &["type", "bounds"]
    };
    v.check_keys(obj, "model", allowed);

    let bounds = match obj.get("bounds") {
        Some(Value::Array(rows)) => {
            let mut out = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                match v.f64_array(row, &format!("model.bounds[{i}]")) {
                    Some(pair) if pair.len() == 2 && pair[0] < pair[1] => {
                        out.push((pair[0], pair[1]))
                    }
                    Some(_) => {
                        v.error(format!("model.bounds[{i}]: expected [lo, hi] with lo < hi"))
                    }
                    None => {}
                }
            }
            if out.is_empty() {
                v.error("model.bounds: needs at least one axis".to_string());
            }
            out
        }
        _ => {
            v.error("model.bounds: missing or not an array".to_string());
            Vec::new()
        }
    };

    match type_name.as_deref() {
        Some("uniform-box") => Some(ModelSpec::UniformBox { bounds }),
        Some("gaussian") => {
            let mean = obj
                .get("mean")
                .and_then(|m| v.f64_array(m, "model.mean"))
                .unwrap_or_default();
            let sd = obj
                .get("sd")
                .and_then(|m| v.f64_array(m, "model.sd"))
                .unwrap_or_default();
            if mean.len() != bounds.len() || sd.len() != bounds.len() {
                v.error("model: mean and sd must match the number of axes".to_string());
            }
            if sd.iter().any(|&s| s <= 0.0) {
                v.error("model.sd: entries must be positive".to_string());
            }
            Some(ModelSpec::Gaussian { bounds, mean, sd })
        }
        Some(other) => {
            v.error(format!(
                "model.type: unknown model '{other}' (expected uniform-box or gaussian)"
            ));
            None
        }
        None => None,
    }
}

const BASIS_KINDS: [&str; 4] = ["monomial", "legendre", "fourier", "indicator"];

fn parse_bounds_array(val: &Value, path: &str, v: &mut Validator) -> Option<Vec<(f64, f64)>> {
    let rows = match val.as_array() {
        Some(r) => r,
        None => {
            v.error(format!("{path}: expected an array of [lo, hi] pairs"));
            return None;
        }
    };
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        match v.f64_array(row, &format!("{path}[{i}]")) {
            Some(pair) if pair.len() == 2 && pair[0] < pair[1] => out.push((pair[0], pair[1])),
            Some(_) => v.error(format!("{path}[{i}]: expected [lo, hi] with lo < hi")),
            None => {}
        }
    }
    if out.is_empty() {
        v.error(format!("{path}: needs at least one axis"));
        return None;
    }
    Some(out)
}

fn parse_basis(val: &Value, v: &mut Validator) -> Option<BasisNode> {
    let obj = v.object(val, "basis")?;
    v.check_keys(obj, "basis", &["kind", "degree", "knots", "intercept", "domain"]);
    let kind = v.str_field(obj, "basis", "kind")?;
    if !BASIS_KINDS.contains(&kind.as_str()) {
        v.error(format!("basis.kind: unknown kind '{kind}'"));
    }
    let intercept = v.bool_field(obj, "basis", "intercept").unwrap_or(false);
    let degree = obj
        .get("degree")
        .map(|d| match d.as_u64() {
            Some(x) => Some(x as usize),
            None => {
                v.error("basis.degree: expected a nonnegative integer".to_string());
                None
            }
        })
        .flatten();
    let knots = obj.get("knots").map(|k| {
        let mut axes = Vec::new();
        if let Some(rows) = k.as_array() {
            for (i, row) in rows.iter().enumerate() {
                if let Some(axis) = v.f64_array(row, &format!("basis.knots[{i}]")) {
                    axes.push(axis);
                }
            }
        } else {
            v.error("basis.knots: expected an array of per-axis knot arrays".to_string());
        }
        axes
    });
    if kind == "indicator" {
        if knots.is_none() {
            v.error("basis: indicator kind requires 'knots'".to_string());
        }
        if degree.is_some() {
            v.error("basis: indicator kind does not take 'degree'".to_string());
        }
    } else {
        if degree.is_none() {
            v.error(format!("basis: kind '{kind}' requires 'degree'"));
        }
        if knots.is_some() {
            v.error(format!("basis: kind '{kind}' does not take 'knots'"));
        }
    }
    let domain = obj
        .get("domain")
        .and_then(|d| parse_bounds_array(d, "basis.domain", v));
    Some(BasisNode {
        kind,
        degree,
        knots,
        intercept,
        domain,
    })
}

fn parse_schedule(val: &Value, v: &mut Validator) -> Option<ScheduleNode> {
    let obj = v.object(val, "schedule")?;
    v.check_keys(obj, "schedule", &["kind", "intercept", "exponent"]);
    let kind = v.str_field(obj, "schedule", "kind")?;
    if !BASIS_KINDS.contains(&kind.as_str()) {
        v.error(format!("schedule.kind: unknown kind '{kind}'"));
    }
    let intercept = v.bool_field(obj, "schedule", "intercept").unwrap_or(false);
    let exponent = v.f64_field(obj, "schedule", "exponent").unwrap_or(0.5);
    if !(exponent > 0.0 && exponent < 1.0) {
        v.error("schedule.exponent: must lie in (0, 1)".to_string());
    }
    Some(ScheduleNode {
        kind,
        intercept,
        exponent,
    })
}

fn parse_family(val: &Value, v: &mut Validator) -> Option<FamilySpec> {
    let obj = v.object(val, "family")?;
    let name = v.str_field(obj, "family", "name")?;
    match name.as_str() {
        "oscillatory" => {
            v.check_keys(obj, "family", &["name", "count", "min_freq", "max_freq"]);
            let count = v.usize_field(obj, "family", "count").unwrap_or(0);
            let min_freq = v.f64_field(obj, "family", "min_freq").unwrap_or(0.0);
            let max_freq = v.f64_field(obj, "family", "max_freq").unwrap_or(0.0);
            if count == 0 {
                v.error("family.count: must be ≥ 1".to_string());
            }
            if min_freq > max_freq {
                v.error("family: min_freq must be ≤ max_freq".to_string());
            }
            Some(FamilySpec::Oscillatory {
                count,
                min_freq,
                max_freq,
            })
        }
        "polynomial" => {
            v.check_keys(obj, "family", &["name", "coefficients"]);
            let mut coefficients = Vec::new();
            match obj.get("coefficients").and_then(Value::as_array) {
                Some(rows) if !rows.is_empty() => {
                    for (i, row) in rows.iter().enumerate() {
                        if let Some(c) = v.f64_array(row, &format!("family.coefficients[{i}]")) {
                            coefficients.push(c);
                        }
                    }
                }
                _ => v.error(
                    "family.coefficients: expected a nonempty array of coefficient rows"
                        .to_string(),
                ),
            }
            Some(FamilySpec::Polynomial { coefficients })
        }
        "step" => {
            v.check_keys(obj, "family", &["name", "count", "min", "max"]);
            let count = v.usize_field(obj, "family", "count").unwrap_or(0);
            let min = v.f64_field(obj, "family", "min").unwrap_or(0.0);
            let max = v.f64_field(obj, "family", "max").unwrap_or(0.0);
            if count == 0 {
                v.error("family.count: must be ≥ 1".to_string());
            }
            if min > max {
                v.error("family: min must be ≤ max".to_string());
            }
            Some(FamilySpec::Step { count, min, max })
        }
        "basis-span" => {
            v.check_keys(obj, "family", &["name"]);
            Some(FamilySpec::BasisSpan)
        }
        other => {
            v.error(format!("family.name: unknown family '{other}'"));
            None
        }
    }
}

fn parse_response(val: &Value, v: &mut Validator) -> Option<ResponseSpec> {
    let obj = v.object(val, "response")?;
    let name = v.str_field(obj, "response", "name")?;
    match name.as_str() {
        "polynomial" => {
            v.check_keys(obj, "response", &["name", "coefficients"]);
            let coefficients = obj
                .get("coefficients")
                .and_then(|c| v.f64_array(c, "response.coefficients"))
                .unwrap_or_default();
            if coefficients.is_empty() {
                v.error("response.coefficients: must be nonempty".to_string());
            }
            Some(ResponseSpec::Polynomial { coefficients })
        }
        "oscillatory" => {
            v.check_keys(obj, "response", &["name", "freq", "phase"]);
            let freq = v.f64_field(obj, "response", "freq").unwrap_or(1.0);
            let phase = match obj.get("phase") {
                Some(p) => p.as_f64().unwrap_or_else(|| {
                    v.error("response.phase: expected a number".to_string());
                    0.0
                }),
                None => 0.0,
            };
            Some(ResponseSpec::Oscillatory { freq, phase })
        }
        "step" => {
            v.check_keys(obj, "response", &["name", "threshold"]);
            let threshold = v.f64_field(obj, "response", "threshold").unwrap_or(0.5);
            Some(ResponseSpec::Step { threshold })
        }
        other => {
            v.error(format!("response.name: unknown response '{other}'"));
            None
        }
    }
}

fn parse_controls(val: &Value, v: &mut Validator) -> Option<ControlsSpec> {
    let obj = v.object(val, "controls")?;
    v.check_keys(obj, "controls", &["kind", "degree", "exponent"]);
    let kind = v.str_field(obj, "controls", "kind")?;
    if !BASIS_KINDS.contains(&kind.as_str()) {
        v.error(format!("controls.kind: unknown kind '{kind}'"));
    }
    let degree = obj.get("degree").and_then(|d| d.as_u64()).map(|d| d as usize);
    let exponent = obj.get("exponent").and_then(Value::as_f64);
    match (degree, exponent) {
        (None, None) => v.error("controls: needs 'degree' or 'exponent'".to_string()),
        (Some(_), Some(_)) => {
            v.error("controls: 'degree' and 'exponent' are mutually exclusive".to_string())
        }
        (None, Some(e)) if !(e > 0.0 && e < 1.0) => {
            v.error("controls.exponent: must lie in (0, 1)".to_string())
        }
        _ => {}
    }
    Some(ControlsSpec {
        kind,
        degree,
        exponent,
    })
}

fn parse_task(val: &Value, kind: ExperimentKind, v: &mut Validator) -> Option<TaskSpec> {
    let obj = v.object(val, "task")?;
    match kind {
        ExperimentKind::Quantile => {
            v.check_keys(
                obj,
                "task",
                &["transform", "level", "y_min", "y_max", "y_points", "truth"],
            );
            let transform = v.str_field(obj, "task", "transform").unwrap_or_default();
            let level = v.f64_field(obj, "task", "level").unwrap_or(0.5);
            let y_min = v.f64_field(obj, "task", "y_min").unwrap_or(0.0);
            let y_max = v.f64_field(obj, "task", "y_max").unwrap_or(1.0);
            let y_points = v.usize_field(obj, "task", "y_points").unwrap_or(0);
            let truth = obj
                .get("truth")
                .map(|t| match t.as_str() {
                    Some(s) => Some(s.to_string()),
                    None => {
                        v.error("task.truth: expected a string".to_string());
                        None
                    }
                })
                .flatten();
            if !(level > 0.0 && level < 1.0) {
                v.error("task.level: must lie in (0, 1)".to_string());
            }
            if y_min >= y_max {
                v.error("task: y_min must be < y_max".to_string());
            }
            if y_points < 2 {
                v.error("task.y_points: must be ≥ 2".to_string());
            }
            if let Some(t) = &truth {
                if t != "uniform-identity" {
                    v.error(format!("task.truth: unknown truth '{t}'"));
                }
            }
            Some(TaskSpec::Quantile {
                transform,
                level,
                y_min,
                y_max,
                y_points,
                truth,
            })
        }
        ExperimentKind::Saa => {
            v.check_keys(
                obj,
                "task",
                &["objective", "theta_min", "theta_max", "theta_points"],
            );
            let objective = v.str_field(obj, "task", "objective").unwrap_or_default();
            let theta_min = v.f64_field(obj, "task", "theta_min").unwrap_or(0.0);
            let theta_max = v.f64_field(obj, "task", "theta_max").unwrap_or(1.0);
            let theta_points = v.usize_field(obj, "task", "theta_points").unwrap_or(0);
            if objective != "quadratic" && !objective.is_empty() {
                v.error(format!("task.objective: unknown objective '{objective}'"));
            }
            if theta_min >= theta_max {
                v.error("task: theta_min must be < theta_max".to_string());
            }
            if theta_points < 2 {
                v.error("task.theta_points: must be ≥ 2".to_string());
            }
            Some(TaskSpec::Saa {
                objective,
                theta_min,
                theta_max,
                theta_points,
            })
        }
        _ => {
            v.error(format!(
                "task: not applicable to kind '{}'",
                kind.as_str()
            ));
            None
        }
    }
}

/// Which top-level sections each kind requires / permits.
fn section_rules(kind: ExperimentKind) -> (&'static [&'static str], &'static [&'static str]) {
    match kind {
        ExperimentKind::SingleRate => (&["basis", "response"], &[]),
        ExperimentKind::WorstCaseRate => (&["family"], &["basis", "schedule"]),
        ExperimentKind::CvRate => (&["controls", "family"], &[]),
        ExperimentKind::Quantile | ExperimentKind::Saa => (&["task", "method"], &["controls"]),
        ExperimentKind::Diagnose => (&["basis", "family"], &[]),
    }
}

/// Parse and fully validate a config. On failure returns every problem
/// found, not just the first.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| vec![format!("config is not valid JSON: {e}")])?;
    let mut v = Validator::new();
    let Some(obj) = value.as_object() else {
        return Err(vec!["config root must be a JSON object".into()]);
    };

    v.check_keys(
        obj,
        "config",
        &[
            "kind",
            "seed",
            "replications",
            "n_grid",
            "output_dir",
            "model",
            "basis",
            "schedule",
            "family",
            "response",
            "controls",
            "method",
            "task",
            "grid_policy",
            "oracle",
        ],
    );

    let kind = v
        .str_field(obj, "config", "kind")
        .and_then(|s| match ExperimentKind::from_str(&s) {
            Some(k) => Some(k),
            None => {
                v.error(format!("config.kind: unknown experiment kind '{s}'"));
                None
            }
        });

    let seed = v.u64_field(obj, "config", "seed");

    let replications = match obj.get("replications") {
        Some(r) => match r.as_u64() {
            Some(x) if x >= 1 => x as usize,
            _ => {
                v.error("config.replications: must be an integer ≥ 1".to_string());
                DEFAULT_REPLICATIONS
            }
        },
        None => DEFAULT_REPLICATIONS,
    };

    let n_grid: Vec<usize> = match obj.get("n_grid").and_then(Value::as_array) {
        Some(arr) if !arr.is_empty() => {
            let mut out = Vec::with_capacity(arr.len());
            for (i, e) in arr.iter().enumerate() {
                match e.as_u64() {
                    Some(x) if x >= 1 => out.push(x as usize),
                    _ => v.error(format!("config.n_grid[{i}]: expected an integer ≥ 1")),
                }
            }
            if out.windows(2).any(|w| w[0] >= w[1]) {
                v.error("config.n_grid: must be strictly increasing".to_string());
            }
            out
        }
        _ => {
            v.error("config.n_grid: missing or empty".to_string());
            Vec::new()
        }
    };

    let output_dir = match obj.get("output_dir") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            v.error("config.output_dir: expected a string".to_string());
            DEFAULT_OUTPUT_DIR.to_string()
        }
        None => DEFAULT_OUTPUT_DIR.to_string(),
    };

    let model = match obj.get("model") {
        Some(m) => parse_model(m, &mut v),
        None => {
            v.error("config.model: missing required section".to_string());
            None
        }
    };

    let basis_node = obj.get("basis").and_then(|b| parse_basis(b, &mut v));
    let schedule_node = obj.get("schedule").and_then(|s| parse_schedule(s, &mut v));
    if basis_node.is_some() && schedule_node.is_some() {
        v.error("config: 'basis' and 'schedule' are mutually exclusive".to_string());
    }
    let basis = basis_node
        .map(BasisChoice::Fixed)
        .or(schedule_node.map(BasisChoice::Scheduled));

    let family = obj.get("family").and_then(|f| parse_family(f, &mut v));
    let response = obj.get("response").and_then(|r| parse_response(r, &mut v));
    let controls = obj.get("controls").and_then(|c| parse_controls(c, &mut v));
    let method = obj.get("method").and_then(|m| match m.as_str() {
        Some("vanilla") => Some(Method::Vanilla),
        Some("cv") => Some(Method::Cv),
        _ => {
            v.error("config.method: expected 'vanilla' or 'cv'".to_string());
            None
        }
    });
    let task = match (obj.get("task"), kind) {
        (Some(t), Some(k)) => parse_task(t, k, &mut v),
        (Some(_), None) => None,
        (None, _) => None,
    };

    // Kind-specific section rules: anything a kind does not use is rejected.
    if let Some(k) = kind {
        let (required, optional) = section_rules(k);
        let present = |name: &str| -> bool {
            match name {
                "basis" => matches!(basis, Some(BasisChoice::Fixed(_))),
                "schedule" => matches!(basis, Some(BasisChoice::Scheduled(_))),
                "family" => family.is_some(),
                "response" => response.is_some(),
                "controls" => controls.is_some(),
                "method" => method.is_some(),
                "task" => task.is_some() || obj.contains_key("task"),
                _ => false,
            }
        };
        for name in required {
            let satisfied = if *name == "family" && matches!(basis, Some(BasisChoice::Scheduled(_)))
            {
                present(name)
            } else if *name == "basis" {
                // "basis" as a requirement accepts either form unless the
                // kind lists schedule separately.
                present("basis") || optional.contains(&"schedule") && present("schedule")
            } else {
                present(name)
            };
            if !satisfied && !(optional.contains(name)) {
                v.error(format!(
                    "config: kind '{}' requires section '{name}'",
                    k.as_str()
                ));
            }
        }
        // Worst-case-rate needs one of basis/schedule.
        if k == ExperimentKind::WorstCaseRate && basis.is_none() {
            v.error("config: kind 'worst-case-rate' requires 'basis' or 'schedule'".to_string());
        }
        // Quantile/saa with method cv need controls.
        if matches!(k, ExperimentKind::Quantile | ExperimentKind::Saa) {
            if method == Some(Method::Cv) && controls.is_none() {
                v.error("config: method 'cv' requires a 'controls' section".to_string());
            }
            if method == Some(Method::Vanilla) && controls.is_some() {
                v.error("config: method 'vanilla' does not take 'controls'".to_string());
            }
        }
        // Reject sections the kind never uses.
        let all = ["basis", "schedule", "family", "response", "controls", "method", "task"];
        for name in all {
            let used = required.contains(&name)
                || optional.contains(&name)
                || (name == "basis" && required.contains(&"basis"))
                || (k == ExperimentKind::WorstCaseRate && (name == "basis" || name == "schedule"))
                || (matches!(k, ExperimentKind::Quantile | ExperimentKind::Saa)
                    && name == "controls");
            if !used && obj.contains_key(name) {
                v.error(format!(
                    "config: section '{name}' is not applicable to kind '{}'",
                    k.as_str()
                ));
            }
        }
    }

    // Grid policy and oracle knobs.
    let mut sup_points = DEFAULT_SUP_POINTS;
    if let Some(gp) = obj.get("grid_policy") {
        if let Some(gpo) = v.object(gp, "grid_policy") {
            v.check_keys(gpo, "grid_policy", &["sup_points"]);
            if let Some(x) = gpo.get("sup_points") {
                match x.as_u64() {
                    Some(p) if p >= 1 => sup_points = p as usize,
                    _ => v.error("grid_policy.sup_points: must be an integer ≥ 1".to_string()),
                }
            }
        }
    }
    let mut quad_order = DEFAULT_QUAD_ORDER;
    let mut mc_samples = DEFAULT_MC_SAMPLES;
    let mut mc_seed = DEFAULT_MC_SEED;
    if let Some(oc) = obj.get("oracle") {
        if let Some(oco) = v.object(oc, "oracle") {
            v.check_keys(oco, "oracle", &["quad_order", "mc_samples", "mc_seed"]);
            if let Some(x) = oco.get("quad_order") {
                match x.as_u64() {
                    Some(p) if p >= 1 => quad_order = p as usize,
                    _ => v.error("oracle.quad_order: must be an integer ≥ 1".to_string()),
                }
            }
            if let Some(x) = oco.get("mc_samples") {
                match x.as_u64() {
                    Some(p) if p >= 1 => mc_samples = p as usize,
                    _ => v.error("oracle.mc_samples: must be an integer ≥ 1".to_string()),
                }
            }
            if let Some(x) = oco.get("mc_seed") {
                match x.as_u64() {
                    Some(p) => mc_seed = p,
                    None => v.error("oracle.mc_seed: must be a nonnegative integer".to_string()),
                }
            }
        }
    }

    if !v.errors.is_empty() {
        return Err(v.errors);
    }
    Ok(ExperimentConfig {
        kind: kind.expect("validated"),
        seed: seed.expect("validated"),
        replications,
        n_grid,
        output_dir,
        model: model.expect("validated"),
        basis,
        family,
        response,
        controls,
        method,
        task,
        sup_points,
        quad_order,
        mc_samples,
        mc_seed,
    })
}

impl ExperimentConfig {
    /// Canonical JSON representation; `parse_config(to_json_string())`
    /// reproduces the config exactly.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        root.insert("kind".into(), json!(self.kind.as_str()));
        root.insert("seed".into(), json!(self.seed));
        root.insert("replications".into(), json!(self.replications));
        root.insert("n_grid".into(), json!(self.n_grid));
        root.insert("output_dir".into(), json!(self.output_dir));
        root.insert(
            "model".into(),
            match &self.model {
                ModelSpec::UniformBox { bounds } => json!({
                    "type": "uniform-box",
                    "bounds": bounds.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>(),
                }),
                ModelSpec::Gaussian { bounds, mean, sd } => json!({
                    "type": "gaussian",
                    "bounds": bounds.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>(),
                    "mean": mean,
                    "sd": sd,
                }),
            },
        );
        match &self.basis {
            Some(BasisChoice::Fixed(b)) => {
                let mut node = Map::new();
                node.insert("kind".into(), json!(b.kind));
                if let Some(d) = b.degree {
                    node.insert("degree".into(), json!(d));
                }
                if let Some(k) = &b.knots {
                    node.insert("knots".into(), json!(k));
                }
                node.insert("intercept".into(), json!(b.intercept));
                if let Some(dom) = &b.domain {
                    node.insert(
                        "domain".into(),
                        json!(dom.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>()),
                    );
                }
                root.insert("basis".into(), Value::Object(node));
            }
            Some(BasisChoice::Scheduled(s)) => {
                root.insert(
                    "schedule".into(),
                    json!({
                        "kind": s.kind,
                        "intercept": s.intercept,
                        "exponent": s.exponent,
                    }),
                );
            }
            None => {}
        }
        if let Some(f) = &self.family {
            root.insert(
                "family".into(),
                match f {
                    FamilySpec::Oscillatory {
                        count,
                        min_freq,
                        max_freq,
                    } => json!({
                        "name": "oscillatory",
                        "count": count,
                        "min_freq": min_freq,
                        "max_freq": max_freq,
                    }),
                    FamilySpec::Polynomial { coefficients } => json!({
                        "name": "polynomial",
                        "coefficients": coefficients,
                    }),
                    FamilySpec::Step { count, min, max } => json!({
                        "name": "step",
                        "count": count,
                        "min": min,
                        "max": max,
                    }),
                    FamilySpec::BasisSpan => json!({ "name": "basis-span" }),
                },
            );
        }
        if let Some(r) = &self.response {
            root.insert(
                "response".into(),
                match r {
                    ResponseSpec::Polynomial { coefficients } => json!({
                        "name": "polynomial",
                        "coefficients": coefficients,
                    }),
                    ResponseSpec::Oscillatory { freq, phase } => json!({
                        "name": "oscillatory",
                        "freq": freq,
                        "phase": phase,
                    }),
                    ResponseSpec::Step { threshold } => json!({
                        "name": "step",
                        "threshold": threshold,
                    }),
                },
            );
        }
        if let Some(c) = &self.controls {
            let mut node = Map::new();
            node.insert("kind".into(), json!(c.kind));
            if let Some(d) = c.degree {
                node.insert("degree".into(), json!(d));
            }
            if let Some(e) = c.exponent {
                node.insert("exponent".into(), json!(e));
            }
            root.insert("controls".into(), Value::Object(node));
        }
        if let Some(m) = &self.method {
            root.insert("method".into(), json!(m.as_str()));
        }
        if let Some(t) = &self.task {
            root.insert(
                "task".into(),
                match t {
                    TaskSpec::Quantile {
                        transform,
                        level,
                        y_min,
                        y_max,
                        y_points,
                        truth,
                    } => {
                        let mut node = Map::new();
                        node.insert("transform".into(), json!(transform));
                        node.insert("level".into(), json!(level));
                        node.insert("y_min".into(), json!(y_min));
                        node.insert("y_max".into(), json!(y_max));
                        node.insert("y_points".into(), json!(y_points));
                        if let Some(tr) = truth {
                            node.insert("truth".into(), json!(tr));
                        }
                        Value::Object(node)
                    }
                    TaskSpec::Saa {
                        objective,
                        theta_min,
                        theta_max,
                        theta_points,
                    } => json!({
                        "objective": objective,
                        "theta_min": theta_min,
                        "theta_max": theta_max,
                        "theta_points": theta_points,
                    }),
                },
            );
        }
        root.insert("grid_policy".into(), json!({ "sup_points": self.sup_points }));
        root.insert(
            "oracle".into(),
            json!({
                "quad_order": self.quad_order,
                "mc_samples": self.mc_samples,
                "mc_seed": self.mc_seed,
            }),
        );
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("config serializes")
    }
}
