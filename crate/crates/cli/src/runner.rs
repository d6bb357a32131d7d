//! Executes a validated config: builds the model, basis, family and task
//! objects, runs the referenced library operation, and writes CSV artifacts
//! plus a JSON manifest with full provenance.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use surrofit::applications::{
    estimate_cdf, estimate_quantile, saa_minimize, CvMethod, QuantileTask, SaaTask, Transform,
};
use surrofit::control_variates::{uniform_cv_rate_check, ControlSource, ControlVariateSet};
use surrofit::diagnostics::{diagnose, residual_envelope_check, DiagnosticsReport};
use surrofit::features::{make_basis, BasisSpec, DimensionSchedule, Domain, FeatureMap};
use surrofit::grid::GridPolicy;
use surrofit::linalg::CostBreakdown;
use surrofit::population::{IntegrandHints, OracleConfig, PopulationModel};
use surrofit::response::{Response, ResponseFamily};
use surrofit::risk::{
    replicate_seed, single_response_rate_check, worst_case_rate_check, BasisSource,
};
use surrofit::surrogate::draw_design;

use crate::config::{
    BasisChoice, BasisNode, ControlsSpec, ExperimentConfig, ExperimentKind, FamilySpec, Method,
    ModelSpec, ResponseSpec, TaskSpec,
};
use crate::csvout::{
    cdf_csv, objective_csv, quantile_summary_csv, rate_csv, rate_csv_with_kind, ratio_csv,
    saa_summary_csv, QuantileSummaryRow, SaaSummaryRow,
};
use crate::manifest::{config_hash, OracleRecord, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("[{stage}] {message}")]
    Stage { stage: &'static str, message: String },
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

impl RunError {
    pub fn stage(&self) -> &str {
        match self {
            RunError::Stage { stage, .. } => stage,
            RunError::Io { .. } => "write-output",
        }
    }
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError::Stage {
        stage,
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
}

/// The per-kind payload assembled during execution.
struct ExperimentOutput {
    files: Vec<(String, String)>,
    oracle_records: Vec<OracleRecord>,
    warnings: Vec<String>,
    diagnostics: Option<Vec<DiagnosticsReport>>,
    cost: CostBreakdown,
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<PopulationModel, RunError> {
    let err = stage_err("build-model");
    let domain = Domain::new(cfg.model.bounds().to_vec()).map_err(&err)?;
    let model = match &cfg.model {
        ModelSpec::UniformBox { .. } => PopulationModel::uniform(domain),
        ModelSpec::Gaussian { mean, sd, .. } => {
            PopulationModel::truncated_gaussian(domain, mean.clone(), sd.clone()).map_err(&err)?
        }
    };
    Ok(model.with_oracle(OracleConfig {
        quad_order: cfg.quad_order,
        mc_samples: cfg.mc_samples,
        mc_seed: cfg.mc_seed,
    }))
}

fn build_fixed_map(node: &BasisNode, model: &PopulationModel) -> Result<FeatureMap, RunError> {
    let err = stage_err("build-basis");
    let domain = match &node.domain {
        None => model.domain().clone(),
        Some(bounds) => {
            let domain = Domain::new(bounds.clone()).map_err(&err)?;
            if !domain.contains_box(model.domain()) {
                return Err(RunError::Stage {
                    stage: "build-basis",
                    message: "basis domain must contain the model box".into(),
                });
            }
            domain
        }
    };
    let spec = match node.kind.as_str() {
        "monomial" => BasisSpec::Monomial {
            degree: node.degree.unwrap_or(0),
        },
        "legendre" => BasisSpec::Legendre {
            degree: node.degree.unwrap_or(0),
        },
        "fourier" => BasisSpec::Fourier {
            max_frequency: node.degree.unwrap_or(0),
        },
        "indicator" => BasisSpec::Indicator {
            knots: node.knots.clone().unwrap_or_default(),
        },
        other => {
            return Err(RunError::Stage {
                stage: "build-basis",
                message: format!("unknown basis kind '{other}'"),
            })
        }
    };
    make_basis(&spec, &domain, node.intercept).map_err(&err)
}

fn build_basis_source(
    choice: &BasisChoice,
    model: &PopulationModel,
) -> Result<BasisSource, RunError> {
    match choice {
        BasisChoice::Fixed(node) => Ok(BasisSource::Fixed(build_fixed_map(node, model)?)),
        BasisChoice::Scheduled(s) => Ok(BasisSource::Scheduled {
            kind: s.kind.clone(),
            intercept: s.intercept,
            schedule: DimensionSchedule::new_power_law(s.exponent)
                .map_err(stage_err("build-basis"))?,
        }),
    }
}

fn build_family(
    spec: &FamilySpec,
    model: &PopulationModel,
    span_map: Option<&FeatureMap>,
    policy: &GridPolicy,
) -> Result<ResponseFamily, RunError> {
    let err = stage_err("build-family");
    match spec {
        FamilySpec::Oscillatory {
            count,
            min_freq,
            max_freq,
        } => ResponseFamily::oscillatory(*count, *min_freq, *max_freq, model.domain()).map_err(&err),
        FamilySpec::Polynomial { coefficients } => {
            ResponseFamily::polynomial(coefficients.clone(), model.domain()).map_err(&err)
        }
        FamilySpec::Step { count, min, max } => {
            ResponseFamily::step(*count, *min, *max, model.domain()).map_err(&err)
        }
        FamilySpec::BasisSpan => match span_map {
            Some(map) => ResponseFamily::from_basis(map, policy).map_err(&err),
            None => Err(RunError::Stage {
                stage: "build-family",
                message: "the basis-span family requires a fixed basis".into(),
            }),
        },
    }
}

fn build_response(spec: &ResponseSpec, model: &PopulationModel) -> Result<Response, RunError> {
    let (lo, hi) = model.domain().bounds()[0];
    Ok(match spec {
        ResponseSpec::Polynomial { coefficients } => {
            let coeffs = coefficients.clone();
            Response::smooth("response", move |x: &[f64]| {
                let t = (x[0] - lo) / (hi - lo);
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            })
        }
        ResponseSpec::Oscillatory { freq, phase } => {
            let (freq, phase) = (*freq, *phase);
            Response::smooth("response", move |x: &[f64]| {
                let t = (x[0] - lo) / (hi - lo);
                (2.0 * std::f64::consts::PI * freq * t + phase).sin()
            })
        }
        ResponseSpec::Step { threshold } => {
            let theta = *threshold;
            if !(theta > lo && theta < hi) {
                return Err(RunError::Stage {
                    stage: "build-response",
                    message: format!("step threshold {theta} lies outside the domain"),
                });
            }
            let p = model.domain().dim();
            let mut breakpoints = vec![Vec::new(); p];
            breakpoints[0].push(theta);
            Response::piecewise(
                "response",
                move |x: &[f64]| if x[0] <= theta { 1.0 } else { 0.0 },
                breakpoints,
            )
        }
    })
}

fn build_control_source(
    spec: &ControlsSpec,
    model: &PopulationModel,
) -> Result<ControlSource, RunError> {
    let err = stage_err("build-controls");
    match (spec.degree, spec.exponent) {
        (Some(degree), None) => {
            let basis_spec = match spec.kind.as_str() {
                "monomial" => BasisSpec::Monomial { degree },
                "legendre" => BasisSpec::Legendre { degree },
                "fourier" => BasisSpec::Fourier {
                    max_frequency: degree,
                },
                other => {
                    return Err(RunError::Stage {
                        stage: "build-controls",
                        message: format!("control kind '{other}' needs knots, which are not supported here; use monomial, legendre or fourier"),
                    })
                }
            };
            let map = make_basis(&basis_spec, model.domain(), false).map_err(&err)?;
            let controls = ControlVariateSet::centered(map, model).map_err(&err)?;
            Ok(ControlSource::Fixed(controls))
        }
        (None, Some(exponent)) => Ok(ControlSource::Scheduled {
            kind: spec.kind.clone(),
            schedule: DimensionSchedule::new_power_law(exponent).map_err(&err)?,
        }),
        _ => Err(RunError::Stage {
            stage: "build-controls",
            message: "controls need exactly one of degree or exponent".into(),
        }),
    }
}

fn build_transform(name: &str, model: &PopulationModel) -> Result<Transform, RunError> {
    let p = model.domain().dim();
    if name == "identity" {
        return Ok(Transform::Coordinate { axis: 0 });
    }
    if let Some(axis_text) = name.strip_prefix("coordinate-") {
        if let Ok(axis) = axis_text.parse::<usize>() {
            if axis < p {
                return Ok(Transform::Coordinate { axis });
            }
            return Err(RunError::Stage {
                stage: "build-task",
                message: format!("transform axis {axis} out of range for a {p}-dimensional model"),
            });
        }
    }
    Err(RunError::Stage {
        stage: "build-task",
        message: format!("unknown transform '{name}' (expected identity or coordinate-K)"),
    })
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Execute a validated config and write its artifacts under the config's
/// output directory. Returns the manifest that was written.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest, RunError> {
    let started = Instant::now();
    let output = match opts.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(stage_err("execute"))?;
            pool.install(|| execute(cfg))?
        }
        None => execute(cfg)?,
    };

    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(|e| RunError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut written = Vec::with_capacity(output.files.len());
    for (name, contents) in &output.files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| RunError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        written.push(name.clone());
    }

    let canonical = cfg.to_json_string();
    let replications = cfg.replications;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(&canonical),
        config: cfg.to_json(),
        master_seed: cfg.seed,
        per_replication_seeds: cfg
            .n_grid
            .iter()
            .enumerate()
            .map(|(i, _)| {
                (0..replications)
                    .map(|r| replicate_seed(cfg.seed, i, replications, r))
                    .collect()
            })
            .collect(),
        oracle_records: output.oracle_records,
        cost: output.cost,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs: written,
        warnings: output.warnings,
        diagnostics: output.diagnostics,
    };
    let manifest_path = dir.join("manifest.json");
    let manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, manifest_text).map_err(|e| RunError::Io {
        path: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(manifest)
}

fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    let model = build_model(cfg)?;
    let policy = GridPolicy {
        sup_points: cfg.sup_points,
    };
    let exec_err = stage_err("execute");

    match cfg.kind {
        ExperimentKind::SingleRate => {
            let Some(BasisChoice::Fixed(node)) = &cfg.basis else {
                return Err(RunError::Stage {
                    stage: "build-basis",
                    message: "single-rate requires a fixed basis".into(),
                });
            };
            let map = build_fixed_map(node, &model)?;
            let response = build_response(cfg.response.as_ref().expect("validated"), &model)?;
            let result = single_response_rate_check(
                &model,
                &map,
                &response,
                &cfg.n_grid,
                cfg.replications,
                cfg.seed,
            )
            .map_err(&exec_err)?;
            Ok(ExperimentOutput {
                files: vec![
                    ("rate.csv".into(), rate_csv(&result.curve)),
                    ("ratio.csv".into(), ratio_csv(&result.ratios)),
                ],
                oracle_records: vec![
                    OracleRecord::from_accuracy(
                        "P(q eps^2) of the response",
                        &result.residual_moment.accuracy,
                    ),
                    OracleRecord::from_accuracy("population beta", &result.beta_accuracy),
                ],
                warnings: Vec::new(),
                diagnostics: None,
                cost: result.total_cost,
            })
        }
        ExperimentKind::WorstCaseRate => {
            let source = build_basis_source(cfg.basis.as_ref().expect("validated"), &model)?;
            let span_map = match &source {
                BasisSource::Fixed(map) => Some(map.clone()),
                BasisSource::Scheduled { .. } => None,
            };
            let family = build_family(
                cfg.family.as_ref().expect("validated"),
                &model,
                span_map.as_ref(),
                &policy,
            )?;
            let result = worst_case_rate_check(
                &model,
                &source,
                &family,
                &cfg.n_grid,
                cfg.replications,
                cfg.seed,
                &policy,
            )
            .map_err(&exec_err)?;
            let mut oracle_records: Vec<OracleRecord> = result
                .conditions
                .iter()
                .map(|c| OracleRecord {
                    quantity: format!("condition ratios at n={}", c.n),
                    method: format!("a={:.6e} b={:.6e} warn={}", c.ratio_a, c.ratio_b, c.warn),
                    quad_order: None,
                    cells: None,
                    samples: None,
                    std_error: None,
                    seed: None,
                })
                .collect();
            if let Some(acc) = &result.worst_beta_accuracy {
                oracle_records.push(OracleRecord::from_accuracy(
                    "population betas (least accurate)",
                    acc,
                ));
            }
            Ok(ExperimentOutput {
                files: vec![("rate.csv".into(), rate_csv(&result.curve))],
                oracle_records,
                warnings: result.warnings,
                diagnostics: None,
                cost: result.total_cost,
            })
        }
        ExperimentKind::CvRate => {
            let source = build_control_source(cfg.controls.as_ref().expect("validated"), &model)?;
            let family = build_family(
                cfg.family.as_ref().expect("validated"),
                &model,
                None,
                &policy,
            )?;
            let result = uniform_cv_rate_check(
                &model,
                &source,
                &family,
                &cfg.n_grid,
                cfg.replications,
                cfg.seed,
            )
            .map_err(&exec_err)?;
            let mut oracle_records = vec![OracleRecord {
                quantity: "sup_f truth error bound".into(),
                method: format!("{:.6e}", result.truth_error_bound),
                quad_order: None,
                cells: None,
                samples: None,
                std_error: None,
                seed: None,
            }];
            if let ControlSource::Fixed(controls) = &source {
                if let Some(acc) = controls.center_accuracy() {
                    oracle_records.push(OracleRecord::from_accuracy("control centering", acc));
                }
            }
            Ok(ExperimentOutput {
                files: vec![
                    (
                        "vanilla.csv".into(),
                        rate_csv_with_kind(&result.vanilla, "vanilla"),
                    ),
                    ("cv.csv".into(), rate_csv_with_kind(&result.cv, "cv")),
                    (
                        "oracle.csv".into(),
                        rate_csv_with_kind(&result.oracle, "oracle"),
                    ),
                ],
                oracle_records,
                warnings: Vec::new(),
                diagnostics: None,
                cost: result.total_cost,
            })
        }
        ExperimentKind::Quantile => run_quantile(cfg, &model),
        ExperimentKind::Saa => run_saa(cfg, &model),
        ExperimentKind::Diagnose => {
            let Some(BasisChoice::Fixed(node)) = &cfg.basis else {
                return Err(RunError::Stage {
                    stage: "build-basis",
                    message: "diagnose requires a fixed basis".into(),
                });
            };
            let map = build_fixed_map(node, &model)?;
            let family = build_family(
                cfg.family.as_ref().expect("validated"),
                &model,
                Some(&map),
                &policy,
            )?;
            let mut reports = Vec::with_capacity(cfg.n_grid.len());
            let mut warnings = Vec::new();
            for (i, &n) in cfg.n_grid.iter().enumerate() {
                let report = diagnose(
                    &model,
                    &map,
                    &family,
                    n,
                    replicate_seed(cfg.seed, i, 1, 0),
                    &policy,
                )
                .map_err(&exec_err)?;
                let (holds, margin) = residual_envelope_check(&report);
                if !holds {
                    warnings.push(format!(
                        "residual envelope bound violated at n={n} (margin {margin:.3e})"
                    ));
                }
                if !report.condition_pass {
                    warnings.push(format!(
                        "condition ratios above 1 at n={n}; labelled convention threshold"
                    ));
                }
                reports.push(report);
            }
            Ok(ExperimentOutput {
                files: Vec::new(),
                oracle_records: Vec::new(),
                warnings,
                diagnostics: Some(reports),
                cost: CostBreakdown::default(),
            })
        }
    }
}

fn quantile_method(cfg: &ExperimentConfig) -> CvMethod {
    match cfg.method {
        Some(Method::Cv) => CvMethod::ControlVariate,
        _ => CvMethod::Vanilla,
    }
}

fn run_quantile(cfg: &ExperimentConfig, model: &PopulationModel) -> Result<ExperimentOutput, RunError> {
    let exec_err = stage_err("execute");
    let Some(TaskSpec::Quantile {
        transform,
        level,
        y_min,
        y_max,
        y_points,
        truth,
    }) = &cfg.task
    else {
        unreachable!("validated quantile task");
    };
    let transform = build_transform(transform, model)?;
    let mut task = QuantileTask::new(transform, *level, linspace(*y_min, *y_max, *y_points))
        .map_err(&exec_err)?;
    let (lo, hi) = model.domain().bounds()[0];
    let mut true_quantile = None;
    let mut oracle_records = Vec::new();
    if let Some(name) = truth {
        // uniform-identity: g = x_0 under the uniform box.
        if !matches!(cfg.model, ModelSpec::UniformBox { .. }) {
            return Err(RunError::Stage {
                stage: "build-task",
                message: "truth 'uniform-identity' requires a uniform-box model".into(),
            });
        }
        task = task.with_truth(move |y| ((y - lo) / (hi - lo)).clamp(0.0, 1.0));
        true_quantile = Some(lo + level * (hi - lo));
        oracle_records.push(OracleRecord {
            quantity: "true CDF".into(),
            method: format!("analytic ({name})"),
            quad_order: None,
            cells: None,
            samples: None,
            std_error: None,
            seed: None,
        });
    }

    let method = quantile_method(cfg);
    let (controls, design_map) = match method {
        CvMethod::ControlVariate => {
            let source = build_control_source(cfg.controls.as_ref().expect("validated"), model)?;
            let controls = match source {
                ControlSource::Fixed(c) => c,
                ControlSource::Scheduled { .. } => {
                    return Err(RunError::Stage {
                        stage: "build-controls",
                        message: "quantile runs need fixed-degree controls".into(),
                    })
                }
            };
            if let Some(acc) = controls.center_accuracy() {
                oracle_records.push(OracleRecord::from_accuracy("control centering", acc));
            }
            let map = controls
                .base_map()
                .expect("centered controls carry a map")
                .clone();
            (controls, map)
        }
        CvMethod::Vanilla => {
            let map = make_basis(&BasisSpec::Monomial { degree: 0 }, model.domain(), true)
                .map_err(&exec_err)?;
            (ControlVariateSet::none(), map)
        }
    };

    let mut files = Vec::new();
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    let mut cost = CostBreakdown::default();
    let replications = cfg.replications;
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        use rayon::prelude::*;
        let reps: Vec<(surrofit::applications::CdfEstimate, f64, bool, CostBreakdown)> = (0
            ..replications)
            .into_par_iter()
            .map(|r| {
                let design = draw_design(
                    model,
                    &design_map,
                    n,
                    replicate_seed(cfg.seed, i, replications, r),
                )
                .map_err(|e| surrofit::Error::Invalid(e.to_string()))?;
                let est = estimate_cdf(&task, &design, &controls, method)?;
                let q = estimate_quantile(&task, &est);
                let mut c = *design.cost();
                c.merge(&est.estimator_cost);
                Ok((est, q.value, q.saturated, c))
            })
            .collect::<surrofit::Result<Vec<_>>>()
            .map_err(&exec_err)?;

        for (_, _, _, c) in &reps {
            cost.merge(c);
        }
        let quantiles: Vec<f64> = reps.iter().map(|(_, q, _, _)| *q).collect();
        let saturated = reps.iter().filter(|(_, _, s, _)| *s).count();
        let mean_q = quantiles.iter().sum::<f64>() / quantiles.len() as f64;
        let (mean_abs_error, std_error) = match true_quantile {
            Some(qt) => {
                let errors: Vec<f64> = quantiles.iter().map(|q| (q - qt).abs()).collect();
                let mean = errors.iter().sum::<f64>() / errors.len() as f64;
                let var = if errors.len() > 1 {
                    errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                        / (errors.len() - 1) as f64
                } else {
                    0.0
                };
                (mean, (var / errors.len() as f64).sqrt())
            }
            None => (f64::NAN, f64::NAN),
        };
        rows.push(QuantileSummaryRow {
            n,
            mean_quantile: mean_q,
            mean_abs_error,
            std_error,
            replications,
            grid_step: task.grid_step(),
            saturated,
        });
        files.push((format!("cdf_n{n}.csv"), cdf_csv(&reps[0].0)));
    }
    files.insert(0, ("quantile.csv".into(), quantile_summary_csv(&rows)));
    Ok(ExperimentOutput {
        files,
        oracle_records,
        warnings: Vec::new(),
        diagnostics: None,
        cost,
    })
}

fn run_saa(cfg: &ExperimentConfig, model: &PopulationModel) -> Result<ExperimentOutput, RunError> {
    let exec_err = stage_err("execute");
    let Some(TaskSpec::Saa {
        objective,
        theta_min,
        theta_max,
        theta_points,
    }) = &cfg.task
    else {
        unreachable!("validated saa task");
    };
    if objective != "quadratic" {
        return Err(RunError::Stage {
            stage: "build-task",
            message: format!("unknown objective '{objective}'"),
        });
    }
    let theta_grid = linspace(*theta_min, *theta_max, *theta_points);
    let task = SaaTask::new(|theta, x: &[f64]| (theta - x[0]).powi(2), theta_grid.clone())
        .map_err(&exec_err)?;
    // The quadratic objective is minimized at E[x_0].
    let mean_x = model
        .integrate(|x: &[f64]| x[0], &IntegrandHints::smooth())
        .map_err(&exec_err)?;
    let true_theta = mean_x.value;
    let oracle_records = vec![OracleRecord::from_accuracy(
        "true minimizer E[x_0]",
        &mean_x.accuracy,
    )];

    let method = quantile_method(cfg);
    let (controls, design_map) = match method {
        CvMethod::ControlVariate => {
            let source = build_control_source(cfg.controls.as_ref().expect("validated"), model)?;
            let controls = match source {
                ControlSource::Fixed(c) => c,
                ControlSource::Scheduled { .. } => {
                    return Err(RunError::Stage {
                        stage: "build-controls",
                        message: "saa runs need fixed-degree controls".into(),
                    })
                }
            };
            let map = controls
                .base_map()
                .expect("centered controls carry a map")
                .clone();
            (controls, map)
        }
        CvMethod::Vanilla => {
            let map = make_basis(&BasisSpec::Monomial { degree: 0 }, model.domain(), true)
                .map_err(&exec_err)?;
            (ControlVariateSet::none(), map)
        }
    };

    let mut files = Vec::new();
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    let mut warnings = Vec::new();
    let mut cost = CostBreakdown::default();
    let replications = cfg.replications;
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        use rayon::prelude::*;
        let reps: Vec<(surrofit::applications::SaaResult, CostBreakdown)> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let design = draw_design(
                    model,
                    &design_map,
                    n,
                    replicate_seed(cfg.seed, i, replications, r),
                )?;
                let result = saa_minimize(&task, &design, &controls, method)?;
                let mut c = *design.cost();
                c.merge(&result.estimator_cost);
                Ok((result, c))
            })
            .collect::<surrofit::Result<Vec<_>>>()
            .map_err(&exec_err)?;

        for (_, c) in &reps {
            cost.merge(c);
        }
        for (rep, _) in &reps {
            for (theta, label) in &rep.excluded {
                warnings.push(format!("n={n}: objective NaN at theta={theta} ({label})"));
            }
        }
        // Objective curve statistics per grid point.
        let mut curve_rows = Vec::with_capacity(theta_grid.len());
        for (j, &theta) in theta_grid.iter().enumerate() {
            let values: Vec<f64> = reps
                .iter()
                .filter_map(|(rep, _)| rep.objective.get(j).map(|&(_, v)| v))
                .collect();
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (values.len() - 1) as f64
            } else {
                0.0
            };
            curve_rows.push((theta, mean, (var / values.len().max(1) as f64).sqrt()));
        }
        files.push((format!("objective_n{n}.csv"), objective_csv(&curve_rows)));

        let theta_hats: Vec<f64> = reps.iter().map(|(rep, _)| rep.theta_hat).collect();
        let mean_theta = theta_hats.iter().sum::<f64>() / theta_hats.len() as f64;
        let errors: Vec<f64> = theta_hats.iter().map(|t| (t - true_theta).abs()).collect();
        let mean_err = errors.iter().sum::<f64>() / errors.len() as f64;
        let var = if errors.len() > 1 {
            errors.iter().map(|e| (e - mean_err).powi(2)).sum::<f64>()
                / (errors.len() - 1) as f64
        } else {
            0.0
        };
        rows.push(SaaSummaryRow {
            n,
            mean_theta_hat: mean_theta,
            mean_abs_error: mean_err,
            std_error: (var / errors.len() as f64).sqrt(),
            replications,
        });
    }
    files.insert(0, ("saa.csv".into(), saa_summary_csv(&rows)));
    Ok(ExperimentOutput {
        files,
        oracle_records,
        warnings,
        diagnostics: None,
        cost,
    })
}
