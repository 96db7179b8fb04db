//! Task pipelines behind the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::criteria::{
    asymptotic_exponent, classify_degenerate, classify_near_degenerate, reality_radius, trusted_prefix,
    verify_reality,
};
use crate::error::{Error, Result};
use crate::grushin::{degenerate_block, GrushinOperators};
use crate::io::{CacheStatus, ConfigEcho, EigenCache, ReportDocument, RunConfig, TaskKind, TaskSettings};
use crate::linalg::{eig_complex, HessenbergForm, SymmetricEigen};
use crate::operator::{assemble, OperatorFamily, ProblemSpec};
use crate::sweep::{conjugation_distance, fit_splitting_law, is_real, locate_exceptional_point, sweep, Window};

type C = Complex64;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Replaces the `epsilon` list of the task section.
    pub epsilon: Option<f64>,
    pub cache: EigenCache,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            epsilon: None,
            cache: EigenCache::disabled(),
        }
    }
}

/// A file produced by a task, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub report: ReportDocument,
    pub artifacts: Vec<Artifact>,
    pub cache_status: Option<CacheStatus>,
}

impl TaskOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }

    /// Writes `report.json` and the artifacts under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        for a in &self.artifacts {
            let path = dir.join(&a.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, &a.contents)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Outcome {
    operator: Value,
    results: Value,
    diagnostics: Value,
    artifacts: Vec<Artifact>,
    cache_status: Option<CacheStatus>,
}

pub fn run_task(config: &RunConfig, kind: TaskKind, options: &RunOptions) -> TaskOutput {
    let mut overrides = BTreeMap::new();
    if let Some(e) = options.epsilon {
        overrides.insert("epsilon".to_string(), e);
    }
    let mut report = ReportDocument::new(kind, ConfigEcho::new(&config.source, overrides));
    info!("running task {kind}");
    match dispatch(config, kind, options) {
        Ok(o) => {
            report.operator = o.operator;
            report.results = o.results;
            report.diagnostics = o.diagnostics;
            TaskOutput {
                report,
                artifacts: o.artifacts,
                cache_status: o.cache_status,
            }
        }
        Err(e) => {
            warn!("task {kind} failed: {e}");
            report.fail(&e);
            TaskOutput {
                report,
                artifacts: Vec::new(),
                cache_status: None,
            }
        }
    }
}

fn dispatch(config: &RunConfig, kind: TaskKind, options: &RunOptions) -> Result<Outcome> {
    if let Some(declared) = config.declared_task() {
        if declared != kind {
            return Err(Error::Config {
                line: config.task_line("kind"),
                message: format!("configuration is for task {declared}, not {kind}"),
            });
        }
    }
    let mut settings = config.task_settings()?;
    if let Some(e) = options.epsilon {
        settings.epsilon = Some(vec![e]);
    }
    let plot = config.plotdata();
    match kind {
        TaskKind::Spectrum => spectrum(config, &settings, options),
        TaskKind::Classify => classify(config, &settings, options),
        TaskKind::Reality => reality(config, &settings, options, plot),
        TaskKind::Sweep => run_sweep(config, &settings, options, plot),
        TaskKind::DoublewellFit => doublewell_fit(config, &settings, plot),
    }
}

struct Setup {
    spec: ProblemSpec,
    family: OperatorFamily,
    eig: SymmetricEigen,
    cache_status: CacheStatus,
}

fn setup(config: &RunConfig, options: &RunOptions, require_symmetry: bool) -> Result<Setup> {
    let spec = config.problem_spec()?;
    let family = assemble(&spec)?;
    for w in &family.warnings {
        warn!("{w}");
    }
    if require_symmetry {
        family.require_valid()?;
    }
    let (eig, cache_status) = options.cache.eigen(&family.h0, family.basis.as_ref())?;
    Ok(Setup {
        spec,
        family,
        eig,
        cache_status,
    })
}

fn operator_summary(s: &Setup) -> Result<Value> {
    let norm = s.family.h1_operator_norm()?;
    Ok(json!({
        "size": s.family.size(),
        "basis": s.spec.basis,
        "potential": s.spec.potential.source(),
        "perturbation": s.family.perturbation_expression().map(|w| w.source()),
        "reflection": { "flags": s.spec.reflection.flags, "center": s.spec.reflection.center },
        "symmetry_residuals": s.family.residuals,
        "symmetry_tolerance": s.family.symmetry_tolerance(),
        "valid": s.family.valid,
        "warnings": s.family.warnings,
        "h1_norm": norm,
    }))
}

fn epsilons(settings: &TaskSettings, default: &[f64]) -> Vec<f64> {
    settings.epsilon.clone().unwrap_or_else(|| default.to_vec())
}

fn missing(config: &RunConfig, key: &str, task: TaskKind) -> Error {
    Error::Config {
        line: config.task_line(key),
        message: format!("task {task} needs '{key}' in [task]"),
    }
}

fn spectrum(config: &RunConfig, settings: &TaskSettings, options: &RunOptions) -> Result<Outcome> {
    let s = setup(config, options, false)?;
    let n = s.family.size();
    let count = settings.count.unwrap_or(20).min(n);
    let mut csv = String::from("epsilon,index,re,im,residual,reality_flag\n");
    let mut tables = Vec::new();
    let mut closure = Vec::new();
    for eps in epsilons(settings, &[0.0]) {
        let (values, residuals): (Vec<C>, Vec<f64>) = if eps == 0.0 {
            (
                s.eig.eigenvalues.iter().map(|&v| C::new(v, 0.0)).collect(),
                s.eig.residuals.clone(),
            )
        } else {
            let d = eig_complex(&s.family.evaluate_at(eps))?;
            (d.eigenvalues, d.residuals)
        };
        for (k, (z, r)) in values.iter().zip(&residuals).enumerate() {
            let _ = writeln!(csv, "{eps:e},{k},{:.17e},{:.17e},{r:.3e},{}", z.re, z.im, is_real(*z) as u8);
        }
        let distance = conjugation_distance(&values);
        closure.push(json!({ "epsilon": eps, "conjugation_distance": distance }));
        tables.push(json!({
            "epsilon": eps,
            "eigenvalues": values[..count],
            "residuals": residuals[..count],
            "real_count": values.iter().filter(|z| is_real(**z)).count(),
        }));
    }
    Ok(Outcome {
        operator: operator_summary(&s)?,
        results: json!({ "tables": tables }),
        diagnostics: json!({
            "max_residual_h0": s.eig.residuals.iter().cloned().fold(0.0, f64::max),
            "conjugation": closure,
        }),
        artifacts: vec![Artifact {
            path: "eigenvalues.csv".into(),
            contents: csv,
        }],
        cache_status: Some(s.cache_status),
    })
}

/// Eigenvalues of a 2×2 complex matrix.
fn eig2(m: [[C; 2]; 2]) -> [C; 2] {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let disc = (0.25 * (m[0][0] - m[1][1]) * (m[0][0] - m[1][1]) + m[0][1] * m[1][0]).sqrt();
    [mean + disc, mean - disc]
}

/// Distance between two unordered pairs.
fn pair_distance(a: [C; 2], b: [C; 2]) -> f64 {
    let direct = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let crossed = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    direct.min(crossed)
}

fn nearest_two(spectrum: &[C], target: f64) -> [C; 2] {
    let mut v = spectrum.to_vec();
    v.sort_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()));
    [v[0], v[1]]
}

fn classify(config: &RunConfig, settings: &TaskSettings, options: &RunOptions) -> Result<Outcome> {
    let s = setup(config, options, true)?;
    let mut diagnostics = serde_json::Map::new();
    let results = if let Some(lambda0) = settings.lambda0 {
        let block = degenerate_block(&s.family, &s.eig, lambda0, settings.cluster_tolerance)?;
        let g = GrushinOperators::from_block(&s.family, &s.eig, &block)?;
        let verdict = classify_degenerate(&block, &g)?;
        let mut couplings = Vec::new();
        for eps in epsilons(settings, &[]) {
            let hessenberg = HessenbergForm::new(&s.family.evaluate_at(eps))?;
            let near = g.eigenvalues_near_with(&hessenberg, eps)?;
            let full = nearest_two(&hessenberg.eigenvalues()?, lambda0);
            let mu = eig2(verdict.h1);
            let first_order = [
                C::new(lambda0, 0.0) + mu[0] * eps,
                C::new(lambda0, 0.0) + mu[1] * eps,
            ];
            let z = C::new(lambda0, 0.0);
            let series = g.series(eps, z, settings.series_order).ok();
            couplings.push(json!({
                "epsilon": eps,
                "grushin": near,
                "full_diagonalization": full,
                "first_order": first_order,
                "grushin_vs_full": pair_distance(near.values, full),
                "first_order_vs_full": pair_distance(first_order, full),
                "symmetry_residual": g.symmetry_residual(eps, z)?,
                "series_tail_bound": series.as_ref().map(|v| v.tail_bound),
            }));
        }
        diagnostics.insert("projector_identity_residual".into(), json!(g.identity_residual()));
        diagnostics.insert("resolvent_bound".into(), json!(block.r));
        diagnostics.insert(
            "tau_constraint_residual".into(),
            json!(crate::grushin::tau_constraint_residual(&block.h1, block.tau())),
        );
        json!({
            "mode": "degenerate",
            "block": {
                "lambda0": block.lambda0,
                "indices": block.indices,
                "eigenvalues": block.eigenvalues,
                "tau": block.tau(),
                "gram_determinant": block.basis.gram_determinant,
            },
            "verdict": verdict,
            "couplings": couplings,
        })
    } else if let Some((i, j)) = settings.pair {
        let eps_list = epsilons(settings, &[]);
        if eps_list.is_empty() {
            return Err(missing(config, "epsilon", TaskKind::Classify));
        }
        let verdicts = eps_list
            .iter()
            .map(|&e| classify_near_degenerate(&s.family, &s.eig, i, j, e))
            .collect::<Result<Vec<_>>>()?;
        let mut out = json!({ "mode": "near-degenerate", "verdicts": verdicts });
        if let Some(bracket) = settings.bracket {
            let v = &verdicts[0];
            let target = 0.5 * (v.e1 + v.e2);
            let ep = locate_exceptional_point(&s.family, target, bracket)?;
            let predicted = v.predicted_epsilon_c;
            out["exceptional_point"] = json!({
                "bisected": ep,
                "predicted": predicted,
                "relative_deviation": (ep.epsilon - predicted).abs() / predicted,
            });
        }
        out
    } else {
        return Err(missing(config, "lambda0' or 'pair", TaskKind::Classify));
    };
    Ok(Outcome {
        operator: operator_summary(&s)?,
        results,
        diagnostics: Value::Object(diagnostics),
        artifacts: Vec::new(),
        cache_status: Some(s.cache_status),
    })
}

fn reality(config: &RunConfig, settings: &TaskSettings, options: &RunOptions, plot: bool) -> Result<Outcome> {
    let s = setup(config, options, true)?;
    let trusted = trusted_prefix(&s.spec, &s.eig, settings.trust_tolerance)?;
    info!("{trusted} trusted eigenvalues");
    let cert = reality_radius(&s.family, &s.eig, trusted)?;
    let eps_list = match &settings.epsilon {
        Some(v) => v.clone(),
        None => {
            let top = 0.9 * cert.radius;
            (1..=10).map(|k| top * (k as f64 - 0.5) / 10.0).collect()
        }
    };
    let checks = eps_list
        .iter()
        .map(|&e| verify_reality(&s.family, e, &cert))
        .collect::<Result<Vec<_>>>()?;
    let first = settings.fit_from.unwrap_or((trusted / 2).max(1));
    let fit = asymptotic_exponent(&cert.trusted_eigenvalues, first, trusted - 1).ok();
    let mut artifacts = Vec::new();
    if plot {
        let mut dat = String::from("# n lambda_n\n");
        for (k, v) in cert.trusted_eigenvalues.iter().enumerate() {
            let _ = writeln!(dat, "{k} {v:.17e}");
        }
        artifacts.push(Artifact {
            path: "plotdata/trusted_spectrum.dat".into(),
            contents: dat,
        });
    }
    let max_im = checks.iter().map(|c| c.max_imaginary).fold(0.0, f64::max);
    Ok(Outcome {
        operator: operator_summary(&s)?,
        results: json!({
            "certificate": cert,
            "checks": checks.iter().map(|c| json!({
                "epsilon": c.epsilon,
                "max_imaginary": c.max_imaginary,
                "squares_checked": c.squares.len(),
            })).collect::<Vec<_>>(),
            "asymptotic_fit": fit,
        }),
        diagnostics: json!({
            "trust_tolerance": settings.trust_tolerance,
            "max_imaginary": max_im,
            "squares": checks,
        }),
        artifacts,
        cache_status: Some(s.cache_status),
    })
}

fn run_sweep(config: &RunConfig, settings: &TaskSettings, options: &RunOptions, plot: bool) -> Result<Outcome> {
    let s = setup(config, options, true)?;
    let lo = settings.epsilon_min.unwrap_or(0.0);
    let hi = settings
        .epsilon_max
        .ok_or_else(|| missing(config, "epsilon_max", TaskKind::Sweep))?;
    let steps = settings.steps.ok_or_else(|| missing(config, "steps", TaskKind::Sweep))?;
    if steps < 2 || hi <= lo {
        return Err(Error::Config {
            line: config.task_line("steps"),
            message: "sweep needs steps >= 2 and epsilon_max > epsilon_min".into(),
        });
    }
    let grid: Vec<f64> = (0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect();
    let window = settings.window.unwrap_or(Window::Count(6));
    let trace = sweep(&s.family, &grid, window)?;
    let mut refined = Vec::new();
    for rec in &trace.exceptional_points {
        match locate_exceptional_point(&s.family, rec.lambda, rec.epsilon_interval) {
            Ok(ep) => refined.push(json!({ "record": rec, "refined": ep })),
            Err(e) => refined.push(json!({ "record": rec, "refinement_error": e.to_string() })),
        }
    }
    let mut artifacts = vec![Artifact {
        path: "sweep.csv".into(),
        contents: trace.to_csv(),
    }];
    if plot {
        artifacts.push(Artifact {
            path: "plotdata/sweep.dat".into(),
            contents: trace.to_plot_data(),
        });
    }
    let closure: f64 = (0..grid.len())
        .map(|k| {
            let at: Vec<C> = trace.trajectories.iter().map(|t| t[k]).collect();
            conjugation_distance(&at)
        })
        .fold(0.0, f64::max);
    Ok(Outcome {
        operator: operator_summary(&s)?,
        results: json!({
            "grid": { "min": lo, "max": hi, "steps": steps },
            "window": window,
            "trajectories": trace.trajectories.len(),
            "exceptional_points": refined,
        }),
        diagnostics: json!({
            "ambiguities": trace.ambiguities,
            "window_conjugation_distance": closure,
        }),
        artifacts,
        cache_status: Some(s.cache_status),
    })
}

fn doublewell_fit(config: &RunConfig, settings: &TaskSettings, plot: bool) -> Result<Outcome> {
    let task = TaskKind::DoublewellFit;
    let name = settings.parameter.clone().ok_or_else(|| missing(config, "parameter", task))?;
    let values = settings.values.clone().ok_or_else(|| missing(config, "values", task))?;
    let law = settings.law.ok_or_else(|| missing(config, "law", task))?;
    let fit = fit_splitting_law(
        |p| config.problem_spec_at(&name, p),
        &values,
        law,
        settings.trust_tolerance,
    )?;
    let mut artifacts = Vec::new();
    if plot {
        let mut dat = String::from("# parameter abscissa log_d\n");
        for sample in &fit.samples {
            let _ = writeln!(
                dat,
                "{:.10e} {:.17e} {:.17e}",
                sample.parameter,
                law.abscissa(sample.parameter),
                sample.d.ln()
            );
        }
        artifacts.push(Artifact {
            path: "plotdata/splitting.dat".into(),
            contents: dat,
        });
    }
    Ok(Outcome {
        operator: json!({ "parameter": name, "values": values }),
        results: json!({ "fit": fit.fit, "alternative": fit.alternative, "windows": fit.windows }),
        diagnostics: json!({ "samples": fit.samples, "trust_tolerance": settings.trust_tolerance }),
        artifacts,
        cache_status: None,
    })
}
