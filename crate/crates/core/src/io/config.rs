//! Run configuration files.
//!
//! ```text
//! [parameters]
//! hbar = 0.12
//!
//! [problem]
//! V = x^2*(1+x)^2
//! W = (x + 1/2)/(1 + (x + 1/2)^2)
//! kinetic = hbar^2
//! length_scale = sqrt(hbar)
//! center = -1/2
//! modes = 60
//!
//! [task]
//! epsilon = 0, 1e-3
//! ```
//!
//! Numeric values are constant expressions over the `[parameters]`
//! section. Lists are comma separated. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::basis::HermiteBasis;
use crate::error::{Error, Result};
use crate::expr::{Expr, Expression, Reflection};
use crate::operator::{Perturbation, ProblemSpec, DEFAULT_SYMMETRY_TOLERANCE};
use crate::sweep::{SplittingLaw, Window};

use super::matrix::read_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Spectrum,
    Classify,
    Reality,
    Sweep,
    DoublewellFit,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Spectrum,
        TaskKind::Classify,
        TaskKind::Reality,
        TaskKind::Sweep,
        TaskKind::DoublewellFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Spectrum => "spectrum",
            TaskKind::Classify => "classify",
            TaskKind::Reality => "reality",
            TaskKind::Sweep => "sweep",
            TaskKind::DoublewellFit => "doublewell-fit",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub value: String,
    pub line: usize,
}

const PROBLEM_KEYS: &[&str] = &[
    "dimension",
    "V",
    "W",
    "perturbation",
    "h1_file",
    "j_file",
    "reflection",
    "center",
    "kinetic",
    "modes",
    "length_scale",
    "quadrature_order",
    "symmetry_tolerance",
];

const TASK_KEYS: &[&str] = &[
    "kind",
    "epsilon",
    "count",
    "lambda0",
    "cluster_tolerance",
    "pair",
    "bracket",
    "series_order",
    "trust_tolerance",
    "fit_from",
    "epsilon_min",
    "epsilon_max",
    "steps",
    "window",
    "window_count",
    "parameter",
    "values",
    "law",
];

const OUTPUT_KEYS: &[&str] = &["dir", "plotdata"];

/// Parsed configuration. Values are kept as text and evaluated on demand so
/// that a parameter can be overridden per run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: String,
    pub base_dir: PathBuf,
    parameters: Vec<(String, Setting)>,
    problem: BTreeMap<String, Setting>,
    task: BTreeMap<String, Setting>,
    output: BTreeMap<String, Setting>,
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let source = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    RunConfig::parse(&source, &base)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn uses_variables(e: &Expr) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Var(_) => true,
        Expr::Neg(a) => uses_variables(a),
        Expr::Binary(_, a, b) => uses_variables(a) || uses_variables(b),
        Expr::Call(_, args) => args.iter().any(uses_variables),
    }
}

fn constant(setting: &Setting, constants: &BTreeMap<String, f64>) -> Result<f64> {
    let e = Expr::parse_with_constants(&setting.value, 2, constants)
        .map_err(|e| config_error(setting.line, e.to_string()))?;
    if uses_variables(&e) {
        return Err(config_error(setting.line, format!("'{}' is not a constant", setting.value)));
    }
    let v = e
        .evaluate(&[0.0, 0.0])
        .map_err(|e| config_error(setting.line, e.to_string()))?;
    if !v.is_finite() {
        return Err(config_error(setting.line, format!("'{}' is not finite", setting.value)));
    }
    Ok(v)
}

fn split_list(setting: &Setting) -> Vec<Setting> {
    setting
        .value
        .split(',')
        .map(|s| Setting {
            value: s.trim().to_string(),
            line: setting.line,
        })
        .collect()
}

fn constant_list(setting: &Setting, constants: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let items = split_list(setting);
    if items.iter().any(|s| s.value.is_empty()) {
        return Err(config_error(setting.line, "empty list element"));
    }
    items.iter().map(|s| constant(s, constants)).collect()
}

fn integer(setting: &Setting) -> Result<usize> {
    setting
        .value
        .parse()
        .map_err(|_| config_error(setting.line, format!("expected a non-negative integer, got '{}'", setting.value)))
}

fn integer_list(setting: &Setting) -> Result<Vec<usize>> {
    split_list(setting).iter().map(integer).collect()
}

fn boolean(setting: &Setting) -> Result<bool> {
    match setting.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(config_error(setting.line, format!("expected true or false, got '{other}'"))),
    }
}

impl RunConfig {
    pub fn parse(source: &str, base_dir: &Path) -> Result<RunConfig> {
        let mut parameters: Vec<(String, Setting)> = Vec::new();
        let mut problem = BTreeMap::new();
        let mut task = BTreeMap::new();
        let mut output = BTreeMap::new();
        let mut section: Option<String> = None;
        let mut seen_sections: BTreeMap<String, usize> = BTreeMap::new();

        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            if let Some(rest) = text.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_error(line, "unterminated section header"))?
                    .trim();
                if !["parameters", "problem", "task", "output"].contains(&name) {
                    return Err(config_error(line, format!("unknown section [{name}]")));
                }
                if let Some(first) = seen_sections.insert(name.to_string(), line) {
                    return Err(config_error(line, format!("section [{name}] already opened on line {first}")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected 'key = value', got '{text}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(config_error(line, "missing key"));
            }
            if value.is_empty() {
                return Err(config_error(line, format!("missing value for '{key}'")));
            }
            let setting = Setting {
                value: value.to_string(),
                line,
            };
            let section_name = section
                .as_deref()
                .ok_or_else(|| config_error(line, format!("'{key}' appears before any section header")))?;
            if section_name == "parameters" {
                if !is_identifier(key) || matches!(key, "x" | "x1" | "x2") {
                    return Err(config_error(line, format!("invalid parameter name '{key}'")));
                }
                if let Some((_, prev)) = parameters.iter().find(|(k, _)| k == key) {
                    return Err(config_error(
                        line,
                        format!("duplicate key '{key}' (lines {} and {line})", prev.line),
                    ));
                }
                parameters.push((key.to_string(), setting));
                continue;
            }
            let (map, allowed) = match section_name {
                "problem" => (&mut problem, PROBLEM_KEYS),
                "task" => (&mut task, TASK_KEYS),
                _ => (&mut output, OUTPUT_KEYS),
            };
            if !allowed.contains(&key) {
                return Err(config_error(line, format!("unknown key '{key}' in [{section_name}]")));
            }
            if let Some(prev) = map.get(key) {
                let prev: &Setting = prev;
                return Err(config_error(
                    line,
                    format!("duplicate key '{key}' (lines {} and {line})", prev.line),
                ));
            }
            map.insert(key.to_string(), setting);
        }

        let config = RunConfig {
            source: source.to_string(),
            base_dir: base_dir.to_path_buf(),
            parameters,
            problem,
            task,
            output,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not depend on the chosen task.
    fn validate(&self) -> Result<()> {
        let constants = self.constants(&BTreeMap::new())?;
        if self.problem.is_empty() {
            return Err(config_error(self.source.lines().count().max(1), "missing [problem] section"));
        }
        self.problem_spec_with(&constants)?;
        if let Some(kind) = self.task.get("kind") {
            TaskKind::from_str(&kind.value).map_err(|m| config_error(kind.line, m))?;
        }
        self.task_settings_with(&constants)?;
        if let Some(p) = self.output.get("plotdata") {
            boolean(p)?;
        }
        Ok(())
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.parameters.iter().map(|(k, _)| k.as_str()).collect()
    }

    /// Parameter values in file order, with `overrides` replacing named
    /// entries before later parameters are evaluated.
    pub fn constants(&self, overrides: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
        for name in overrides.keys() {
            if !self.parameters.iter().any(|(k, _)| k == name) {
                return Err(Error::InvalidInput(format!("no parameter named '{name}'")));
            }
        }
        let mut constants = BTreeMap::new();
        for (name, setting) in &self.parameters {
            let v = match overrides.get(name) {
                Some(&v) => v,
                None => constant(setting, &constants)?,
            };
            constants.insert(name.clone(), v);
        }
        Ok(constants)
    }

    /// The task named in the file, if any.
    pub fn declared_task(&self) -> Option<TaskKind> {
        self.task.get("kind").and_then(|s| s.value.parse().ok())
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.get("dir").map(|s| self.resolve(&s.value))
    }

    pub fn plotdata(&self) -> bool {
        self.output.get("plotdata").map(|s| boolean(s).unwrap_or(true)).unwrap_or(true)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        self.problem_spec_with(&self.constants(&BTreeMap::new())?)
    }

    /// The problem with parameter `name` set to `value`.
    pub fn problem_spec_at(&self, name: &str, value: f64) -> Result<ProblemSpec> {
        let overrides = BTreeMap::from([(name.to_string(), value)]);
        self.problem_spec_with(&self.constants(&overrides)?)
    }

    fn problem_spec_with(&self, constants: &BTreeMap<String, f64>) -> Result<ProblemSpec> {
        let p = &self.problem;
        let first_line = p.values().map(|s| s.line).min().unwrap_or(1);
        let dim = match p.get("dimension") {
            Some(s) => {
                let d = integer(s)?;
                if !(1..=2).contains(&d) {
                    return Err(config_error(s.line, format!("dimension must be 1 or 2, got {d}")));
                }
                d
            }
            None => 1,
        };
        let per_axis = |key: &str, default: f64| -> Result<Vec<f64>> {
            match p.get(key) {
                None => Ok(vec![default; dim]),
                Some(s) => {
                    let v = constant_list(s, constants)?;
                    match v.len() {
                        1 => Ok(vec![v[0]; dim]),
                        n if n == dim => Ok(v),
                        n => Err(config_error(s.line, format!("expected 1 or {dim} values, got {n}"))),
                    }
                }
            }
        };
        let v_setting = p
            .get("V")
            .ok_or_else(|| config_error(first_line, "missing potential V in [problem]"))?;
        let potential = Expression::parse_with_constants(&v_setting.value, dim, constants)
            .map_err(|e| config_error(v_setting.line, e.to_string()))?;

        let flags: Vec<bool> = match p.get("reflection") {
            None => vec![true; dim],
            Some(s) => {
                let flags = integer_list(s)?;
                if flags.len() != dim || flags.iter().any(|&f| f > 1) {
                    return Err(config_error(s.line, format!("reflection needs {dim} entries of 0 or 1")));
                }
                flags.into_iter().map(|f| f == 1).collect()
            }
        };
        let center = per_axis("center", 0.0)?;
        let scales = per_axis("length_scale", 1.0)?;
        let kinetic = match p.get("kinetic") {
            Some(s) => constant(s, constants)?,
            None => 0.5,
        };
        let modes = match p.get("modes") {
            Some(s) => integer(s)?,
            None => 40,
        };
        let wrap_line = |line: usize| move |e: Error| config_error(line, e.to_string());
        let mut basis = HermiteBasis::new(dim, modes, &scales, kinetic)
            .and_then(|b| b.with_centers(&center))
            .map_err(wrap_line(p.get("modes").map(|s| s.line).unwrap_or(first_line)))?;
        if let Some(s) = p.get("quadrature_order") {
            basis = basis.with_quadrature_order(integer(s)?).map_err(wrap_line(s.line))?;
        }
        let symmetry_tolerance = match p.get("symmetry_tolerance") {
            Some(s) => constant(s, constants)?,
            None => DEFAULT_SYMMETRY_TOLERANCE,
        };

        let form = p.get("perturbation").map(|s| s.value.as_str()).unwrap_or("pt");
        let perturbation = match form {
            "pt" => {
                for key in ["h1_file", "j_file"] {
                    if let Some(s) = p.get(key) {
                        return Err(config_error(s.line, format!("'{key}' needs perturbation = matrix")));
                    }
                }
                let w = p
                    .get("W")
                    .ok_or_else(|| config_error(first_line, "missing perturbation W in [problem]"))?;
                Perturbation::Pt(
                    Expression::parse_with_constants(&w.value, dim, constants)
                        .map_err(|e| config_error(w.line, e.to_string()))?,
                )
            }
            "matrix" => {
                if let Some(s) = p.get("W") {
                    return Err(config_error(s.line, "W is only used with perturbation = pt"));
                }
                let h1 = p
                    .get("h1_file")
                    .ok_or_else(|| config_error(first_line, "perturbation = matrix needs h1_file"))?;
                let h1 = read_matrix(&self.resolve(&h1.value)).map_err(wrap_line(h1.line))?;
                let j = match p.get("j_file") {
                    Some(s) => Some(read_matrix(&self.resolve(&s.value)).map_err(wrap_line(s.line))?),
                    None => None,
                };
                Perturbation::Matrix { h1, j }
            }
            other => {
                let line = p["perturbation"].line;
                return Err(config_error(line, format!("perturbation must be pt or matrix, got '{other}'")));
            }
        };
        Ok(ProblemSpec {
            basis,
            potential,
            perturbation,
            reflection: Reflection::new(&flags, &center),
            symmetry_tolerance,
        })
    }

    pub fn task_settings(&self) -> Result<TaskSettings> {
        self.task_settings_with(&self.constants(&BTreeMap::new())?)
    }

    fn task_settings_with(&self, constants: &BTreeMap<String, f64>) -> Result<TaskSettings> {
        let t = &self.task;
        let num = |key: &str| t.get(key).map(|s| constant(s, constants)).transpose();
        let int = |key: &str| t.get(key).map(integer).transpose();
        let pair = match t.get("pair") {
            None => None,
            Some(s) => match integer_list(s)?.as_slice() {
                &[a, b] if a != b => Some((a, b)),
                _ => return Err(config_error(s.line, "pair needs two distinct indices")),
            },
        };
        let two = |key: &str| -> Result<Option<(f64, f64)>> {
            match t.get(key) {
                None => Ok(None),
                Some(s) => match constant_list(s, constants)?.as_slice() {
                    &[a, b] if a < b => Ok(Some((a, b))),
                    _ => Err(config_error(s.line, format!("{key} needs two increasing values"))),
                },
            }
        };
        let window = match (t.get("window"), t.get("window_count")) {
            (Some(a), Some(b)) => {
                return Err(config_error(
                    b.line,
                    format!("window (line {}) and window_count are exclusive", a.line),
                ))
            }
            (Some(_), None) => two("window")?.map(|(a, b)| Window::Interval(a, b)),
            (None, Some(s)) => Some(Window::Count(integer(s)?)),
            (None, None) => None,
        };
        let law = match t.get("law") {
            None => None,
            Some(s) => Some(match s.value.as_str() {
                "inverse" => SplittingLaw::Inverse,
                "inverse-square" => SplittingLaw::InverseSquare,
                other => {
                    return Err(config_error(
                        s.line,
                        format!("law must be inverse or inverse-square, got '{other}'"),
                    ))
                }
            }),
        };
        let parameter = match t.get("parameter") {
            None => None,
            Some(s) => {
                if !self.parameters.iter().any(|(k, _)| *k == s.value) {
                    return Err(config_error(s.line, format!("no parameter named '{}'", s.value)));
                }
                Some(s.value.clone())
            }
        };
        Ok(TaskSettings {
            epsilon: t.get("epsilon").map(|s| constant_list(s, constants)).transpose()?,
            count: int("count")?,
            lambda0: num("lambda0")?,
            cluster_tolerance: num("cluster_tolerance")?,
            pair,
            bracket: two("bracket")?,
            series_order: int("series_order")?.unwrap_or(10),
            trust_tolerance: num("trust_tolerance")?.unwrap_or(1e-8),
            fit_from: int("fit_from")?,
            epsilon_min: num("epsilon_min")?,
            epsilon_max: num("epsilon_max")?,
            steps: int("steps")?,
            window,
            parameter,
            values: t.get("values").map(|s| constant_list(s, constants)).transpose()?,
            law,
        })
    }

    /// Line of a task key, for error messages.
    pub fn task_line(&self, key: &str) -> usize {
        self.task
            .get(key)
            .map(|s| s.line)
            .or_else(|| self.task.values().map(|s| s.line).min())
            .unwrap_or_else(|| self.source.lines().count().max(1))
    }
}

/// Typed `[task]` section. Which fields are required depends on the task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSettings {
    pub epsilon: Option<Vec<f64>>,
    pub count: Option<usize>,
    pub lambda0: Option<f64>,
    pub cluster_tolerance: Option<f64>,
    pub pair: Option<(usize, usize)>,
    pub bracket: Option<(f64, f64)>,
    pub series_order: usize,
    pub trust_tolerance: f64,
    pub fit_from: Option<usize>,
    pub epsilon_min: Option<f64>,
    pub epsilon_max: Option<f64>,
    pub steps: Option<usize>,
    pub window: Option<Window>,
    pub parameter: Option<String>,
    pub values: Option<Vec<f64>>,
    pub law: Option<SplittingLaw>,
}
