use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Error;

use super::config::TaskKind;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub sha256: String,
    /// Command-line overrides applied on top of the file.
    pub overrides: BTreeMap<String, f64>,
    pub text: String,
}

impl ConfigEcho {
    pub fn new(source: &str, overrides: BTreeMap<String, f64>) -> Self {
        ConfigEcho {
            sha256: hex::encode(Sha256::digest(source.as_bytes())),
            overrides,
            text: source.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        let debug = format!("{e:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("Error")
            .to_string();
        ErrorRecord {
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    HypothesisViolation,
    Error,
}

/// Everything a run produced. Apart from `timestamp`, the serialized form
/// is a deterministic function of the configuration and the build.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: TaskKind,
    pub status: Status,
    pub exit_code: i32,
    pub config: ConfigEcho,
    pub operator: Value,
    pub results: Value,
    pub diagnostics: Value,
    pub error: Option<ErrorRecord>,
    pub timestamp: u64,
}

impl ReportDocument {
    pub fn new(task: TaskKind, config: ConfigEcho) -> Self {
        ReportDocument {
            tool: "ptspec",
            version: TOOL_VERSION,
            task,
            status: Status::Ok,
            exit_code: 0,
            config,
            operator: Value::Null,
            results: Value::Null,
            diagnostics: Value::Null,
            error: None,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn fail(&mut self, e: &Error) {
        self.exit_code = e.exit_code();
        self.status = if e.is_hypothesis_violation() {
            Status::HypothesisViolation
        } else {
            Status::Error
        };
        self.error = Some(e.into());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
