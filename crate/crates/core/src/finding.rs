//! Diagnostics shared by the checking tools.

use serde::Serialize;

use crate::pos::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub position: Option<Pos>,
}

impl Finding {
    pub fn new(severity: Severity, code: &str, message: impl Into<String>, position: Option<Pos>) -> Self {
        Finding {
            severity,
            code: code.to_string(),
            message: message.into(),
            position,
        }
    }
}

/// Sorts by position (unpositioned findings first), then code.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| (a.position, &a.code, &a.message).cmp(&(b.position, &b.code, &b.message)));
}

pub fn max_severity(findings: &[Finding]) -> Option<Severity> {
    findings.iter().map(|f| f.severity).max()
}
