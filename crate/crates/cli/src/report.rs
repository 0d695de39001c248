use std::process::ExitCode;

use exr_core::finding::{max_severity, sort_findings, Finding, Severity};
use exr_core::Pos;
use serde::Serialize;
use serde_json::Value;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Clean = 0,
    Warnings = 1,
    Errors = 2,
    Failure = 3,
}

impl Exit {
    pub fn from_findings(findings: &[Finding]) -> Exit {
        match max_severity(findings) {
            None | Some(Severity::Info) => Exit::Clean,
            Some(Severity::Warning) => Exit::Warnings,
            Some(Severity::Error) => Exit::Errors,
        }
    }

    pub fn code(self) -> ExitCode {
        ExitCode::from(self as u8)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool_version: &'static str,
    pub input: String,
    pub findings: Vec<Finding>,
    pub payload: Value,
    /// Findings already rendered in the human summary.
    #[serde(skip)]
    pub shown: bool,
}

impl Report {
    pub fn new(input: impl Into<String>, mut findings: Vec<Finding>, payload: Value) -> Report {
        sort_findings(&mut findings);
        Report {
            tool_version: TOOL_VERSION,
            input: input.into(),
            findings,
            payload,
            shown: false,
        }
    }

    pub fn failure(input: impl Into<String>, code: &str, message: impl Into<String>, pos: Option<Pos>) -> Report {
        Report::new(input, vec![Finding::new(Severity::Error, code, message, pos)], Value::Null)
    }

    pub fn print_findings(&self) {
        if !self.shown {
            print!("{}", self.findings_text());
        }
    }

    pub fn findings_text(&self) -> String {
        let mut out = String::new();
        for f in &self.findings {
            let sev = match f.severity {
                Severity::Info => "info",
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            match f.position {
                Some(p) => out.push_str(&format!("{}:{p}: {sev}[{}]: {}\n", self.input, f.code, f.message)),
                None => out.push_str(&format!("{}: {sev}[{}]: {}\n", self.input, f.code, f.message)),
            }
        }
        out
    }
}
