//! Exercise specification files (`.exr`): question text with fenced code,
//! answer options, declared Bloom target, prerequisites and solution plan.

mod parser;
mod validate;

use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use serde::Serialize;

use crate::bloom::{BloomCell, KnowledgeCategory, ProcessCategory};
use crate::minilang::{LangError, Program, Value};
use crate::plans::{PlanDoc, PlanError};
use crate::pos::Pos;

pub use parser::parse_spec;
pub use validate::*;

/// Marker replaced by each option's code in fill-in MCQs.
pub const FILL_MARKER: &str = "/* missing code */";

/// Target assumed when a spec declares none.
pub const DEFAULT_TARGET: BloomCell =
    BloomCell::new(ProcessCategory::Understand, KnowledgeCategory::Conceptual);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExerciseSpec {
    pub id: String,
    pub target: BloomCell,
    /// False when the target was filled in with [`DEFAULT_TARGET`].
    pub target_declared: bool,
    pub requires: Vec<String>,
    pub provenance: Option<Provenance>,
    /// Raw question body, fences included.
    pub question: String,
    pub code: Vec<CodeBlock>,
    /// All code blocks parsed as one program; `None` when there is no code.
    pub program: Option<Program>,
    pub mode: AnswerMode,
    pub options: Vec<McqOption>,
    /// Expected answer facets: the truth for fill-in MCQs and free-value questions.
    pub answer: Vec<Facet>,
    pub plan: Option<PlanDoc>,
    pub spans: Spans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnswerMode {
    Mcq,
    /// Options are code fragments spliced into the question at [`FILL_MARKER`].
    McqFill,
    FreeValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBlock {
    pub source: String,
    /// Document position of the block's first line.
    pub origin: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub template: String,
    pub seed: u64,
    pub bindings: IndexMap<String, String>,
}

#[derive(Debug, Clone, Eq)]
pub struct McqOption {
    pub key: char,
    pub label: String,
    pub expect: Option<Facet>,
    pub distractor_tag: Option<String>,
    pub correct: bool,
    pub pos: Pos,
}

impl PartialEq for McqOption {
    fn eq(&self, o: &Self) -> bool {
        (self.key, &self.label, &self.expect, &self.distractor_tag, self.correct)
            == (o.key, &o.label, &o.expect, &o.distractor_tag, o.correct)
    }
}

/// Observable part of an effect that an answer claims.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Facet {
    Stdout { text: String },
    Binding { name: String, value: Value },
    /// Free text; not checkable by evaluation.
    Text { text: String },
}

/// Section positions in the source; never part of equality.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Spans {
    pub exercise: Pos,
    pub question: Pos,
    pub mcq: Option<Pos>,
    pub answer: Option<Pos>,
    pub plan: Option<Pos>,
}

impl PartialEq for Spans {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("{pos}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("{pos}: in fenced code: {source}")]
    Code {
        pos: Pos,
        #[source]
        source: LangError,
    },
    #[error("in plan: {0}")]
    Plan(#[from] PlanError),
    #[error("{pos}: option key `{key}` used twice")]
    DuplicateOptionKey { key: char, pos: Pos },
    #[error("{pos}: no option is marked correct")]
    MissingCorrectOption { pos: Pos },
    #[error("{pos}: options {} are all marked correct", keys.iter().collect::<String>())]
    MultipleCorrectOptions { keys: Vec<char>, pos: Pos },
}

impl SpecError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            SpecError::Parse { pos, .. }
            | SpecError::Code { pos, .. }
            | SpecError::DuplicateOptionKey { pos, .. }
            | SpecError::MissingCorrectOption { pos }
            | SpecError::MultipleCorrectOptions { pos, .. } => Some(*pos),
            SpecError::Plan(e) => e.pos(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            SpecError::Parse { .. } => "ParseError",
            SpecError::Code { .. } => "CodeError",
            SpecError::Plan(_) => "PlanError",
            SpecError::DuplicateOptionKey { .. } => "DuplicateOptionKey",
            SpecError::MissingCorrectOption { .. } => "MissingCorrectOption",
            SpecError::MultipleCorrectOptions { .. } => "MultipleCorrectOptions",
        }
    }
}

impl ExerciseSpec {
    /// All fenced code blocks joined into one program source.
    pub fn code_source(&self) -> String {
        self.code
            .iter()
            .map(|b| b.source.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn correct_option(&self) -> Option<&McqOption> {
        self.options.iter().find(|o| o.correct)
    }

    pub fn is_mcq(&self) -> bool {
        matches!(self.mode, AnswerMode::Mcq | AnswerMode::McqFill)
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Facet::Stdout { text } => write!(f, "stdout {}", quote(text)),
            Facet::Text { text } => write!(f, "text {}", quote(text)),
            Facet::Binding { name, value } => write!(f, "{name} = {value}"),
        }
    }
}

/// Canonical rendering; `parse_spec(&render(s))` equals `s`.
pub fn render(spec: &ExerciseSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "exercise {} {{", quote(&spec.id));
    if spec.target_declared {
        let _ = writeln!(
            out,
            "  target: {} x {}",
            spec.target.process, spec.target.knowledge
        );
    }
    if !spec.requires.is_empty() {
        let _ = writeln!(out, "  requires: {}", spec.requires.join(", "));
    }
    if let Some(p) = &spec.provenance {
        let _ = write!(out, "  provenance: {} seed {}", p.template, p.seed);
        for (k, v) in &p.bindings {
            let _ = write!(out, " {k}={}", quote(v));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "  question {{{}}}", spec.question);
    if spec.is_mcq() {
        let fill = if spec.mode == AnswerMode::McqFill { " fill" } else { "" };
        let _ = writeln!(out, "  mcq{fill} {{");
        for o in &spec.options {
            let _ = write!(out, "    {}: {}", o.key, quote(&o.label));
            if let Some(e) = &o.expect {
                let _ = write!(out, " expect {e}");
            }
            if let Some(t) = &o.distractor_tag {
                let _ = write!(out, " tag {t}");
            }
            if o.correct {
                out.push_str(" *");
            }
            out.push('\n');
        }
        out.push_str("  }\n");
    }
    if !spec.answer.is_empty() {
        let facets: Vec<String> = spec.answer.iter().map(Facet::to_string).collect();
        let _ = writeln!(out, "  answer: {}", facets.join(", "));
    }
    if let Some(plan) = &spec.plan {
        out.push_str("  plan {\n");
        for line in plan.to_string().lines() {
            let _ = writeln!(out, "    {line}");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
