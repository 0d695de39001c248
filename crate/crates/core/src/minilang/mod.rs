//! Small imperative language used for every code fragment in an exercise.

mod ast;
mod eval;
mod parser;

pub use ast::*;
pub use eval::{evaluate, evaluate_with_trace, trace, Effect, RuntimeErrorKind, Status, TraceStep, Value};
pub use parser::parse_program;

use crate::pos::Pos;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("{pos}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("{pos}: unbound name `{name}`")]
    UnboundName { name: String, pos: Pos },
}

impl LangError {
    pub fn pos(&self) -> Pos {
        match self {
            LangError::Parse { pos, .. } | LangError::UnboundName { pos, .. } => *pos,
        }
    }
}

/// Parses and runs in one go; mostly a convenience for tests and the CLI.
pub fn run_source(source: &str, fuel: u64) -> Result<Effect, LangError> {
    Ok(evaluate(&parse_program(source)?, fuel))
}
