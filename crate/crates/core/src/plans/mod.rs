//! Plan algebra over the three reasoning layers, and its typing into Bloom
//! complexity.

mod parser;
mod typing;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;

use crate::pos::Pos;

pub use parser::{parse_plan, parse_plan_doc};
pub use typing::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Layer {
    Eval,
    DR,
    MDR,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Eval, Layer::DR, Layer::MDR];
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Layer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "EVAL" | "E" => Ok(Layer::Eval),
            "DR" => Ok(Layer::DR),
            "MDR" => Ok(Layer::MDR),
            _ => Err(format!("unknown layer `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Eq)]
pub struct Plan {
    pub node: PlanNode,
    pub pos: Pos,
}

/// Structural equality; positions are ignored.
impl PartialEq for Plan {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanNode {
    Atom {
        verb: String,
        layer: Layer,
        subject: Option<String>,
    },
    Seq(Box<Plan>, Box<Plan>),
    Choice(Box<Plan>, Box<Plan>),
    Star(Box<Plan>),
    RuleRef(String),
}

impl Plan {
    pub fn new(node: PlanNode, pos: Pos) -> Plan {
        Plan { node, pos }
    }

    pub fn atom(verb: &str, layer: Layer) -> Plan {
        Plan::new(
            PlanNode::Atom {
                verb: verb.to_string(),
                layer,
                subject: None,
            },
            Pos::default(),
        )
    }

    pub fn seq(a: Plan, b: Plan) -> Plan {
        let pos = a.pos;
        Plan::new(PlanNode::Seq(Box::new(a), Box::new(b)), pos)
    }

    pub fn choice(a: Plan, b: Plan) -> Plan {
        let pos = a.pos;
        Plan::new(PlanNode::Choice(Box::new(a), Box::new(b)), pos)
    }

    pub fn star(a: Plan) -> Plan {
        let pos = a.pos;
        Plan::new(PlanNode::Star(Box::new(a)), pos)
    }

    fn prec(&self) -> u8 {
        match self.node {
            PlanNode::Choice(..) => 0,
            PlanNode::Seq(..) => 1,
            _ => 2,
        }
    }
}

/// Renders with the fewest parentheses that parse back to the same tree.
impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |f: &mut fmt::Formatter<'_>, p: &Plan, min: u8| {
            if p.prec() < min {
                write!(f, "({p})")
            } else {
                write!(f, "{p}")
            }
        };
        match &self.node {
            PlanNode::Atom {
                verb,
                layer,
                subject,
            } => {
                write!(f, "{verb}({layer}")?;
                if let Some(s) = subject {
                    write!(f, ", {s:?}")?;
                }
                write!(f, ")")
            }
            PlanNode::Seq(a, b) => {
                side(f, a, 1)?;
                write!(f, " ; ")?;
                side(f, b, 2)
            }
            PlanNode::Choice(a, b) => {
                side(f, a, 0)?;
                write!(f, " | ")?;
                side(f, b, 1)
            }
            PlanNode::Star(body) => write!(f, "({body})*"),
            PlanNode::RuleRef(name) => write!(f, "{name}"),
        }
    }
}

/// A plan together with its named rule definitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanDoc {
    pub rules: IndexMap<String, Plan>,
    pub main: Plan,
}

impl PlanDoc {
    pub fn single(main: Plan) -> PlanDoc {
        PlanDoc {
            rules: IndexMap::new(),
            main,
        }
    }
}

impl fmt::Display for PlanDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, body) in &self.rules {
            writeln!(f, "{name} => {body} .")?;
        }
        write!(f, "{}", self.main)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("{pos}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("{pos}: undefined plan rule `{name}`")]
    UndefinedRule { name: String, pos: Pos },
    #[error("{pos}: plan rule `{name}` is recursive")]
    RecursiveRule { name: String, pos: Pos },
    #[error("exercise has no plan")]
    MissingPlan,
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
}

impl PlanError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            PlanError::Parse { pos, .. }
            | PlanError::UndefinedRule { pos, .. }
            | PlanError::RecursiveRule { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}
