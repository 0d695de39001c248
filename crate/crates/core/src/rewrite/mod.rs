//! Term rewriting with expert and buggy rules: solution graphs for tasks and
//! explanation search for student answers.

mod engine;
mod normal;
mod pack;
mod pattern;
mod syntax;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use engine::*;
pub use normal::normalize;
pub use pack::{RewriteRule, RuleKind, RulePack};
pub use pattern::{instantiate, match_all, match_term, Guard, Head, Pattern, Substitution};
pub use syntax::{parse_pattern, parse_term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(BigRational),
    Sym(String),
    App(String, Vec<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("{line}:{col}: {message}")]
    Parse { line: u32, col: u32, message: String },
    #[error("rule pack line {line}: {message}")]
    Pack { line: usize, message: String },
    #[error("no explanation found within {max_steps} steps")]
    NoExplanation { max_steps: usize },
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Term {
        Term::Const(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn sym(name: &str) -> Term {
        Term::Sym(name.to_string())
    }

    pub fn app(op: &str, args: Vec<Term>) -> Term {
        Term::App(op.to_string(), args)
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn contains_sym(&self, name: &str) -> bool {
        match self {
            Term::Const(_) => false,
            Term::Sym(s) => s == name,
            Term::App(_, args) => args.iter().any(|a| a.contains_sym(name)),
        }
    }

    /// True when some derivative operator remains in the term.
    pub fn has_derivative(&self) -> bool {
        match self {
            Term::App(op, args) => diff_var(op).is_some() || args.iter().any(Term::has_derivative),
            _ => false,
        }
    }

    pub fn subst_sym(&self, name: &str, value: &Term) -> Term {
        match self {
            Term::Sym(s) if s == name => value.clone(),
            Term::App(op, args) => Term::App(op.clone(), args.iter().map(|a| a.subst_sym(name, value)).collect()),
            _ => self.clone(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    /// Numeric value with the given symbol bindings; `None` outside the domain.
    pub fn eval_f64(&self, env: &[(&str, f64)]) -> Option<f64> {
        let v = match self {
            Term::Const(c) => c.to_f64()?,
            Term::Sym(s) => env.iter().find(|(n, _)| n == s)?.1,
            Term::App(op, args) => {
                let vals = args.iter().map(|a| a.eval_f64(env)).collect::<Option<Vec<f64>>>()?;
                match (op.as_str(), vals.as_slice()) {
                    ("+", _) => vals.iter().sum(),
                    ("*", _) => vals.iter().product(),
                    ("-", [a, b]) => a - b,
                    ("/", [a, b]) => a / b,
                    ("neg", [a]) => -a,
                    ("^", [a, b]) => {
                        if b.fract() == 0.0 && b.abs() < 1e6 {
                            a.powi(*b as i32)
                        } else {
                            a.powf(*b)
                        }
                    }
                    ("log", [a]) if *a > 0.0 => a.ln(),
                    ("sin", [a]) => a.sin(),
                    ("cos", [a]) => a.cos(),
                    _ => return None,
                }
            }
        };
        v.is_finite().then_some(v)
    }
}

/// The variable of a derivative operator name such as `d/dx`.
pub fn diff_var(op: &str) -> Option<&str> {
    op.strip_prefix("d/d").filter(|v| !v.is_empty())
}

/// Fixed arity for known operators; `None` for variadic or free function symbols.
pub fn arity(op: &str) -> Option<usize> {
    match op {
        "eq" | "^" | "-" | "/" => Some(2),
        "at" => Some(3),
        "neg" | "log" | "sin" | "cos" => Some(1),
        _ if diff_var(op).is_some() => Some(1),
        _ => None,
    }
}

pub(crate) fn is_ac(op: &str) -> bool {
    op == "+" || op == "*"
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

const SUM: u8 = 1;
const PROD: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn is_negative(t: &Term) -> bool {
    match t {
        Term::Const(c) => c.is_negative(),
        Term::App(op, args) if op == "*" => args.first().and_then(Term::as_const).is_some_and(|c| c.is_negative()),
        _ => false,
    }
}

fn negated(t: &Term) -> Term {
    match t {
        Term::Const(c) => Term::Const(-c),
        Term::App(op, args) if op == "*" => {
            let c = -args[0].as_const().unwrap();
            let mut rest: Vec<Term> = args[1..].to_vec();
            if !c.is_one() {
                rest.insert(0, Term::Const(c));
            }
            if rest.len() == 1 {
                rest.pop().unwrap()
            } else {
                Term::App(op.clone(), rest)
            }
        }
        _ => t.clone(),
    }
}

fn prec(t: &Term) -> u8 {
    match t {
        Term::Const(c) if c.is_integer() => {
            if c.is_negative() {
                NEG
            } else {
                ATOM
            }
        }
        Term::Const(_) => PROD,
        Term::Sym(_) => ATOM,
        Term::App(op, args) => match op.as_str() {
            "+" | "-" => SUM,
            "*" => {
                if args.first().and_then(Term::as_const).is_some_and(|c| *c == -BigRational::one()) {
                    NEG
                } else {
                    PROD
                }
            }
            "/" => PROD,
            "neg" => NEG,
            "^" => POW,
            _ => ATOM,
        },
    }
}

fn write_prec(f: &mut fmt::Formatter<'_>, t: &Term, min: u8) -> fmt::Result {
    if prec(t) < min {
        write!(f, "(")?;
        write_term(f, t)?;
        write!(f, ")")
    } else {
        write_term(f, t)
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Const(c) => write!(f, "{c}"),
        Term::Sym(s) => write!(f, "{s}"),
        Term::App(op, args) => match (op.as_str(), args.as_slice()) {
            ("+", [first, rest @ ..]) => {
                write_prec(f, first, SUM)?;
                for a in rest {
                    if is_negative(a) {
                        write!(f, " - ")?;
                        write_prec(f, &negated(a), PROD)?;
                    } else {
                        write!(f, " + ")?;
                        write_prec(f, a, PROD)?;
                    }
                }
                Ok(())
            }
            ("*", [first, rest @ ..]) if !rest.is_empty() => {
                let mut factors = rest.iter();
                match first.as_const() {
                    Some(c) if *c == -BigRational::one() => {
                        write!(f, "-")?;
                        write_prec(f, factors.next().unwrap(), NEG)?;
                    }
                    Some(_) => write_prec(f, first, PROD)?,
                    None => {
                        write_prec(f, first, NEG)?;
                    }
                }
                for a in factors {
                    write!(f, "*")?;
                    write_prec(f, a, NEG)?;
                }
                Ok(())
            }
            ("-", [a, b]) => {
                write_prec(f, a, SUM)?;
                write!(f, " - ")?;
                write_prec(f, b, PROD)
            }
            ("/", [a, b]) => {
                write_prec(f, a, PROD)?;
                write!(f, "/")?;
                write_prec(f, b, NEG)
            }
            ("neg", [a]) => {
                write!(f, "-")?;
                write_prec(f, a, NEG)
            }
            ("^", [a, b]) => {
                write_prec(f, a, ATOM)?;
                write!(f, "^")?;
                write_prec(f, b, NEG)
            }
            _ => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write_term(f, a)?;
                }
                write!(f, ")")
            }
        },
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self)
    }
}
