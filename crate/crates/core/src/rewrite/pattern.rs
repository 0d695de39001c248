use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;

use super::normal::normalize;
use super::{diff_var, is_ac, Term};

pub type Substitution = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    Any,
    Num,
    Sym,
    App,
    /// The bound term must not mention the named symbol (or the symbol bound
    /// to the named variable).
    Free(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    Op(String),
    /// Any function symbol of matching arity.
    Var(String),
    /// A derivative operator; binds its variable.
    Diff(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Const(BigRational),
    Sym(String),
    Var(String, Guard),
    /// Solution of the n-th subtask (1-based); templates only.
    Result(usize),
    App(Head, Vec<Pattern>),
}

impl Pattern {
    pub fn vars(&self, out: &mut Vec<String>) {
        let mut add = |v: &String| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            Pattern::Var(v, _) => add(v),
            Pattern::App(head, args) => {
                if let Head::Var(v) | Head::Diff(v) = head {
                    add(v);
                }
                for a in args {
                    a.vars(out);
                }
            }
            _ => {}
        }
    }

    pub fn max_result(&self) -> usize {
        match self {
            Pattern::Result(n) => *n,
            Pattern::App(_, args) => args.iter().map(Pattern::max_result).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn root_op(&self) -> Option<&str> {
        match self {
            Pattern::App(Head::Op(o), _) => Some(o),
            _ => None,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Const(c) => write!(f, "{c}"),
            Pattern::Sym(s) => write!(f, "{s}"),
            Pattern::Var(v, Guard::Any) => write!(f, "{v}"),
            Pattern::Var(v, Guard::Num) => write!(f, "{v}:num"),
            Pattern::Var(v, Guard::Sym) => write!(f, "{v}:sym"),
            Pattern::Var(v, Guard::App) => write!(f, "{v}:app"),
            Pattern::Var(v, Guard::Free(x)) => write!(f, "{v}:free({x})"),
            Pattern::Result(n) => write!(f, "${n}"),
            Pattern::App(head, args) => {
                match head {
                    Head::Op(o) | Head::Var(o) => write!(f, "{o}(")?,
                    Head::Diff(v) => write!(f, "d/d{v}(")?,
                }
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// First substitution matching `pattern` against the canonical form of
/// `subject`.
pub fn match_term(pattern: &Pattern, subject: &Term) -> Option<Substitution> {
    match_all(pattern, &normalize(subject)).into_iter().next()
}

/// Every substitution matching `pattern` against `subject` as given. Sums
/// and products are matched modulo associativity and commutativity.
pub fn match_all(pattern: &Pattern, subject: &Term) -> Vec<Substitution> {
    let mut out = Vec::new();
    match_into(pattern, subject, Substitution::new(), &mut out);
    let mut unique: Vec<Substitution> = Vec::with_capacity(out.len());
    for s in out {
        if !unique.contains(&s) {
            unique.push(s);
        }
    }
    unique
}

fn bind(mut s: Substitution, name: &str, value: Term) -> Option<Substitution> {
    match s.get(name) {
        Some(old) if *old != value => None,
        Some(_) => Some(s),
        None => {
            s.insert(name.to_string(), value);
            Some(s)
        }
    }
}

fn guard_ok(guard: &Guard, t: &Term, s: &Substitution) -> bool {
    match guard {
        Guard::Any => true,
        Guard::Num => t.is_const(),
        Guard::Sym => matches!(t, Term::Sym(_)),
        Guard::App => matches!(t, Term::App(..)),
        Guard::Free(v) => match s.get(v) {
            Some(Term::Sym(name)) => !t.contains_sym(name),
            Some(_) => false,
            None => !t.contains_sym(v),
        },
    }
}

fn is_product(t: &Term) -> bool {
    matches!(t, Term::App(op, _) if op == "*")
}

fn is_function_symbol(op: &str) -> bool {
    op.starts_with(|c: char| c.is_ascii_alphabetic()) && diff_var(op).is_none() && !matches!(op, "eq" | "at" | "neg")
}

fn match_into(p: &Pattern, t: &Term, s: Substitution, out: &mut Vec<Substitution>) {
    match p {
        Pattern::Var(name, guard) => {
            if let Some(bound) = s.get(name) {
                if bound == t {
                    out.push(s);
                }
            } else if guard_ok(guard, t, &s) {
                if let Some(s) = bind(s, name, t.clone()) {
                    out.push(s);
                }
            }
        }
        Pattern::Const(c) => {
            if t.as_const() == Some(c) {
                out.push(s);
            }
        }
        Pattern::Sym(n) => {
            if matches!(t, Term::Sym(m) if m == n) {
                out.push(s);
            }
        }
        Pattern::Result(_) => {}
        Pattern::App(Head::Op(o), pargs) if o == "*" && pargs.len() == 2 && !is_product(t) => {
            // `A:num * P` also matches a bare P with A = 1
            if let Pattern::Var(a, Guard::Num) = &pargs[0] {
                if let Some(s) = bind(s, a, Term::int(1)) {
                    match_into(&pargs[1], t, s, out);
                }
            }
        }
        Pattern::App(head, pargs) => {
            let Term::App(op, targs) = t else { return };
            let s = match head {
                Head::Op(o) if o == op => Some(s),
                Head::Op(_) => None,
                Head::Var(f) if is_function_symbol(op) && pargs.len() == targs.len() => bind(s, f, Term::Sym(op.clone())),
                Head::Var(_) => None,
                Head::Diff(v) => diff_var(op).and_then(|x| bind(s, v, Term::sym(x))),
            };
            let Some(s) = s else { return };
            if is_ac(op) && matches!(head, Head::Op(_)) && pargs.len() >= 2 {
                match_ac(op, pargs, targs, s, out);
            } else if pargs.len() == targs.len() {
                match_seq(pargs, targs, s, out);
            }
        }
    }
}

fn match_seq(pargs: &[Pattern], targs: &[Term], s: Substitution, out: &mut Vec<Substitution>) {
    let Some((p, prest)) = pargs.split_first() else {
        out.push(s);
        return;
    };
    let mut here = Vec::new();
    match_into(p, &targs[0], s, &mut here);
    for s in here {
        match_seq(prest, &targs[1..], s, out);
    }
}

/// Distribute the subject's operands over the pattern's operands in every
/// way that leaves no pattern operand empty.
fn match_ac(op: &str, pargs: &[Pattern], targs: &[Term], s: Substitution, out: &mut Vec<Substitution>) {
    let (k, n) = (pargs.len(), targs.len());
    if n < k || n > 12 {
        return;
    }
    let mut slot = vec![0usize; n];
    loop {
        let mut groups: Vec<Vec<Term>> = vec![Vec::new(); k];
        for (i, &g) in slot.iter().enumerate() {
            groups[g].push(targs[i].clone());
        }
        if groups.iter().all(|g| !g.is_empty()) {
            let terms: Vec<Term> = groups
                .into_iter()
                .map(|mut g| if g.len() == 1 { g.pop().unwrap() } else { normalize(&Term::App(op.into(), g)) })
                .collect();
            match_seq(pargs, &terms, s.clone(), out);
        }
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            slot[i] += 1;
            if slot[i] < k {
                break;
            }
            slot[i] = 0;
            i += 1;
        }
    }
}

/// Fill a template; variables must be bound and `$n` must be in range.
pub fn instantiate(template: &Pattern, s: &Substitution, results: &[Term]) -> Term {
    match template {
        Pattern::Const(c) => Term::Const(c.clone()),
        Pattern::Sym(n) => Term::Sym(n.clone()),
        Pattern::Var(v, _) => s[v].clone(),
        Pattern::Result(n) => results[n - 1].clone(),
        Pattern::App(head, args) => {
            let args = args.iter().map(|a| instantiate(a, s, results)).collect();
            let op = match head {
                Head::Op(o) => o.clone(),
                Head::Var(f) => match &s[f] {
                    Term::Sym(name) => name.clone(),
                    other => other.to_string(),
                },
                Head::Diff(v) => format!("d/d{}", s[v]),
            };
            Term::App(op, args)
        }
    }
}
