use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::Term;

/// Canonical form: constants folded, `+` and `*` flattened and ordered,
/// subtraction, negation and division rewritten into sums, products and powers.
pub fn normalize(t: &Term) -> Term {
    match t {
        Term::Const(_) | Term::Sym(_) => t.clone(),
        Term::App(op, args) => build(op, args.iter().map(normalize).collect()),
    }
}

fn build(op: &str, mut args: Vec<Term>) -> Term {
    match (op, args.len()) {
        ("+", _) => sum(args),
        ("*", _) => product(args),
        ("-", 2) => {
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            sum(vec![a, product(vec![Term::int(-1), b])])
        }
        ("neg", 1) => product(vec![Term::int(-1), args.pop().unwrap()]),
        ("/", 2) => {
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            product(vec![a, power(b, Term::int(-1))])
        }
        ("^", 2) => {
            let e = args.pop().unwrap();
            let b = args.pop().unwrap();
            power(b, e)
        }
        ("at", 3) if !args[0].has_derivative() => {
            if let Term::Sym(z) = &args[1] {
                return normalize(&args[0].subst_sym(z, &args[2]));
            }
            Term::App(op.to_string(), args)
        }
        _ => Term::App(op.to_string(), args),
    }
}

fn sum(args: Vec<Term>) -> Term {
    let mut c = BigRational::zero();
    let mut rest = Vec::new();
    for a in flatten("+", args) {
        match a {
            Term::Const(k) => c += k,
            other => rest.push(other),
        }
    }
    rest.sort();
    if !c.is_zero() {
        rest.push(Term::Const(c));
    }
    match rest.len() {
        0 => Term::int(0),
        1 => rest.pop().unwrap(),
        _ => Term::App("+".into(), rest),
    }
}

fn product(args: Vec<Term>) -> Term {
    let mut c = BigRational::one();
    let mut rest = Vec::new();
    for a in flatten("*", args) {
        match a {
            Term::Const(k) => c *= k,
            other => rest.push(other),
        }
    }
    if c.is_zero() {
        return Term::int(0);
    }
    rest.sort();
    if !c.is_one() {
        rest.insert(0, Term::Const(c));
    }
    match rest.len() {
        0 => Term::int(1),
        1 => rest.pop().unwrap(),
        _ => Term::App("*".into(), rest),
    }
}

fn flatten(op: &str, args: Vec<Term>) -> Vec<Term> {
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        match a {
            Term::App(o, inner) if o == op => out.extend(inner),
            other => out.push(other),
        }
    }
    out
}

fn power(b: Term, e: Term) -> Term {
    if let Some(k) = e.as_const() {
        if k.is_zero() {
            return Term::int(1);
        }
        if k.is_one() {
            return b;
        }
        if let (Some(base), true) = (b.as_const(), k.is_integer()) {
            if let Some(n) = k.to_i32().filter(|n| n.abs() <= 64) {
                if !(base.is_zero() && n < 0) {
                    return Term::Const(base.pow(n));
                }
            }
        }
    }
    if b.as_const().is_some_and(|c| c.is_one()) {
        return Term::int(1);
    }
    if b.as_const().is_some_and(|c| c.is_zero()) && e.as_const().is_some_and(|k| k.is_positive()) {
        return Term::int(0);
    }
    Term::App("^".into(), vec![b, e])
}

