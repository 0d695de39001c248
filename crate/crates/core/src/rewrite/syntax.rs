use num_bigint::BigInt;
use num_rational::BigRational;

use super::pattern::{Guard, Head, Pattern};
use super::{arity, diff_var, RewriteError, Term};
use crate::pos::Cursor;

/// Parse a concrete term. Subtraction, negation and division are kept as
/// written; `normalize` rewrites them.
pub fn parse_term(src: &str) -> Result<Term, RewriteError> {
    let p = Parser::new(src, false).run()?;
    Ok(to_term(p))
}

/// Parse a rule pattern or template: capitalised names are variables,
/// `X:guard` restricts a variable, `F(..)` and `d/dV(..)` bind operator
/// names, and `$n` refers to the n-th solved subtask.
pub fn parse_pattern(src: &str) -> Result<Pattern, RewriteError> {
    Parser::new(src, true).run()
}

fn to_term(p: Pattern) -> Term {
    match p {
        Pattern::Const(c) => Term::Const(c),
        Pattern::Sym(s) => Term::Sym(s),
        Pattern::App(Head::Op(op), args) => Term::App(op, args.into_iter().map(to_term).collect()),
        _ => unreachable!("variables only appear in pattern mode"),
    }
}

struct Parser<'a> {
    cur: Cursor<'a>,
    patterns: bool,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, patterns: bool) -> Self {
        Parser { cur: Cursor::new(src), patterns }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, RewriteError> {
        let pos = self.cur.pos();
        Err(RewriteError::Parse { line: pos.line, col: pos.col, message: message.into() })
    }

    fn ws(&mut self) {
        self.cur.eat_while(|c| c.is_whitespace());
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.cur.peek()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.cur.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), RewriteError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self.peek().map_or("end of input".to_string(), |c| format!("`{c}`"));
            self.err(format!("expected `{c}`, found {found}"))
        }
    }

    fn run(mut self) -> Result<Pattern, RewriteError> {
        let lhs = self.sum()?;
        let t = if self.eat('=') {
            let rhs = self.sum()?;
            Pattern::App(Head::Op("eq".into()), vec![lhs, rhs])
        } else {
            lhs
        };
        if let Some(c) = self.peek() {
            return self.err(format!("unexpected `{c}`"));
        }
        Ok(t)
    }

    fn sum(&mut self) -> Result<Pattern, RewriteError> {
        let mut terms = vec![self.product()?];
        loop {
            if self.eat('+') {
                terms.push(self.product()?);
            } else if self.peek() == Some('-') && self.cur.peek2() != Some('>') {
                self.cur.bump();
                let t = self.product()?;
                terms.push(negate(t));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { op("+", terms) })
    }

    fn product(&mut self) -> Result<Pattern, RewriteError> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat('*') {
                factors.push(self.unary()?);
            } else if self.peek() == Some('/') {
                self.cur.bump();
                let d = self.unary()?;
                factors.push(op("^", vec![d, Pattern::Const(int(-1))]));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { op("*", factors) })
    }

    fn unary(&mut self) -> Result<Pattern, RewriteError> {
        if self.peek() == Some('-') {
            self.cur.bump();
            let t = self.unary()?;
            return Ok(negate(t));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Pattern, RewriteError> {
        let base = self.implicit()?;
        if self.eat('^') {
            let e = self.unary()?;
            return Ok(op("^", vec![base, e]));
        }
        Ok(base)
    }

    /// A number directly followed by a name or parenthesis multiplies: `2x`.
    fn implicit(&mut self) -> Result<Pattern, RewriteError> {
        let first = self.atom()?;
        if matches!(first, Pattern::Const(_)) {
            if let Some(c) = self.cur.peek() {
                if is_ident_start(c) || c == '(' {
                    let next = self.power()?;
                    return Ok(op("*", vec![first, next]));
                }
            }
        }
        Ok(first)
    }

    fn atom(&mut self) -> Result<Pattern, RewriteError> {
        match self.peek() {
            Some('(') => {
                self.cur.bump();
                let t = self.sum()?;
                self.expect(')')?;
                Ok(t)
            }
            Some(c) if c.is_ascii_digit() => {
                let digits = self.cur.eat_while(|c| c.is_ascii_digit());
                let n: BigInt = digits.parse().unwrap();
                Ok(Pattern::Const(BigRational::from_integer(n)))
            }
            Some('$') if self.patterns => {
                self.cur.bump();
                let digits = self.cur.eat_while(|c| c.is_ascii_digit());
                match digits.parse::<usize>() {
                    Ok(n) if n >= 1 => Ok(Pattern::Result(n)),
                    _ => self.err("expected a subtask number after `$`"),
                }
            }
            Some(c) if is_ident_start(c) => self.named(),
            Some(c) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of input"),
        }
    }

    fn named(&mut self) -> Result<Pattern, RewriteError> {
        let start = self.cur.pos();
        let mut name = self.cur.eat_while(is_ident_char).to_string();
        if name == "d" && self.cur.rest().starts_with("/d") {
            let rest = &self.cur.rest()[2..];
            let var: String = rest.chars().take_while(|c| is_ident_char(*c)).collect();
            if !var.is_empty() && rest[var.len()..].starts_with('(') {
                self.cur.bump();
                self.cur.bump();
                self.cur.eat_while(is_ident_char);
                name = format!("d/d{var}");
            }
        }
        let patterns = self.patterns;
        let is_var = |n: &str| patterns && n.starts_with(|c: char| c.is_ascii_uppercase());
        if self.cur.peek() == Some('(') {
            self.cur.bump();
            let mut args = Vec::new();
            if !self.eat(')') {
                loop {
                    args.push(self.sum()?);
                    if self.eat(')') {
                        break;
                    }
                    self.expect(',')?;
                }
            }
            let head = match diff_var(&name) {
                Some(v) if is_var(v) => Head::Diff(v.to_string()),
                _ if is_var(&name) => Head::Var(name.clone()),
                _ => Head::Op(name.clone()),
            };
            if let (Head::Op(o), Some(n)) = (&head, arity(&name)) {
                if n != args.len() {
                    return Err(RewriteError::Parse {
                        line: start.line,
                        col: start.col,
                        message: format!("`{o}` takes {n} argument(s), found {}", args.len()),
                    });
                }
            }
            return Ok(Pattern::App(head, args));
        }
        if is_var(&name) {
            let guard = if self.cur.peek() == Some(':') && self.cur.peek2().is_some_and(is_ident_start) {
                self.cur.bump();
                self.guard()?
            } else {
                Guard::Any
            };
            return Ok(Pattern::Var(name, guard));
        }
        Ok(Pattern::Sym(name))
    }

    fn guard(&mut self) -> Result<Guard, RewriteError> {
        let g = self.cur.eat_while(is_ident_char).to_string();
        match g.as_str() {
            "num" => Ok(Guard::Num),
            "sym" => Ok(Guard::Sym),
            "app" => Ok(Guard::App),
            "free" => {
                self.expect('(')?;
                self.ws();
                let v = self.cur.eat_while(is_ident_char).to_string();
                if v.is_empty() {
                    return self.err("expected a name inside `free(..)`");
                }
                self.expect(')')?;
                Ok(Guard::Free(v))
            }
            _ => self.err(format!("unknown guard `{g}`")),
        }
    }
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn op(name: &str, args: Vec<Pattern>) -> Pattern {
    Pattern::App(Head::Op(name.into()), args)
}

fn negate(t: Pattern) -> Pattern {
    match t {
        Pattern::Const(c) => Pattern::Const(-c),
        other => op("neg", vec![other]),
    }
}
