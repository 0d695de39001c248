use std::collections::HashSet;

use indexmap::IndexMap;

use super::{Layer, Plan, PlanDoc, PlanError, PlanNode};
use crate::pos::{Cursor, Pos};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(src: &str, origin: Pos) -> Result<Vec<(Tok, Pos)>, PlanError> {
    let mut cur = Cursor::new(src);
    let mut out = Vec::new();
    let at = |p: Pos| p.offset_by(origin, if p.line == 1 { origin.col - 1 } else { 0 });
    loop {
        cur.eat_while(char::is_whitespace);
        if cur.peek() == Some('#') {
            cur.eat_while(|c| c != '\n');
            continue;
        }
        let pos = at(cur.pos());
        let Some(c) = cur.peek() else {
            out.push((Tok::Eof, pos));
            return Ok(out);
        };
        if c.is_alphanumeric() || c == '_' {
            let id = cur.eat_while(|c| c.is_alphanumeric() || c == '_');
            out.push((Tok::Ident(id), pos));
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    Some('"') => break,
                    Some('\\') => {
                        if let Some(e) = cur.bump() {
                            s.push(e)
                        }
                    }
                    Some(ch) => s.push(ch),
                    None => {
                        return Err(PlanError::Parse {
                            pos,
                            expected: vec!["closing `\"`".into()],
                            found: "end of input".into(),
                        })
                    }
                }
            }
            out.push((Tok::Str(s), pos));
        } else if cur.rest().starts_with("=>") {
            cur.bump();
            cur.bump();
            out.push((Tok::Punct("=>"), pos));
        } else {
            let p = match c {
                '(' => "(",
                ')' => ")",
                ';' => ";",
                '|' => "|",
                '*' => "*",
                ',' => ",",
                '.' => ".",
                _ => {
                    return Err(PlanError::Parse {
                        pos,
                        expected: vec!["plan token".into()],
                        found: format!("`{c}`"),
                    })
                }
            };
            cur.bump();
            out.push((Tok::Punct(p), pos));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.idx].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, PlanError> {
        Err(PlanError::Parse {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), PlanError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.error(&[&format!("`{p}`")])
        }
    }

    fn is_rule_head(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_))
            && matches!(self.toks.get(self.idx + 1), Some((Tok::Punct("=>"), _)))
    }

    fn doc(&mut self) -> Result<PlanDoc, PlanError> {
        let mut rules = IndexMap::new();
        while self.is_rule_head() {
            let pos = self.pos();
            let Tok::Ident(name) = self.advance() else {
                unreachable!()
            };
            self.advance();
            let body = self.expr()?;
            self.expect(".")?;
            if rules.insert(name.clone(), body).is_some() {
                return Err(PlanError::Parse {
                    pos,
                    expected: vec!["a new rule name".into()],
                    found: format!("duplicate rule `{name}`"),
                });
            }
        }
        let main = self.expr()?;
        if *self.peek() != Tok::Eof {
            return self.error(&["`;`", "`|`", "end of plan"]);
        }
        Ok(PlanDoc { rules, main })
    }

    fn expr(&mut self) -> Result<Plan, PlanError> {
        let mut left = self.seq()?;
        while self.eat("|") {
            let right = self.seq()?;
            let pos = left.pos;
            left = Plan::new(PlanNode::Choice(Box::new(left), Box::new(right)), pos);
        }
        Ok(left)
    }

    fn seq(&mut self) -> Result<Plan, PlanError> {
        let mut left = self.factor()?;
        while self.eat(";") {
            let right = self.factor()?;
            let pos = left.pos;
            left = Plan::new(PlanNode::Seq(Box::new(left), Box::new(right)), pos);
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<Plan, PlanError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Punct("(") => {
                self.advance();
                let inner = self.expr()?;
                self.expect(")")?;
                if self.eat("*") {
                    Ok(Plan::new(PlanNode::Star(Box::new(inner)), pos))
                } else {
                    Ok(inner)
                }
            }
            Tok::Ident(name) => {
                self.advance();
                if !self.eat("(") {
                    return Ok(Plan::new(PlanNode::RuleRef(name), pos));
                }
                let layer_pos = self.pos();
                let layer = match self.advance() {
                    Tok::Ident(l) => l.parse::<Layer>().map_err(|_| PlanError::Parse {
                        pos: layer_pos,
                        expected: vec!["`Eval`".into(), "`DR`".into(), "`MDR`".into()],
                        found: format!("`{l}`"),
                    })?,
                    other => {
                        return Err(PlanError::Parse {
                            pos: layer_pos,
                            expected: vec!["layer".into()],
                            found: other.describe(),
                        })
                    }
                };
                let subject = if self.eat(",") {
                    match self.advance() {
                        Tok::Str(s) | Tok::Ident(s) => Some(s),
                        _ => {
                            self.idx -= 1;
                            return self.error(&["subject"]);
                        }
                    }
                } else {
                    None
                };
                self.expect(")")?;
                Ok(Plan::new(
                    PlanNode::Atom {
                        verb: name,
                        layer,
                        subject,
                    },
                    pos,
                ))
            }
            _ => self.error(&["verb", "rule name", "`(`"]),
        }
    }
}

/// Parses a standalone plan expression without rule definitions.
pub fn parse_plan(source: &str) -> Result<Plan, PlanError> {
    let doc = parse_plan_doc(source, Pos::new(1, 1))?;
    Ok(doc.main)
}

/// Parses `NAME => expr .` definitions followed by the main plan expression.
/// `origin` is the document position of the first character of `source`.
pub fn parse_plan_doc(source: &str, origin: Pos) -> Result<PlanDoc, PlanError> {
    let toks = lex(source, origin)?;
    let mut p = Parser { toks, idx: 0 };
    let doc = p.doc()?;
    check_rules(&doc)?;
    Ok(doc)
}

fn check_rules(doc: &PlanDoc) -> Result<(), PlanError> {
    fn refs<'a>(p: &'a Plan, out: &mut Vec<(&'a str, Pos)>) {
        match &p.node {
            PlanNode::Atom { .. } => {}
            PlanNode::Seq(a, b) | PlanNode::Choice(a, b) => {
                refs(a, out);
                refs(b, out);
            }
            PlanNode::Star(a) => refs(a, out),
            PlanNode::RuleRef(n) => out.push((n, p.pos)),
        }
    }
    fn visit<'a>(
        name: &'a str,
        doc: &'a PlanDoc,
        stack: &mut Vec<&'a str>,
        done: &mut HashSet<&'a str>,
    ) -> Result<(), PlanError> {
        if done.contains(name) {
            return Ok(());
        }
        let body = &doc.rules[name];
        stack.push(name);
        let mut out = Vec::new();
        refs(body, &mut out);
        for (r, pos) in out {
            if !doc.rules.contains_key(r) {
                return Err(PlanError::UndefinedRule {
                    name: r.to_string(),
                    pos,
                });
            }
            if stack.contains(&r) {
                return Err(PlanError::RecursiveRule {
                    name: r.to_string(),
                    pos,
                });
            }
            visit(r, doc, stack, done)?;
        }
        stack.pop();
        done.insert(name);
        Ok(())
    }

    let mut done = HashSet::new();
    for name in doc.rules.keys() {
        visit(name, doc, &mut Vec::new(), &mut done)?;
    }
    let mut out = Vec::new();
    refs(&doc.main, &mut out);
    for (r, pos) in out {
        if !doc.rules.contains_key(r) {
            return Err(PlanError::UndefinedRule {
                name: r.to_string(),
                pos,
            });
        }
    }
    Ok(())
}
