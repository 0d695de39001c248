//! Lexer, recursive-descent parser and name/type binding pass for minilang.
//!
//! The surface accepts Java-like statements (`int x = ...;`, `for`, `while`,
//! `System.out.print(...)`) and ML-like `val x = e` bindings, where `~` is
//! unary minus and the trailing `;` is optional.

use std::collections::HashMap;

use super::ast::*;
use super::LangError;
use crate::pos::{Cursor, Pos};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => n.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(p) => (*p).to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

const PUNCTS: &[&str] = &[
    "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "++", "--", "(", ")", "{", "}", "[", "]",
    ";", ",", ".", "=", "+", "-", "*", "/", "%", "<", ">", "!", "~",
];

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, LangError> {
    let mut cur = Cursor::new(src);
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') if cur.peek2() == Some('/') => {
                    cur.eat_while(|c| c != '\n');
                }
                Some('/') if cur.peek2() == Some('*') => {
                    let start = cur.pos();
                    cur.bump();
                    cur.bump();
                    loop {
                        match cur.bump() {
                            Some('*') if cur.peek() == Some('/') => {
                                cur.bump();
                                break;
                            }
                            Some(_) => {}
                            None => {
                                return Err(LangError::Parse {
                                    pos: start,
                                    expected: vec!["*/".into()],
                                    found: "end of input".into(),
                                })
                            }
                        }
                    }
                }
                _ => break,
            }
        }
        let pos = cur.pos();
        let Some(c) = cur.peek() else {
            out.push((Tok::Eof, pos));
            return Ok(out);
        };
        if c.is_ascii_digit() {
            let digits = cur.eat_while(|c| c.is_ascii_digit());
            let n = digits.parse::<i64>().map_err(|_| LangError::Parse {
                pos,
                expected: vec!["integer literal within 64-bit range".into()],
                found: digits.clone(),
            })?;
            out.push((Tok::Int(n), pos));
        } else if c.is_alphabetic() || c == '_' {
            let id = cur.eat_while(|c| c.is_alphanumeric() || c == '_');
            out.push((Tok::Ident(id), pos));
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    Some('"') => break,
                    Some('\\') => match cur.bump() {
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some(other) => s.push(other),
                        None => break,
                    },
                    Some(ch) => s.push(ch),
                    None => {
                        return Err(LangError::Parse {
                            pos,
                            expected: vec!["closing \"".into()],
                            found: "end of input".into(),
                        })
                    }
                }
            }
            out.push((Tok::Str(s), pos));
        } else {
            let rest = cur.rest();
            let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
                return Err(LangError::Parse {
                    pos,
                    expected: vec!["token".into()],
                    found: c.to_string(),
                });
            };
            for _ in 0..p.len() {
                cur.bump();
            }
            out.push((Tok::Punct(p), pos));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    idx: usize,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.idx + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.idx].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.idx].0.clone();
        if self.idx < self.toks.len() - 1 {
            self.idx += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(LangError::Parse {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<()> {
        if self.is_punct(p) {
            self.advance();
            Ok(())
        } else {
            self.error(&[p])
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut statements = Vec::new();
        while *self.peek() != Tok::Eof {
            statements.push(self.statement()?);
        }
        Ok(Program { statements })
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Punct("{") => {
                self.advance();
                let mut body = Vec::new();
                while !self.is_punct("}") {
                    if *self.peek() == Tok::Eof {
                        return self.error(&["}"]);
                    }
                    body.push(self.statement()?);
                }
                self.advance();
                StmtKind::Block(body)
            }
            Tok::Punct(";") => {
                self.advance();
                StmtKind::Empty
            }
            Tok::Ident(kw) if kw == "if" => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_branch = Box::new(self.statement()?);
                let else_branch = if self.is_kw("else") {
                    self.advance();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Tok::Ident(kw) if kw == "while" => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = Box::new(self.statement()?);
                StmtKind::While { cond, body }
            }
            Tok::Ident(kw) if kw == "for" => {
                self.advance();
                self.expect_punct("(")?;
                let init = if self.is_punct(";") {
                    None
                } else {
                    Some(Box::new(self.simple_statement()?))
                };
                self.expect_punct(";")?;
                let cond = if self.is_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                let step = if self.is_punct(")") {
                    None
                } else {
                    Some(Box::new(self.simple_statement()?))
                };
                self.expect_punct(")")?;
                let body = Box::new(self.statement()?);
                StmtKind::For {
                    init,
                    cond,
                    step,
                    body,
                }
            }
            Tok::Ident(kw) if kw == "val" => {
                self.advance();
                let name = self.expect_ident()?;
                self.expect_punct("=")?;
                let init = self.expr()?;
                if self.is_punct(";") {
                    self.advance();
                }
                StmtKind::VarDecl { name, init }
            }
            Tok::Ident(kw) if kw == "System" || kw == "print" || kw == "println" => {
                let kind = self.print_statement()?;
                self.expect_punct(";")?;
                kind
            }
            _ => {
                let s = self.simple_statement()?;
                self.expect_punct(";")?;
                return Ok(s);
            }
        };
        Ok(Stmt { kind, pos })
    }

    /// Declarations, assignments and increments: the forms allowed in `for` headers.
    fn simple_statement(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Ident(kw) if kw == "int" => {
                self.advance();
                if self.is_punct("[") {
                    self.advance();
                    self.expect_punct("]")?;
                    let name = self.expect_ident()?;
                    self.expect_punct("=")?;
                    self.expect_punct("{")?;
                    let mut elems = Vec::new();
                    if !self.is_punct("}") {
                        loop {
                            elems.push(self.expr()?);
                            if self.is_punct(",") {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect_punct("}")?;
                    StmtKind::ArrayLiteralDecl { name, elems }
                } else {
                    let name = self.expect_ident()?;
                    self.expect_punct("=")?;
                    let init = self.expr()?;
                    StmtKind::VarDecl { name, init }
                }
            }
            Tok::Punct(p @ ("++" | "--")) => {
                self.advance();
                let target = self.lvalue()?;
                StmtKind::IncDec {
                    increment: p == "++",
                    prefix: true,
                    target,
                }
            }
            Tok::Ident(_) => {
                let target = self.lvalue()?;
                match self.peek().clone() {
                    Tok::Punct(p @ ("=" | "+=" | "-=")) => {
                        self.advance();
                        let value = self.expr()?;
                        let op = match p {
                            "=" => AssignOp::Set,
                            "+=" => AssignOp::Add,
                            _ => AssignOp::Sub,
                        };
                        StmtKind::Assign { op, target, value }
                    }
                    Tok::Punct(p @ ("++" | "--")) => {
                        self.advance();
                        StmtKind::IncDec {
                            increment: p == "++",
                            prefix: false,
                            target,
                        }
                    }
                    _ => return self.error(&["=", "+=", "-=", "++", "--"]),
                }
            }
            _ => return self.error(&["statement"]),
        };
        Ok(Stmt { kind, pos })
    }

    fn print_statement(&mut self) -> PResult<StmtKind> {
        let mut newline = false;
        match self.advance() {
            Tok::Ident(s) if s == "System" => {
                self.expect_punct(".")?;
                match self.advance() {
                    Tok::Ident(s) if s == "out" => {}
                    _ => {
                        self.idx -= 1;
                        return self.error(&["out"]);
                    }
                }
                self.expect_punct(".")?;
                match self.peek().clone() {
                    Tok::Ident(s) if s == "print" => {}
                    Tok::Ident(s) if s == "println" => newline = true,
                    _ => return self.error(&["print", "println"]),
                }
                self.advance();
            }
            Tok::Ident(s) => newline = s == "println",
            _ => unreachable!("print_statement called on non-identifier"),
        }
        self.expect_punct("(")?;
        let mut value = None;
        let mut separator = String::new();
        if let Tok::Str(s) = self.peek().clone() {
            self.advance();
            separator = s;
        } else if !self.is_punct(")") {
            value = Some(self.expr()?);
            if self.is_punct("+") {
                self.advance();
                match self.peek().clone() {
                    Tok::Str(s) => {
                        self.advance();
                        separator = s;
                    }
                    _ => return self.error(&["string literal"]),
                }
            }
        }
        self.expect_punct(")")?;
        if newline {
            separator.push('\n');
        }
        Ok(StmtKind::Print { value, separator })
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let name = self.expect_ident()?;
        if self.is_punct("[") {
            self.advance();
            let idx = self.expr()?;
            self.expect_punct("]")?;
            Ok(LValue::Index(name, idx))
        } else {
            Ok(LValue::Var(name))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
            &[
                ("<=", BinOp::Le),
                (">=", BinOp::Ge),
                ("<", BinOp::Lt),
                (">", BinOp::Gt),
            ],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Rem)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Tok::Punct(p) = self.peek().clone() {
            let Some(&(_, op)) = LEVELS[level].iter().find(|(s, _)| *s == p) else {
                break;
            };
            // `e + "sep"` inside print arguments belongs to the print statement
            if op == BinOp::Add && matches!(self.peek_at(1), Tok::Str(_)) {
                break;
            }
            let pos = self.pos();
            self.advance();
            let rhs = self.binary(level + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let op = match self.peek() {
            Tok::Punct("-") | Tok::Punct("~") => Some(UnaryOp::Neg),
            Tok::Punct("!") => Some(UnaryOp::Not),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(op, Box::new(inner)),
                pos,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.is_punct("[") {
                let pos = self.pos();
                self.advance();
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = Expr {
                    kind: ExprKind::Index(Box::new(e), Box::new(idx)),
                    pos,
                };
            } else if self.is_punct(".") {
                let pos = self.pos();
                self.advance();
                if !self.is_kw("length") {
                    return self.error(&["length"]);
                }
                self.advance();
                e = Expr {
                    kind: ExprKind::Length(Box::new(e)),
                    pos,
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::IntLit(n),
                    pos,
                })
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::IntLit(i64::from(s == "true")),
                    pos,
                })
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Var(s),
                    pos,
                })
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.error(&["expression"]),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "int" | "val" | "if" | "else" | "while" | "for" | "true" | "false"
    )
}

/// Parses and binds a minilang program.
pub fn parse_program(source: &str) -> Result<Program, LangError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, idx: 0 };
    let program = p.program()?;
    Binder::default().program(&program)?;
    Ok(program)
}

/// Scope-checking pass: every reference resolves to a visible declaration and
/// array/scalar usage is consistent.
#[derive(Default)]
struct Binder {
    scopes: Vec<HashMap<String, VarType>>,
}

impl Binder {
    fn lookup(&self, name: &str, pos: Pos) -> Result<VarType, LangError> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .ok_or_else(|| LangError::UnboundName {
                name: name.to_string(),
                pos,
            })
    }

    fn declare(&mut self, name: &str, ty: VarType, pos: Pos) -> Result<(), LangError> {
        if self.scopes.iter().any(|s| s.contains_key(name)) {
            return Err(LangError::Parse {
                pos,
                expected: vec![format!("a name not already declared (`{name}` is in scope)")],
                found: name.to_string(),
            });
        }
        self.scopes
            .last_mut()
            .expect("binder always has a scope")
            .insert(name.to_string(), ty);
        Ok(())
    }

    fn program(&mut self, p: &Program) -> Result<(), LangError> {
        self.scopes.push(HashMap::new());
        for s in &p.statements {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LangError> {
        match &s.kind {
            StmtKind::VarDecl { name, init } => {
                self.int_expr(init)?;
                self.declare(name, VarType::Int, s.pos)
            }
            StmtKind::ArrayLiteralDecl { name, elems } => {
                for e in elems {
                    self.int_expr(e)?;
                }
                self.declare(name, VarType::IntArray, s.pos)
            }
            StmtKind::Assign { target, value, .. } => {
                self.lvalue(target, s.pos)?;
                self.int_expr(value)
            }
            StmtKind::IncDec { target, .. } => self.lvalue(target, s.pos),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.int_expr(cond)?;
                self.scoped(|b| b.stmt(then_branch))?;
                if let Some(e) = else_branch {
                    self.scoped(|b| b.stmt(e))?;
                }
                Ok(())
            }
            StmtKind::While { cond, body } => {
                self.int_expr(cond)?;
                self.scoped(|b| b.stmt(body))
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => self.scoped(|b| {
                if let Some(i) = init {
                    b.stmt(i)?;
                }
                if let Some(c) = cond {
                    b.int_expr(c)?;
                }
                if let Some(st) = step {
                    b.stmt(st)?;
                }
                b.scoped(|b| b.stmt(body))
            }),
            StmtKind::Print { value, .. } => match value {
                Some(v) => self.int_expr(v),
                None => Ok(()),
            },
            StmtKind::Block(stmts) => self.scoped(|b| {
                for st in stmts {
                    b.stmt(st)?;
                }
                Ok(())
            }),
            StmtKind::Empty => Ok(()),
        }
    }

    fn scoped(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<(), LangError>,
    ) -> Result<(), LangError> {
        self.scopes.push(HashMap::new());
        let r = f(self);
        self.scopes.pop();
        r
    }

    fn lvalue(&mut self, lv: &LValue, pos: Pos) -> Result<(), LangError> {
        match lv {
            LValue::Var(name) => self.expect_type(name, VarType::Int, pos),
            LValue::Index(name, idx) => {
                self.expect_type(name, VarType::IntArray, pos)?;
                self.int_expr(idx)
            }
        }
    }

    fn expect_type(&self, name: &str, want: VarType, pos: Pos) -> Result<(), LangError> {
        let ty = self.lookup(name, pos)?;
        if ty != want {
            let expected = match want {
                VarType::Int => "int variable",
                VarType::IntArray => "array variable",
            };
            return Err(LangError::Parse {
                pos,
                expected: vec![expected.into()],
                found: name.to_string(),
            });
        }
        Ok(())
    }

    fn int_expr(&self, e: &Expr) -> Result<(), LangError> {
        match &e.kind {
            ExprKind::IntLit(_) => Ok(()),
            ExprKind::Var(name) => self.expect_type(name, VarType::Int, e.pos),
            ExprKind::Index(arr, idx) => {
                self.array_expr(arr)?;
                self.int_expr(idx)
            }
            ExprKind::Binary(_, l, r) => {
                self.int_expr(l)?;
                self.int_expr(r)
            }
            ExprKind::Unary(_, inner) => self.int_expr(inner),
            ExprKind::Length(arr) => self.array_expr(arr),
        }
    }

    fn array_expr(&self, e: &Expr) -> Result<(), LangError> {
        match &e.kind {
            ExprKind::Var(name) => self.expect_type(name, VarType::IntArray, e.pos),
            _ => Err(LangError::Parse {
                pos: e.pos,
                expected: vec!["array variable".into()],
                found: "expression".into(),
            }),
        }
    }
}
