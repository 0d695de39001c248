//! Fuel-bounded, deterministic tree-walking evaluator.

use indexmap::IndexMap;
use serde::{Serialize, Serializer};

use super::ast::*;
use crate::pos::Pos;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    IntArray(Vec<i64>),
    Unit,
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::IntArray(xs) => {
                write!(f, "{{")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
            Value::Unit => write!(f, "()"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => s.serialize_i64(*n),
            Value::IntArray(xs) => xs.serialize(s),
            Value::Unit => s.serialize_unit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuntimeErrorKind {
    IndexOutOfBounds,
    DivisionByZero,
    Overflow,
}

impl std::fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RuntimeErrorKind::IndexOutOfBounds => "IndexOutOfBounds",
            RuntimeErrorKind::DivisionByZero => "DivisionByZero",
            RuntimeErrorKind::Overflow => "Overflow",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Completed,
    FuelExhausted,
    RuntimeError { kind: RuntimeErrorKind, pos: Pos },
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Completed => f.write_str("Completed"),
            Status::FuelExhausted => f.write_str("FuelExhausted"),
            Status::RuntimeError { kind, .. } => write!(f, "RuntimeError({kind})"),
        }
    }
}

impl Serialize for Status {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Observable result of running a program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Effect {
    pub stdout: String,
    pub bindings: IndexMap<String, Value>,
    pub steps: u64,
    pub status: Status,
}

impl Effect {
    pub fn completed(&self) -> bool {
        self.status == Status::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub pos: Pos,
    /// Top-level bindings after the statement took effect (entry state for
    /// compound statements).
    pub env: IndexMap<String, Value>,
    /// Text printed by this statement.
    pub output: String,
}

pub fn evaluate(program: &Program, fuel: u64) -> Effect {
    run(program, fuel, false).0
}

pub fn trace(program: &Program, fuel: u64) -> Vec<TraceStep> {
    run(program, fuel, true).1
}

/// Runs once and returns both views, so callers needing the two do not pay twice.
pub fn evaluate_with_trace(program: &Program, fuel: u64) -> (Effect, Vec<TraceStep>) {
    run(program, fuel, true)
}

fn run(program: &Program, fuel: u64, record: bool) -> (Effect, Vec<TraceStep>) {
    let mut m = Machine {
        scopes: vec![IndexMap::new()],
        stdout: String::new(),
        steps: 0,
        fuel: fuel.max(1),
        record,
        trace: Vec::new(),
    };
    let mut status = Status::Completed;
    for s in &program.statements {
        if let Err(stop) = m.exec(s) {
            status = match stop {
                Stop::Fuel => Status::FuelExhausted,
                Stop::Error(kind, pos) => Status::RuntimeError { kind, pos },
            };
            break;
        }
    }
    let bindings = m.scopes.swap_remove(0);
    (
        Effect {
            stdout: m.stdout,
            bindings,
            steps: m.steps,
            status,
        },
        m.trace,
    )
}

enum Stop {
    Fuel,
    Error(RuntimeErrorKind, Pos),
}

type Exec<T> = Result<T, Stop>;

struct Machine {
    scopes: Vec<IndexMap<String, Value>>,
    stdout: String,
    steps: u64,
    fuel: u64,
    record: bool,
    trace: Vec<TraceStep>,
}

impl Machine {
    fn tick(&mut self) -> Exec<()> {
        if self.steps >= self.fuel {
            return Err(Stop::Fuel);
        }
        self.steps += 1;
        Ok(())
    }

    fn snapshot(&mut self, pos: Pos, output: String) {
        if self.record {
            self.trace.push(TraceStep {
                pos,
                env: self.scopes[0].clone(),
                output,
            });
        }
    }

    fn slot(&mut self, name: &str) -> &mut Value {
        self.scopes
            .iter_mut()
            .rev()
            .find_map(|s| s.get_mut(name))
            .expect("binder guarantees names resolve")
    }

    fn read(&self, name: &str) -> &Value {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .expect("binder guarantees names resolve")
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> Exec<T>) -> Exec<T> {
        self.scopes.push(IndexMap::new());
        let r = f(self);
        self.scopes.pop();
        r
    }

    fn exec(&mut self, s: &Stmt) -> Exec<()> {
        self.tick()?;
        match &s.kind {
            StmtKind::VarDecl { .. }
            | StmtKind::ArrayLiteralDecl { .. }
            | StmtKind::Assign { .. }
            | StmtKind::IncDec { .. }
            | StmtKind::Print { .. }
            | StmtKind::Empty => {
                // snapshot even on failure so the trace stays one entry per step
                let r = self.simple(s);
                let out = r.as_ref().map(|o| o.clone()).unwrap_or_default();
                self.snapshot(s.pos, out);
                r.map(|_| ())?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.snapshot(s.pos, String::new());
                if self.eval_int(cond)? != 0 {
                    self.scoped(|m| m.exec(then_branch))?;
                } else if let Some(e) = else_branch {
                    self.scoped(|m| m.exec(e))?;
                }
            }
            StmtKind::While { cond, body } => {
                self.snapshot(s.pos, String::new());
                while self.eval_int(cond)? != 0 {
                    self.scoped(|m| m.exec(body))?;
                }
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.snapshot(s.pos, String::new());
                self.scoped(|m| {
                    if let Some(i) = init {
                        m.exec(i)?;
                    }
                    loop {
                        if let Some(c) = cond {
                            if m.eval_int(c)? == 0 {
                                break;
                            }
                        }
                        m.scoped(|m| m.exec(body))?;
                        if let Some(st) = step {
                            m.exec(st)?;
                        }
                    }
                    Ok(())
                })?;
            }
            StmtKind::Block(stmts) => {
                self.snapshot(s.pos, String::new());
                self.scoped(|m| {
                    for st in stmts {
                        m.exec(st)?;
                    }
                    Ok(())
                })?;
            }
        }
        Ok(())
    }

    fn simple(&mut self, s: &Stmt) -> Exec<String> {
        match &s.kind {
            StmtKind::VarDecl { name, init } => {
                let v = self.eval_int(init)?;
                self.declare(name, Value::Int(v));
            }
            StmtKind::ArrayLiteralDecl { name, elems } => {
                let mut xs = Vec::with_capacity(elems.len());
                for e in elems {
                    xs.push(self.eval_int(e)?);
                }
                self.declare(name, Value::IntArray(xs));
            }
            StmtKind::Assign { op, target, value } => {
                let rhs = self.eval_int(value)?;
                self.update(target, s.pos, |old| match op {
                    AssignOp::Set => Some(rhs),
                    AssignOp::Add => old.checked_add(rhs),
                    AssignOp::Sub => old.checked_sub(rhs),
                })?;
            }
            StmtKind::IncDec {
                increment, target, ..
            } => {
                let inc = *increment;
                self.update(target, s.pos, |old| {
                    if inc {
                        old.checked_add(1)
                    } else {
                        old.checked_sub(1)
                    }
                })?;
            }
            StmtKind::Print { value, separator } => {
                let mut out = match value {
                    Some(v) => self.eval_int(v)?.to_string(),
                    None => String::new(),
                };
                out.push_str(separator);
                self.stdout.push_str(&out);
                return Ok(out);
            }
            _ => {}
        }
        Ok(String::new())
    }

    fn declare(&mut self, name: &str, v: Value) {
        self.scopes
            .last_mut()
            .expect("machine always has a scope")
            .insert(name.to_string(), v);
    }

    fn update(
        &mut self,
        target: &LValue,
        pos: Pos,
        f: impl FnOnce(i64) -> Option<i64>,
    ) -> Exec<()> {
        match target {
            LValue::Var(name) => {
                let slot = self.slot(name);
                let Value::Int(old) = *slot else {
                    unreachable!("binder rejects non-int scalar targets")
                };
                let new = f(old).ok_or(Stop::Error(RuntimeErrorKind::Overflow, pos))?;
                *slot = Value::Int(new);
            }
            LValue::Index(name, idx) => {
                let i = self.eval_int(idx)?;
                let slot = self.slot(name);
                let Value::IntArray(xs) = slot else {
                    unreachable!("binder rejects indexing non-arrays")
                };
                let cell = usize::try_from(i)
                    .ok()
                    .and_then(|i| xs.get_mut(i))
                    .ok_or(Stop::Error(RuntimeErrorKind::IndexOutOfBounds, pos))?;
                *cell = f(*cell).ok_or(Stop::Error(RuntimeErrorKind::Overflow, pos))?;
            }
        }
        Ok(())
    }

    fn array<'a>(&'a self, e: &Expr) -> &'a [i64] {
        let ExprKind::Var(name) = &e.kind else {
            unreachable!("binder only admits array variables here")
        };
        match self.read(name) {
            Value::IntArray(xs) => xs,
            _ => unreachable!("binder checked array type"),
        }
    }

    fn eval_int(&self, e: &Expr) -> Exec<i64> {
        let err = |k| Stop::Error(k, e.pos);
        Ok(match &e.kind {
            ExprKind::IntLit(n) => *n,
            ExprKind::Var(name) => match self.read(name) {
                Value::Int(n) => *n,
                _ => unreachable!("binder checked scalar type"),
            },
            ExprKind::Index(arr, idx) => {
                let i = self.eval_int(idx)?;
                let xs = self.array(arr);
                usize::try_from(i)
                    .ok()
                    .and_then(|i| xs.get(i))
                    .copied()
                    .ok_or(err(RuntimeErrorKind::IndexOutOfBounds))?
            }
            ExprKind::Length(arr) => self.array(arr).len() as i64,
            ExprKind::Unary(UnaryOp::Neg, inner) => self
                .eval_int(inner)?
                .checked_neg()
                .ok_or(err(RuntimeErrorKind::Overflow))?,
            ExprKind::Unary(UnaryOp::Not, inner) => i64::from(self.eval_int(inner)? == 0),
            ExprKind::Binary(BinOp::And, l, r) => {
                i64::from(self.eval_int(l)? != 0 && self.eval_int(r)? != 0)
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                i64::from(self.eval_int(l)? != 0 || self.eval_int(r)? != 0)
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval_int(l)?;
                let b = self.eval_int(r)?;
                let overflow = || err(RuntimeErrorKind::Overflow);
                match op {
                    BinOp::Add => a.checked_add(b).ok_or_else(overflow)?,
                    BinOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
                    BinOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
                    BinOp::Div | BinOp::Rem if b == 0 => {
                        return Err(err(RuntimeErrorKind::DivisionByZero))
                    }
                    BinOp::Div => a.checked_div(b).ok_or_else(overflow)?,
                    BinOp::Rem => a.checked_rem(b).ok_or_else(overflow)?,
                    BinOp::Lt => i64::from(a < b),
                    BinOp::Le => i64::from(a <= b),
                    BinOp::Gt => i64::from(a > b),
                    BinOp::Ge => i64::from(a >= b),
                    BinOp::Eq => i64::from(a == b),
                    BinOp::Ne => i64::from(a != b),
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        })
    }
}
