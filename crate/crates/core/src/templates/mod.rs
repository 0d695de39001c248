//! Parameterised template rules that expand into code fragments, options and
//! whole exercise specs, with behavioural distractors.

mod generate;
mod transforms;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use indexmap::IndexMap;
use thiserror::Error;

use crate::specdsl::SpecError;

pub use generate::instantiate_exercise;
pub use transforms::{transform, DistractorTransform, Role, TRANSFORMS};

pub type Bindings = IndexMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Produces {
    Code,
    Option,
    Spec,
}

impl fmt::Display for Produces {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Produces::Code => "code",
            Produces::Option => "option",
            Produces::Spec => "spec",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Param(String),
    Literal(String),
    Call(String, Vec<Arg>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    Text(String),
    Hole(String),
    Call(String, Vec<Arg>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRule {
    pub name: String,
    pub params: Vec<String>,
    pub produces: Produces,
    pub body: Vec<Piece>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("parameter `{0}` is not bound")]
    UnboundParam(String),
    #[error("unknown template or function `{0}`")]
    UnknownRule(String),
    #[error("template call cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("`{name}` takes {expected} argument(s), found {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("`{name}` cannot transform `{value}`: {reason}")]
    Transform { name: String, value: String, reason: String },
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("generated spec does not parse: {0}")]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemplatePack {
    rules: IndexMap<String, TemplateRule>,
}

static BUILTIN: OnceLock<TemplatePack> = OnceLock::new();

const FUNCTIONS: [&str; 3] = ["cap", "upper", "lower"];

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl TemplatePack {
    pub fn builtin() -> &'static TemplatePack {
        BUILTIN.get_or_init(|| TemplatePack::parse(include_str!("../../data/templates.tpl")).expect("bundled templates"))
    }

    pub fn get(&self, name: &str) -> Option<&TemplateRule> {
        self.rules.get(name)
    }

    pub fn rules(&self) -> impl Iterator<Item = &TemplateRule> {
        self.rules.values()
    }

    /// `#name(p1, p2) [as code|option|spec] =>` followed by body lines up to
    /// `#end`. The body is dedented; `$p` splices a parameter, `$$` is a
    /// dollar sign and `{f(args)}` expands a nested rule or function call.
    /// Lines starting with `//` outside a rule are comments.
    pub fn parse(text: &str) -> Result<TemplatePack, TemplateError> {
        let mut pack = TemplatePack::default();
        let mut lines = text.lines().enumerate();
        while let Some((i, raw)) = lines.next() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let syntax = |message: String| TemplateError::Syntax { line: i + 1, message };
            let header = line.strip_prefix('#').ok_or_else(|| syntax(format!("expected a `#name(..) =>` header, found `{line}`")))?;
            let (sig, after) = header.split_once("=>").ok_or_else(|| syntax("expected `=>` after the rule header".into()))?;
            let (name, params, produces) = parse_signature(sig.trim()).map_err(syntax)?;
            let mut body_lines: Vec<&str> = Vec::new();
            let after = after.trim();
            if let Some(inline) = after.strip_suffix("#end") {
                body_lines.push(inline.trim());
            } else {
                if !after.is_empty() {
                    body_lines.push(after);
                }
                loop {
                    match lines.next() {
                        Some((_, l)) if l.trim() == "#end" => break,
                        Some((_, l)) => body_lines.push(l),
                        None => return Err(syntax(format!("rule `{name}` is missing `#end`"))),
                    }
                }
            }
            let body = parse_body(&dedent(&body_lines)).map_err(syntax)?;
            if pack.rules.contains_key(&name) {
                return Err(syntax(format!("duplicate rule `{name}`")));
            }
            pack.rules.insert(name.clone(), TemplateRule { name, params, produces, body, line: i + 1 });
        }
        pack.check()?;
        Ok(pack)
    }

    fn check(&self) -> Result<(), TemplateError> {
        for rule in self.rules.values() {
            let mut calls = Vec::new();
            for piece in &rule.body {
                match piece {
                    Piece::Hole(p) if !rule.params.contains(p) => return Err(TemplateError::UnboundParam(p.clone())),
                    Piece::Call(name, args) => {
                        calls.push((name, args.len()));
                        collect_calls(args, &mut calls);
                        for p in params_of(args) {
                            if !rule.params.contains(&p) {
                                return Err(TemplateError::UnboundParam(p));
                            }
                        }
                    }
                    _ => {}
                }
            }
            for (name, n) in calls {
                self.check_target(name, n)?;
            }
        }
        for name in self.rules.keys() {
            self.find_cycle(name, &mut Vec::new())?;
        }
        Ok(())
    }

    fn check_target(&self, name: &str, n: usize) -> Result<(), TemplateError> {
        let expected = if let Some(r) = self.rules.get(name) {
            r.params.len()
        } else if FUNCTIONS.contains(&name) || transform(name).is_some() {
            1
        } else {
            return Err(TemplateError::UnknownRule(name.to_string()));
        };
        if expected != n {
            return Err(TemplateError::Arity { name: name.to_string(), expected, found: n });
        }
        Ok(())
    }

    fn find_cycle(&self, name: &str, stack: &mut Vec<String>) -> Result<(), TemplateError> {
        if let Some(i) = stack.iter().position(|s| s == name) {
            let mut cycle = stack[i..].to_vec();
            cycle.push(name.to_string());
            return Err(TemplateError::CycleDetected(cycle));
        }
        let Some(rule) = self.rules.get(name) else { return Ok(()) };
        stack.push(name.to_string());
        let mut calls = Vec::new();
        for piece in &rule.body {
            if let Piece::Call(n, args) = piece {
                calls.push((n, args.len()));
                collect_calls(args, &mut calls);
            }
        }
        let targets: BTreeSet<&String> = calls.into_iter().map(|(n, _)| n).collect();
        for t in targets {
            self.find_cycle(t, stack)?;
        }
        stack.pop();
        Ok(())
    }

    /// Expand a call written as in a template body, e.g.
    /// `genBody(0, "<=", 3, "+=", 2)`.
    pub fn expand_call(&self, call: &str) -> Result<String, TemplateError> {
        let (name, args) = parse_call(call.trim()).map_err(|message| TemplateError::Syntax { line: 1, message })?;
        self.call(&name, &args, &Bindings::new(), &mut Vec::new())
    }

    fn call(&self, name: &str, args: &[Arg], env: &Bindings, stack: &mut Vec<String>) -> Result<String, TemplateError> {
        self.check_target(name, args.len())?;
        let values = args.iter().map(|a| self.arg(a, env, stack)).collect::<Result<Vec<_>, _>>()?;
        if let Some(rule) = self.rules.get(name) {
            let bindings: Bindings = rule.params.iter().cloned().zip(values).collect();
            return self.expand_in(rule, &bindings, stack);
        }
        let v = &values[0];
        match name {
            "cap" => {
                let mut c = v.chars();
                Ok(c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default())
            }
            "upper" => Ok(v.to_uppercase()),
            "lower" => Ok(v.to_lowercase()),
            _ => {
                let t = transform(name).expect("checked above");
                let param = match &args[0] {
                    Arg::Param(p) => Some(p.as_str()),
                    _ => None,
                };
                t.apply(v, param, env, None)
            }
        }
    }

    fn arg(&self, a: &Arg, env: &Bindings, stack: &mut Vec<String>) -> Result<String, TemplateError> {
        match a {
            Arg::Literal(s) => Ok(s.clone()),
            Arg::Param(p) => env.get(p).cloned().ok_or_else(|| TemplateError::UnboundParam(p.clone())),
            Arg::Call(n, args) => self.call(n, args, env, stack),
        }
    }

    fn expand_in(&self, rule: &TemplateRule, bindings: &Bindings, stack: &mut Vec<String>) -> Result<String, TemplateError> {
        if stack.contains(&rule.name) {
            let mut cycle = stack.clone();
            cycle.push(rule.name.clone());
            return Err(TemplateError::CycleDetected(cycle));
        }
        for p in &rule.params {
            if !bindings.contains_key(p) {
                return Err(TemplateError::UnboundParam(p.clone()));
            }
        }
        stack.push(rule.name.clone());
        let mut out = String::new();
        for piece in &rule.body {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Hole(p) => out.push_str(bindings.get(p).ok_or_else(|| TemplateError::UnboundParam(p.clone()))?),
                Piece::Call(n, args) => out.push_str(&self.call(n, args, bindings, stack)?),
            }
        }
        stack.pop();
        Ok(out)
    }

    /// Substitute every hole and expand nested calls depth-first.
    pub fn expand(&self, rule: &TemplateRule, bindings: &Bindings) -> Result<String, TemplateError> {
        self.expand_in(rule, bindings, &mut Vec::new())
    }
}

fn collect_calls<'a>(args: &'a [Arg], out: &mut Vec<(&'a String, usize)>) {
    for a in args {
        if let Arg::Call(n, inner) = a {
            out.push((n, inner.len()));
            collect_calls(inner, out);
        }
    }
}

fn params_of(args: &[Arg]) -> Vec<String> {
    let mut out = Vec::new();
    for a in args {
        match a {
            Arg::Param(p) => out.push(p.clone()),
            Arg::Call(_, inner) => out.extend(params_of(inner)),
            Arg::Literal(_) => {}
        }
    }
    out
}

fn parse_signature(sig: &str) -> Result<(String, Vec<String>, Produces), String> {
    let (head, produces) = match sig.rsplit_once(" as ") {
        Some((h, kind)) => {
            let p = match kind.trim() {
                "code" => Produces::Code,
                "option" => Produces::Option,
                "spec" => Produces::Spec,
                other => return Err(format!("unknown rule kind `{other}`")),
            };
            (h.trim(), p)
        }
        None => (sig, Produces::Code),
    };
    let (name, rest) = head.split_once('(').ok_or("expected `(` after the rule name")?;
    let inner = rest.strip_suffix(')').ok_or("expected `)` closing the parameter list")?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(is_ident) {
        return Err(format!("invalid rule name `{name}`"));
    }
    let mut params = Vec::new();
    for p in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if !p.chars().all(is_ident) {
            return Err(format!("invalid parameter `{p}`"));
        }
        if params.iter().any(|q| q == p) {
            return Err(format!("duplicate parameter `{p}`"));
        }
        params.push(p.to_string());
    }
    Ok((name.to_string(), params, produces))
}

fn dedent(lines: &[&str]) -> String {
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    lines.iter().map(|l| if l.len() >= indent { &l[indent..] } else { l.trim_start() }).collect::<Vec<_>>().join("\n")
}

fn parse_body(body: &str) -> Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(c) = rest.chars().next() {
        if c == '$' {
            if let Some(r) = rest.strip_prefix("$$") {
                text.push('$');
                rest = r;
                continue;
            }
            let name: String = rest[1..].chars().take_while(|c| is_ident(*c)).collect();
            if name.is_empty() {
                return Err("`$` must be followed by a parameter name or another `$`".into());
            }
            flush(&mut text, &mut pieces);
            rest = &rest[1 + name.len()..];
            pieces.push(Piece::Hole(name));
            continue;
        }
        if c == '{' {
            let name: String = rest[1..].chars().take_while(|c| is_ident(*c)).collect();
            if !name.is_empty() && rest[1 + name.len()..].starts_with('(') {
                let close = matching_brace(rest).ok_or_else(|| format!("unclosed call `{{{name}(`"))?;
                let (n, args) = parse_call(&rest[1..close])?;
                flush(&mut text, &mut pieces);
                pieces.push(Piece::Call(n, args));
                rest = &rest[close + 1..];
                continue;
            }
        }
        text.push(c);
        rest = &rest[c.len_utf8()..];
    }
    flush(&mut text, &mut pieces);
    Ok(pieces)
}

fn flush(text: &mut String, pieces: &mut Vec<Piece>) {
    if !text.is_empty() {
        pieces.push(Piece::Text(std::mem::take(text)));
    }
}

fn matching_brace(s: &str) -> Option<usize> {
    let mut depth = 0;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '{' if !in_str => depth += 1,
            '}' if !in_str => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

struct ArgParser<'a> {
    s: &'a str,
    i: usize,
}

impl ArgParser<'_> {
    fn ws(&mut self) {
        while self.s[self.i..].starts_with(char::is_whitespace) {
            self.i += 1;
        }
    }

    fn ident(&mut self) -> String {
        let n: String = self.s[self.i..].chars().take_while(|c| is_ident(*c)).collect();
        self.i += n.len();
        n
    }

    fn eat(&mut self, c: char) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn call(&mut self) -> Result<(String, Vec<Arg>), String> {
        self.ws();
        let name = self.ident();
        if name.is_empty() {
            return Err("expected a rule name".into());
        }
        if !self.eat('(') {
            return Err(format!("expected `(` after `{name}`"));
        }
        let mut args = Vec::new();
        if !self.eat(')') {
            loop {
                args.push(self.arg()?);
                if self.eat(')') {
                    break;
                }
                if !self.eat(',') {
                    return Err(format!("expected `,` or `)` in the call to `{name}`"));
                }
            }
        }
        Ok((name, args))
    }

    fn arg(&mut self) -> Result<Arg, String> {
        self.ws();
        let rest = &self.s[self.i..];
        if let Some(quoted) = rest.strip_prefix('"') {
            let mut out = String::new();
            let mut chars = quoted.char_indices();
            while let Some((j, c)) = chars.next() {
                match c {
                    '"' => {
                        self.i += j + 2;
                        return Ok(Arg::Literal(out));
                    }
                    '\\' => match chars.next() {
                        Some((_, 'n')) => out.push('\n'),
                        Some((_, c)) => out.push(c),
                        None => break,
                    },
                    c => out.push(c),
                }
            }
            return Err("unterminated string literal".into());
        }
        if rest.starts_with(|c: char| c.is_ascii_digit() || c == '-') {
            let n: String = rest.chars().enumerate().take_while(|(k, c)| c.is_ascii_digit() || (*k == 0 && *c == '-')).map(|(_, c)| c).collect();
            self.i += n.len();
            return Ok(Arg::Literal(n));
        }
        let save = self.i;
        let name = self.ident();
        if name.is_empty() {
            return Err(format!("unexpected `{}` in arguments", rest.chars().next().unwrap_or(' ')));
        }
        self.ws();
        if self.s[self.i..].starts_with('(') {
            self.i = save;
            let (n, args) = self.call()?;
            return Ok(Arg::Call(n, args));
        }
        Ok(Arg::Param(name))
    }
}

fn parse_call(s: &str) -> Result<(String, Vec<Arg>), String> {
    let mut p = ArgParser { s, i: 0 };
    let call = p.call()?;
    p.ws();
    if p.i != s.len() {
        return Err(format!("trailing text after call: `{}`", &s[p.i..]));
    }
    Ok(call)
}

/// Split `k=v` pairs as given on a command line.
pub fn parse_bindings<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Bindings, String> {
    let mut out = Bindings::new();
    for p in pairs {
        let (k, v) = p.split_once('=').ok_or_else(|| format!("expected `name=value`, found `{p}`"))?;
        out.insert(k.trim().to_string(), v.to_string());
    }
    Ok(out)
}

