use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use super::pattern::Pattern;
use super::syntax::parse_pattern;
use super::RewriteError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Expert,
    Buggy,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Expert => "expert",
            RuleKind::Buggy => "buggy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub name: String,
    pub kind: RuleKind,
    pub tags: BTreeSet<String>,
    pub pattern: Pattern,
    pub subtasks: Vec<Pattern>,
    pub rebuild: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RulePack {
    pub rules: Vec<RewriteRule>,
}

static DIFF: OnceLock<RulePack> = OnceLock::new();
static LINEQ: OnceLock<RulePack> = OnceLock::new();

impl RulePack {
    pub fn differentiation() -> &'static RulePack {
        DIFF.get_or_init(|| RulePack::parse(include_str!("../../data/packs/diff.pack")).expect("bundled pack"))
    }

    pub fn linear_equations() -> &'static RulePack {
        LINEQ.get_or_init(|| RulePack::parse(include_str!("../../data/packs/lineq.pack")).expect("bundled pack"))
    }

    pub fn builtin(name: &str) -> Option<&'static RulePack> {
        match name {
            "diff" => Some(RulePack::differentiation()),
            "lineq" => Some(RulePack::linear_equations()),
            _ => None,
        }
    }

    pub fn get(&self, name: &str) -> Option<&RewriteRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn expert(&self) -> impl Iterator<Item = &RewriteRule> {
        self.rules.iter().filter(|r| r.kind == RuleKind::Expert)
    }

    /// One rule per block: `rule <name> expert|buggy [tags(a, b)] : <pattern>
    /// [=> <subtask> ; ...] ~> <rebuild>`. Indented lines continue the
    /// previous rule; `#` starts a comment.
    pub fn parse(text: &str) -> Result<RulePack, RewriteError> {
        let mut blocks: Vec<(usize, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            if line.starts_with(char::is_whitespace) {
                match blocks.last_mut() {
                    Some((_, b)) => {
                        b.push(' ');
                        b.push_str(line.trim());
                    }
                    None => return Err(pack_err(i + 1, "continuation line before any rule")),
                }
            } else {
                blocks.push((i + 1, line.trim().to_string()));
            }
        }
        let mut pack = RulePack::default();
        for (line, block) in blocks {
            let rule = parse_rule(&block).map_err(|m| pack_err(line, m))?;
            if pack.get(&rule.name).is_some() {
                return Err(pack_err(line, format!("duplicate rule `{}`", rule.name)));
            }
            pack.rules.push(rule);
        }
        if pack.rules.is_empty() {
            return Err(pack_err(1, "pack contains no rules"));
        }
        Ok(pack)
    }
}

fn pack_err(line: usize, message: impl Into<String>) -> RewriteError {
    RewriteError::Pack { line, message: message.into() }
}

fn parse_rule(block: &str) -> Result<RewriteRule, String> {
    let rest = block.strip_prefix("rule ").ok_or("expected `rule`")?;
    let (header, body) = rest.split_once(" : ").ok_or("expected ` : ` after the rule header")?;
    let mut words = header.split_whitespace();
    let name = words.next().ok_or("missing rule name")?.to_string();
    let kind = match words.next() {
        Some("expert") => RuleKind::Expert,
        Some("buggy") => RuleKind::Buggy,
        other => return Err(format!("expected `expert` or `buggy`, found {other:?}")),
    };
    let tail: String = words.collect::<Vec<_>>().join(" ");
    let mut tags = BTreeSet::new();
    if !tail.is_empty() {
        let inner = tail
            .strip_prefix("tags(")
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| format!("expected `tags(..)`, found `{tail}`"))?;
        tags.extend(inner.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from));
    }
    let (lhs, rebuild) = body.split_once("~>").ok_or("expected `~>` before the rebuild template")?;
    let (pattern, subtasks) = match lhs.split_once("=>") {
        Some((p, s)) => (p, s.split(';').map(str::trim).filter(|s| !s.is_empty()).collect()),
        None => (lhs, Vec::new()),
    };
    let parse = |src: &str| parse_pattern(src.trim()).map_err(|e| format!("in `{}`: {e}", src.trim()));
    let pattern = parse(pattern)?;
    let subtasks = subtasks.into_iter().map(parse).collect::<Result<Vec<_>, _>>()?;
    let rebuild = parse(rebuild)?;

    if pattern.max_result() > 0 || subtasks.iter().any(|s| s.max_result() > 0) {
        return Err("`$n` may only appear in the rebuild template".into());
    }
    if rebuild.max_result() > subtasks.len() {
        return Err(format!("rebuild refers to ${} but there are {} subtasks", rebuild.max_result(), subtasks.len()));
    }
    let mut bound = Vec::new();
    pattern.vars(&mut bound);
    for t in subtasks.iter().chain([&rebuild]) {
        let mut used = Vec::new();
        t.vars(&mut used);
        if let Some(v) = used.iter().find(|v| !bound.contains(v)) {
            return Err(format!("variable `{v}` does not occur in the pattern"));
        }
    }
    Ok(RewriteRule { name, kind, tags, pattern, subtasks, rebuild })
}
