use rand::{Rng, RngCore};

use super::{Bindings, TemplateError};
use crate::minilang::{run_source, Status};

/// The loop parameter a transform perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Limit,
    Operator,
    Init,
    Step,
}

/// A named, deterministic mutation of one bound template parameter. Loop
/// context is read from the bindings `init`, `test`, `limit`, `assign` and
/// `step` when present.
pub struct DistractorTransform {
    pub name: &'static str,
    pub role: Role,
    mutate: fn(&str, &Bindings) -> Result<String, String>,
}

pub static TRANSFORMS: [DistractorTransform; 4] = [
    DistractorTransform { name: "buggy_limit", role: Role::Limit, mutate: buggy_limit },
    DistractorTransform { name: "buggy_test", role: Role::Operator, mutate: buggy_test },
    DistractorTransform { name: "buggy_init", role: Role::Init, mutate: |v, _| shift(v, 1) },
    DistractorTransform { name: "buggy_step", role: Role::Step, mutate: |v, _| shift(v, 1) },
];

const OPERATORS: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];

pub fn transform(name: &str) -> Option<&'static DistractorTransform> {
    TRANSFORMS.iter().find(|t| t.name == name)
}

fn int(v: &str) -> Result<i64, String> {
    v.trim().parse().map_err(|_| format!("`{v}` is not an integer"))
}

fn shift(v: &str, by: i64) -> Result<String, String> {
    Ok((int(v)? + by).to_string())
}

pub(crate) fn loop_output(env: &Bindings, limit: i64) -> Option<String> {
    let get = |k: &str| env.get(k).map(|s| s.trim().to_string());
    let code = format!(
        "for(int i={};i{}{};i{}{}) System.out.print(i+\" \");",
        get("init")?,
        get("test")?,
        limit,
        get("assign")?,
        get("step")?
    );
    let effect = run_source(&code, 10_000).ok()?;
    (effect.status == Status::Completed).then_some(effect.stdout)
}

/// `limit - step` when that changes what the loop prints, else `limit + step`.
fn buggy_limit(v: &str, env: &Bindings) -> Result<String, String> {
    let limit = int(v)?;
    let step = env.get("step").map(|s| int(s)).transpose()?.unwrap_or(1).abs().max(1);
    let lower = limit - step;
    match (loop_output(env, limit), loop_output(env, lower)) {
        (Some(a), Some(b)) if a == b => Ok((limit + step).to_string()),
        _ => Ok(lower.to_string()),
    }
}

fn buggy_test(v: &str, _: &Bindings) -> Result<String, String> {
    Ok(match v.trim() {
        "<" => "<=",
        "<=" => "<",
        ">" => ">=",
        ">=" => ">",
        "==" => "!=",
        "!=" => "==",
        other => return Err(format!("`{other}` is not a comparison operator")),
    }
    .to_string())
}

impl DistractorTransform {
    /// The canonical mutation, or with `rng` a random variant of the same
    /// role. The result always differs from `value`.
    pub fn apply(
        &self,
        value: &str,
        param: Option<&str>,
        env: &Bindings,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<String, TemplateError> {
        let fail = |reason: String| TemplateError::Transform { name: self.name.to_string(), value: value.to_string(), reason };
        let mut env = env.clone();
        if let Some(p) = param {
            env.insert(p.to_string(), value.to_string());
        }
        let out = match rng {
            None => (self.mutate)(value, &env).map_err(fail)?,
            Some(rng) => match self.role {
                Role::Operator => {
                    let others: Vec<&str> = OPERATORS.iter().copied().filter(|o| *o != value.trim()).collect();
                    others[rng.random_range(0..others.len())].to_string()
                }
                _ => {
                    let v = int(value).map_err(fail)?;
                    let d = [-3, -2, -1, 1, 2, 3][rng.random_range(0..6)];
                    (v + d).to_string()
                }
            },
        };
        if out.trim() == value.trim() {
            return Err(fail("mutation left the value unchanged".into()));
        }
        Ok(out)
    }
}
