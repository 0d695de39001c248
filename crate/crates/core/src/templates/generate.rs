use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{transform, Bindings, Produces, TemplateError, TemplatePack, TemplateRule};
use crate::minilang::{evaluate, Effect, Status, Value};
use crate::specdsl::{parse_spec, quote, ExerciseSpec};

const ATTEMPTS: u32 = 8;

enum Correct {
    Stdout,
    Binding(String),
}

struct Directives {
    correct: Option<Correct>,
    distractors: Vec<(String, String)>,
}

fn directives(text: &str) -> Result<(String, Directives), TemplateError> {
    let mut d = Directives { correct: None, distractors: Vec::new() };
    let mut kept = Vec::new();
    let mut slot = None;
    let bad = |l: &str| TemplateError::GenerationFailed(format!("malformed directive `{l}`"));
    for line in text.lines() {
        let t = line.trim();
        let Some(rest) = t.strip_prefix('@') else {
            kept.push(line.to_string());
            continue;
        };
        if slot.is_none() {
            let indent = &line[..line.len() - line.trim_start().len()];
            slot = Some(kept.len());
            kept.push(format!("{indent}\u{0}"));
        }
        let mut words = rest.split_whitespace();
        match words.next() {
            Some("correct") => {
                d.correct = Some(match (words.next(), words.next()) {
                    (Some("stdout"), None) => Correct::Stdout,
                    (Some("binding"), Some(name)) => Correct::Binding(name.to_string()),
                    _ => return Err(bad(t)),
                })
            }
            Some("distractor") => {
                let call: String = words.collect::<Vec<_>>().join("");
                let (name, arg) = call.strip_suffix(')').and_then(|c| c.split_once('(')).ok_or_else(|| bad(t))?;
                if transform(name).is_none() {
                    return Err(TemplateError::UnknownRule(name.to_string()));
                }
                d.distractors.push((name.to_string(), arg.trim().to_string()));
            }
            _ => return Err(bad(t)),
        }
    }
    if slot.is_some() && d.correct.is_none() {
        return Err(TemplateError::GenerationFailed("distractors need an `@correct` directive".into()));
    }
    Ok((kept.join("\n"), d))
}

/// Effect of the question code of a spec skeleton whose options are still
/// to be generated.
fn question_effect(skeleton: &str, fuel: u64) -> Result<Effect, TemplateError> {
    let probe = skeleton.replace('\u{0}', "z: \"probe\" *");
    let spec = parse_spec(&probe)?;
    let program = spec
        .program
        .ok_or_else(|| TemplateError::GenerationFailed("the question carries no evaluable code".into()))?;
    Ok(evaluate(&program, fuel))
}

fn option_of(effect: &Effect, correct: &Correct) -> Option<(String, String)> {
    if effect.status != Status::Completed {
        return None;
    }
    match correct {
        Correct::Stdout => {
            let label = match effect.stdout.trim() {
                "" => "(no output)".to_string(),
                t => t.to_string(),
            };
            Some((label, format!("stdout {}", quote(&effect.stdout))))
        }
        Correct::Binding(name) => {
            let v: &Value = effect.bindings.get(name)?;
            Some((v.to_string(), format!("{name} = {v}")))
        }
    }
}

/// Expand a spec-producing rule into a checked exercise. The correct option
/// comes from evaluating the generated code; each `@distractor T(param)`
/// re-expands the rule with `param` mutated by transform `T` and keeps the
/// resulting effect when it differs from every option so far. A colliding
/// distractor is retried with seeded variants of the mutation and dropped
/// when every attempt collides.
pub fn instantiate_exercise(
    pack: &TemplatePack,
    metaplan: &TemplateRule,
    bindings: &Bindings,
    seed: u64,
    fuel: u64,
) -> Result<ExerciseSpec, TemplateError> {
    if metaplan.produces != Produces::Spec {
        return Err(TemplateError::GenerationFailed(format!("`{}` produces {}, not a spec", metaplan.name, metaplan.produces)));
    }
    let text = pack.expand(metaplan, bindings)?;
    let (skeleton, d) = directives(&text)?;

    let mut lines: Vec<String> = Vec::new();
    if let Some(correct) = &d.correct {
        let effect = question_effect(&skeleton, fuel)?;
        let (label, facet) = option_of(&effect, correct)
            .ok_or_else(|| TemplateError::GenerationFailed(format!("the generated code ends with {}", effect.status)))?;
        let mut options: Vec<(String, String, Option<String>)> = vec![(label, facet, None)];
        for (i, (name, param)) in d.distractors.iter().enumerate() {
            let t = transform(name).expect("checked while reading directives");
            let original = bindings.get(param).ok_or_else(|| TemplateError::UnboundParam(param.clone()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut accepted = None;
            for attempt in 0..ATTEMPTS {
                let variant = if attempt == 0 {
                    t.apply(original, Some(param), bindings, None)
                } else {
                    t.apply(original, Some(param), bindings, Some(&mut rng))
                };
                let Ok(mutated) = variant else { continue };
                let mut b = bindings.clone();
                b.insert(param.clone(), mutated);
                let Ok(skel) = pack.expand(metaplan, &b).and_then(|t| directives(&t).map(|(s, _)| s)) else { continue };
                let Ok(effect) = question_effect(&skel, fuel) else { continue };
                let Some((label, facet)) = option_of(&effect, correct) else { continue };
                if options.iter().all(|(l, f, _)| *l != label && *f != facet) {
                    accepted = Some((label, facet, Some(name.clone())));
                    break;
                }
            }
            options.extend(accepted);
        }
        if !d.distractors.is_empty() && options.len() == 1 {
            return Err(TemplateError::GenerationFailed(format!(
                "every distractor collided with an existing option after {ATTEMPTS} attempts"
            )));
        }
        let mut order: Vec<usize> = (0..options.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        for (k, &i) in order.iter().enumerate() {
            let (label, facet, tag) = &options[i];
            let key = (b'a' + k as u8) as char;
            let mut line = format!("{key}: {} expect {facet}", quote(label));
            if let Some(tag) = tag {
                line += &format!(" tag {tag}");
            }
            if i == 0 {
                line += " *";
            }
            lines.push(line);
        }
    }

    let mut out = String::new();
    let mut provenance_done = false;
    for line in skeleton.lines() {
        if let Some(indent) = line.strip_suffix('\u{0}') {
            for l in &lines {
                out += &format!("{indent}{l}\n");
            }
            continue;
        }
        out += line;
        out.push('\n');
        if !provenance_done && line.trim_start().starts_with("exercise ") {
            let mut p = format!("  provenance: {} seed {seed}", metaplan.name);
            for (k, v) in bindings {
                p += &format!(" {k}={}", quote(v));
            }
            out += &p;
            out.push('\n');
            provenance_done = true;
        }
    }
    Ok(parse_spec(&out)?)
}
