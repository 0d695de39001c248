use serde::Serialize;

use super::*;
use crate::finding::{sort_findings, Finding, Severity};
use crate::minilang::{evaluate, parse_program, Effect};
use crate::plans::{consistency_check, Consistency, VerbMap, Weights};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Confirmed,
    Refuted,
    Unverifiable,
    EvaluationFailed { kind: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptionReport {
    pub key: char,
    pub correct: bool,
    pub distractor_tag: Option<String>,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// The option's own effect in fill-in mode.
    pub effect: Option<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FacetReport {
    pub facet: Facet,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub effect: Option<Effect>,
    pub options: Vec<OptionReport>,
    pub answer: Vec<FacetReport>,
    pub findings: Vec<Finding>,
}

/// Whether a facet holds on a completed effect; `None` for free text.
pub fn facet_holds(facet: &Facet, effect: &Effect) -> Option<bool> {
    match facet {
        Facet::Stdout { text } => Some(effect.stdout == *text),
        Facet::Binding { name, value } => Some(effect.bindings.get(name) == Some(value)),
        Facet::Text { .. } => None,
    }
}

fn failed(effect: &Effect) -> Option<Verdict> {
    (!effect.completed()).then(|| Verdict::EvaluationFailed {
        kind: effect.status.to_string(),
    })
}

fn facet_verdict(facet: &Facet, effect: Option<&Effect>) -> Verdict {
    if let Facet::Text { .. } = facet {
        return Verdict::Unverifiable;
    }
    let Some(effect) = effect else {
        return Verdict::Unverifiable;
    };
    if let Some(v) = failed(effect) {
        return v;
    }
    match facet_holds(facet, effect) {
        Some(true) => Verdict::Confirmed,
        Some(false) => Verdict::Refuted,
        None => Verdict::Unverifiable,
    }
}

/// Conjunction over the checkable facets of `answer`.
fn answer_verdict(answer: &[Facet], effect: &Effect) -> Verdict {
    if let Some(v) = failed(effect) {
        return v;
    }
    let checks: Vec<bool> = answer.iter().filter_map(|f| facet_holds(f, effect)).collect();
    if checks.is_empty() {
        Verdict::Unverifiable
    } else if checks.iter().all(|b| *b) {
        Verdict::Confirmed
    } else {
        Verdict::Refuted
    }
}

fn describe(effect: &Effect) -> String {
    if !effect.completed() {
        return effect.status.to_string();
    }
    let mut parts = vec![format!("stdout {:?}", effect.stdout)];
    for (k, v) in &effect.bindings {
        parts.push(format!("{k} = {v}"));
    }
    parts.join(", ")
}

/// Effect of a fill-in option: its code spliced into the question program.
pub fn fill_effect(spec: &ExerciseSpec, option: &McqOption, fuel: u64) -> Result<Effect, LangError> {
    let src = spec.code_source().replacen(FILL_MARKER, &option.label, 1);
    Ok(evaluate(&parse_program(&src)?, fuel))
}

/// Checks every option and answer facet against evaluation of the question code.
pub fn validate_spec(spec: &ExerciseSpec, fuel: u64) -> ValidationReport {
    let mut findings = Vec::new();
    let effect = match spec.mode {
        AnswerMode::McqFill => None,
        _ => spec.program.as_ref().map(|p| evaluate(p, fuel)),
    };
    if let Some(e) = &effect {
        if !e.completed() && !spec.options.is_empty() {
            findings.push(Finding::new(
                Severity::Error,
                "EvaluationFailed",
                format!("question code does not complete: {}", e.status),
                Some(spec.spans.question),
            ));
        }
    }

    let mut options = Vec::new();
    for o in &spec.options {
        let (verdict, own) = match spec.mode {
            AnswerMode::McqFill => match fill_effect(spec, o, fuel) {
                Ok(e) => (answer_verdict(&spec.answer, &e), Some(e)),
                Err(_) => (
                    Verdict::EvaluationFailed {
                        kind: "ParseError".into(),
                    },
                    None,
                ),
            },
            _ => match &o.expect {
                Some(f) => (facet_verdict(f, effect.as_ref()), None),
                None => (Verdict::Unverifiable, None),
            },
        };
        let observed = own.as_ref().or(effect.as_ref());
        match (&verdict, o.correct) {
            (Verdict::Confirmed, true) | (Verdict::Refuted, false) => {}
            (Verdict::EvaluationFailed { .. }, false) if spec.mode == AnswerMode::McqFill => {}
            (Verdict::Confirmed, false) => findings.push(Finding::new(
                Severity::Error,
                "DegenerateDistractor",
                format!("distractor {} matches the evaluated effect", o.key),
                Some(o.pos),
            )),
            (Verdict::Unverifiable, false) => findings.push(Finding::new(
                Severity::Info,
                "UnverifiableOption",
                format!("option {} declares no checkable effect", o.key),
                Some(o.pos),
            )),
            (Verdict::Unverifiable, true) => findings.push(Finding::new(
                Severity::Error,
                "CorrectOptionUnverifiable",
                format!("option {} is marked correct but declares no checkable effect", o.key),
                Some(o.pos),
            )),
            (v, true) => findings.push(Finding::new(
                Severity::Error,
                "CorrectOptionMismatch",
                format!(
                    "option {} is marked correct but {}",
                    o.key,
                    match (v, observed) {
                        (Verdict::EvaluationFailed { kind }, _) => format!("evaluation failed: {kind}"),
                        (_, Some(e)) => format!("evaluation gives {}", describe(e)),
                        _ => "it does not hold".into(),
                    }
                ),
                Some(o.pos),
            )),
            (Verdict::EvaluationFailed { kind }, false) => findings.push(Finding::new(
                Severity::Error,
                "EvaluationFailed",
                format!("option {}: evaluation failed: {kind}", o.key),
                Some(o.pos),
            )),
        }
        options.push(OptionReport {
            key: o.key,
            correct: o.correct,
            distractor_tag: o.distractor_tag.clone(),
            verdict,
            effect: own,
        });
    }

    let mut answer = Vec::new();
    if spec.mode == AnswerMode::FreeValue {
        for f in &spec.answer {
            let verdict = facet_verdict(f, effect.as_ref());
            match &verdict {
                Verdict::Confirmed => {}
                Verdict::Unverifiable => findings.push(Finding::new(
                    Severity::Info,
                    "UnverifiableAnswer",
                    format!("answer `{f}` cannot be checked by evaluation"),
                    spec.spans.answer,
                )),
                Verdict::Refuted => findings.push(Finding::new(
                    Severity::Error,
                    "AnswerMismatch",
                    format!(
                        "answer `{f}` does not hold; evaluation gives {}",
                        effect.as_ref().map(describe).unwrap_or_default()
                    ),
                    spec.spans.answer,
                )),
                Verdict::EvaluationFailed { kind } => findings.push(Finding::new(
                    Severity::Error,
                    "EvaluationFailed",
                    format!("answer `{f}`: evaluation failed: {kind}"),
                    spec.spans.answer,
                )),
            }
            answer.push(FacetReport {
                facet: f.clone(),
                verdict,
            });
        }
    }
    sort_findings(&mut findings);
    ValidationReport {
        effect,
        options,
        answer,
        findings,
    }
}

/// Everything the authoring check reports for one spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    pub validation: ValidationReport,
    pub consistency: Option<Consistency>,
    pub findings: Vec<Finding>,
}

pub fn check_spec(spec: &ExerciseSpec, map: &VerbMap, weights: &Weights, fuel: u64) -> CheckOutcome {
    let validation = validate_spec(spec, fuel);
    let mut findings = validation.findings.clone();
    if !spec.target_declared {
        findings.push(Finding::new(
            Severity::Warning,
            "DefaultTarget",
            format!("no target declared; assuming {DEFAULT_TARGET}"),
            Some(spec.spans.exercise),
        ));
    }
    let consistency = match consistency_check(spec, map, weights) {
        Ok(c) => Some(c),
        Err(_) => {
            findings.push(Finding::new(
                Severity::Warning,
                "MissingPlan",
                "exercise has no plan; complexity cannot be checked",
                Some(spec.spans.exercise),
            ));
            None
        }
    };
    if let Some(c) = &consistency {
        for d in &c.discrepancies {
            findings.push(Finding::new(
                Severity::Warning,
                "BloomDiscrepancy",
                d.message(),
                spec.spans.plan,
            ));
        }
        for w in &c.report.warnings {
            findings.push(Finding::new(Severity::Warning, w.code(), w.message(), Some(w.pos())));
        }
    }
    sort_findings(&mut findings);
    CheckOutcome {
        id: spec.id.clone(),
        validation,
        consistency,
        findings,
    }
}
