//! Simulated students walking plans: layer preferences steer choices,
//! pattern-dependent slips drop easily overlooked subplans.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bloom::{dynamic_cell, KnowledgeCategory, ProcessCategory};
use crate::plans::{detect_patterns, Layer, PatternId, Plan, PlanDoc, PlanNode, PlanWarning, Typer, VerbMap, Weights};
use crate::pos::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlipKey {
    Pattern(PatternId),
    Generic,
}

impl fmt::Display for SlipKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlipKey::Pattern(p) => write!(f, "{p:?}"),
            SlipKey::Generic => f.write_str("generic"),
        }
    }
}

impl Serialize for SlipKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentProfile {
    pub label: String,
    pub knowledge_level: KnowledgeCategory,
    pub layer_preference: BTreeMap<Layer, f64>,
    pub slip: BTreeMap<SlipKey, f64>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("profile line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("layer preferences sum to {0}, expected 1")]
    PreferenceSum(String),
    #[error("{key} probability {value} is outside [0, 1]")]
    Probability { key: String, value: String },
    #[error("missing `level`")]
    MissingLevel,
}

impl StudentProfile {
    /// Clauses separated by `;` or newlines: `level: <Knowledge>`,
    /// `prefer Eval=.. DR=.. MDR=..`, `slip P3=.. generic=..`, `label: ..`,
    /// `temperature: ..`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<StudentProfile, ProfileError> {
        let mut level = None;
        let mut p = StudentProfile {
            label: String::new(),
            knowledge_level: KnowledgeCategory::Factual,
            layer_preference: Layer::ALL.iter().map(|l| (*l, 0.0)).collect(),
            slip: BTreeMap::new(),
            temperature: 1.0,
        };
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| ProfileError::Syntax { line: i + 1, message };
            let line = raw.split('#').next().unwrap_or("");
            for clause in line.split(';').map(str::trim).filter(|c| !c.is_empty()) {
                let (key, rest) = clause
                    .split_once(|c: char| c == ':' || c.is_whitespace())
                    .ok_or_else(|| err(format!("cannot read `{clause}`")))?;
                let rest = rest.trim();
                match key.trim() {
                    "level" => level = Some(rest.parse::<KnowledgeCategory>().map_err(|e| err(e.to_string()))?),
                    "label" => p.label = rest.to_string(),
                    "temperature" => {
                        p.temperature = number(rest).map_err(err)?;
                        if p.temperature <= 0.0 {
                            return Err(err("temperature must be positive".into()));
                        }
                    }
                    "prefer" => {
                        for (k, v) in pairs(rest).map_err(err)? {
                            let layer = k.parse::<Layer>().map_err(err)?;
                            p.layer_preference.insert(layer, v);
                        }
                    }
                    "slip" => {
                        for (k, v) in pairs(rest).map_err(err)? {
                            let key = match k.to_ascii_lowercase().as_str() {
                                "p1" => SlipKey::Pattern(PatternId::P1),
                                "p2" => SlipKey::Pattern(PatternId::P2),
                                "p3" => SlipKey::Pattern(PatternId::P3),
                                "generic" => SlipKey::Generic,
                                _ => return Err(err(format!("unknown slip key `{k}`"))),
                            };
                            p.slip.insert(key, v);
                        }
                    }
                    other => return Err(err(format!("unknown clause `{other}`"))),
                }
            }
        }
        p.knowledge_level = level.ok_or(ProfileError::MissingLevel)?;
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), ProfileError> {
        let sum: f64 = self.layer_preference.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ProfileError::PreferenceSum(sum.to_string()));
        }
        let probs = self.layer_preference.iter().map(|(k, v)| (k.to_string(), *v)).chain(self.slip.iter().map(|(k, v)| (k.to_string(), *v)));
        for (key, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::Probability { key, value: value.to_string() });
            }
        }
        Ok(())
    }

    /// Slip probability for a site whose surrounding sequence shows `patterns`;
    /// the most specific configured pattern wins, then `generic`.
    pub fn slip_for(&self, patterns: &[PatternId]) -> f64 {
        if patterns.is_empty() {
            return 0.0;
        }
        [PatternId::P3, PatternId::P2, PatternId::P1]
            .iter()
            .filter(|p| patterns.contains(p))
            .find_map(|p| self.slip.get(&SlipKey::Pattern(*p)))
            .or_else(|| self.slip.get(&SlipKey::Generic))
            .copied()
            .unwrap_or(0.0)
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a number"))
}

fn pairs(s: &str) -> Result<Vec<(&str, f64)>, String> {
    s.split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected `key=value`, found `{kv}`"))?;
            Ok((k, number(v)?))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SimOutcome {
    pub trials: u64,
    pub solved: u64,
    /// Keyed by `line:col subplan`.
    pub misses: BTreeMap<String, u64>,
    /// Keyed by the position of the choice; counts for the left and right branch.
    pub branch_counts: BTreeMap<String, [u64; 2]>,
}

impl SimOutcome {
    pub fn misses_at(&self, pos: Pos) -> u64 {
        let prefix = format!("{pos} ");
        self.misses.iter().filter(|(k, _)| k.starts_with(&prefix)).map(|(_, v)| v).sum()
    }

    pub fn branches_at(&self, pos: Pos) -> [u64; 2] {
        self.branch_counts.get(&pos.to_string()).copied().unwrap_or_default()
    }

    fn merge(mut self, other: SimOutcome) -> SimOutcome {
        self.trials += other.trials;
        self.solved += other.solved;
        for (k, v) in other.misses {
            *self.misses.entry(k).or_default() += v;
        }
        for (k, [a, b]) in other.branch_counts {
            let e = self.branch_counts.entry(k).or_default();
            e[0] += a;
            e[1] += b;
        }
        self
    }
}

fn key(p: &Plan) -> usize {
    p as *const Plan as usize
}

fn record_miss(site: &Plan, out: &mut SimOutcome, missed: &mut bool) {
    *out.misses.entry(format!("{} {}", site.pos, site)).or_default() += 1;
    *missed = true;
}

struct Walker<'a> {
    typer: Typer<'a>,
    profile: &'a StudentProfile,
    /// Per sequence node: the subplan that may be dropped and the chance.
    slips: HashMap<usize, (usize, f64)>,
    /// Per choice node: probability of taking the left branch.
    left: HashMap<usize, f64>,
    repeats: usize,
}

impl<'a> Walker<'a> {
    fn new(doc: &'a PlanDoc, map: &'a VerbMap, weights: &'a Weights, profile: &'a StudentProfile) -> Self {
        let typer = Typer::new(doc, map, weights);
        let mut w = Walker {
            typer,
            profile,
            slips: HashMap::new(),
            left: HashMap::new(),
            repeats: (weights.star_factor.round() as usize).max(1),
        };
        let mut nodes = Vec::new();
        w.typer.walk(|p| nodes.push(p));
        for p in nodes {
            match &p.node {
                PlanNode::Seq(a, b) => {
                    if let Some(PlanWarning::MissingPath { smaller, .. }) = w.typer.missing_path_at(p, weights.missing_path_ratio) {
                        let patterns = detect_patterns(&w.typer.signatures(p, weights.path_bound));
                        let chance = profile.slip_for(&patterns);
                        let small: &Plan = if a.pos == smaller && b.pos != smaller { a } else if b.pos == smaller { b } else { a };
                        if chance > 0.0 {
                            w.slips.insert(key(p), (key(small), chance));
                        }
                    }
                }
                PlanNode::Choice(a, b) => {
                    let (ca, cb) = (w.cost(a), w.cost(b));
                    let t = profile.temperature;
                    // softmax over -cost / t
                    let m = ca.min(cb);
                    let (ea, eb) = ((-(ca - m) / t).exp(), (-(cb - m) / t).exp());
                    w.left.insert(key(p), ea / (ea + eb));
                }
                _ => {}
            }
        }
        w
    }

    /// Cheapest-path effort scaled by how far the branch's layers are from
    /// the student's preference.
    fn cost(&self, p: &Plan) -> f64 {
        let mut layers = Vec::new();
        self.atoms(p, &mut layers);
        let affinity = layers.iter().map(|l| self.profile.layer_preference[l]).sum::<f64>() / layers.len().max(1) as f64;
        self.typer.summary(p).effort_min * (1.0 - affinity)
    }

    fn atoms(&self, p: &Plan, out: &mut Vec<Layer>) {
        match &p.node {
            PlanNode::Atom { layer, .. } => out.push(*layer),
            PlanNode::Seq(a, b) | PlanNode::Choice(a, b) => {
                self.atoms(a, out);
                self.atoms(b, out);
            }
            PlanNode::Star(a) => self.atoms(a, out),
            PlanNode::RuleRef(n) => self.atoms(self.typer.rule(n), out),
        }
    }

    fn walk(&self, p: &Plan, rng: &mut ChaCha8Rng, out: &mut SimOutcome, missed: &mut bool) {
        match &p.node {
            PlanNode::Atom { verb, layer, .. } => {
                let cell = self.typer.atom_cell(verb, *layer);
                let seen = dynamic_cell(cell, self.profile.knowledge_level);
                if seen.process == ProcessCategory::Create && cell.process != ProcessCategory::Create {
                    record_miss(p, out, missed);
                }
            }
            PlanNode::Seq(a, b) => {
                let dropped = self.slips.get(&key(p)).and_then(|&(small, chance)| rng.random_bool(chance).then_some(small));
                for part in [a, b] {
                    if dropped == Some(key(part)) {
                        record_miss(part, out, missed);
                    } else {
                        self.walk(part, rng, out, missed);
                    }
                }
            }
            PlanNode::Choice(a, b) => {
                let take_left = rng.random_bool(self.left[&key(p)].clamp(0.0, 1.0));
                let counts = out.branch_counts.entry(p.pos.to_string()).or_default();
                counts[if take_left { 0 } else { 1 }] += 1;
                self.walk(if take_left { a } else { b }, rng, out, missed);
            }
            PlanNode::Star(body) => {
                for _ in 0..self.repeats {
                    self.walk(body, rng, out, missed);
                }
            }
            PlanNode::RuleRef(n) => self.walk(self.typer.rule(n), rng, out, missed),
        }
    }
}

/// Run `trials` independent walks. Trial `i` draws from stream `i` of a
/// ChaCha8 generator seeded with `seed`, so the outcome does not depend on
/// how trials are spread over threads.
pub fn simulate(
    doc: &PlanDoc,
    profile: &StudentProfile,
    map: &VerbMap,
    weights: &Weights,
    seed: u64,
    trials: u64,
) -> SimOutcome {
    let walker = Walker::new(doc, map, weights, profile);
    (0..trials.max(1))
        .into_par_iter()
        .fold(SimOutcome::default, |mut acc, trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let mut missed = false;
            walker.walk(&doc.main, &mut rng, &mut acc, &mut missed);
            acc.trials += 1;
            acc.solved += u64::from(!missed);
            acc
        })
        .reduce(SimOutcome::default, SimOutcome::merge)
}
