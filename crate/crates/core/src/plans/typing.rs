use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use serde::Serialize;

use super::{Layer, Plan, PlanDoc, PlanError, PlanNode};
use crate::bloom::{BloomCell, KnowledgeCategory, ProcessCategory};
use crate::pos::Pos;

/// Cells for `(verb, layer)` atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerbMap {
    cells: BTreeMap<(String, Layer), BloomCell>,
}

static BUILTIN_VERBS: OnceLock<VerbMap> = OnceLock::new();

impl VerbMap {
    pub fn builtin() -> &'static VerbMap {
        BUILTIN_VERBS.get_or_init(|| {
            VerbMap::parse(include_str!("../../data/verbs.txt")).expect("shipped verb map parses")
        })
    }

    /// Lines of the form `verb <lemma>@<Layer> -> (<Process>, <Knowledge>)`.
    pub fn parse(text: &str) -> Result<VerbMap, PlanError> {
        let mut map = VerbMap::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| PlanError::Config {
                line: i + 1,
                message: message.to_string(),
            };
            let rest = line
                .strip_prefix("verb")
                .ok_or_else(|| err("expected `verb`"))?;
            let (lhs, rhs) = rest.split_once("->").ok_or_else(|| err("expected `->`"))?;
            let (lemma, layer) = lhs
                .trim()
                .split_once('@')
                .ok_or_else(|| err("expected `<lemma>@<Layer>`"))?;
            let layer: Layer = layer.trim().parse().map_err(|e: String| err(&e))?;
            let inner = rhs
                .trim()
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| err("expected `(<Process>, <Knowledge>)`"))?;
            let (p, k) = inner
                .split_once(',')
                .ok_or_else(|| err("expected `(<Process>, <Knowledge>)`"))?;
            let p: ProcessCategory = p.parse().map_err(|e: crate::bloom::UnknownCategory| err(&e.to_string()))?;
            let k: KnowledgeCategory = k.parse().map_err(|e: crate::bloom::UnknownCategory| err(&e.to_string()))?;
            map.insert(lemma.trim(), layer, BloomCell::new(p, k));
        }
        Ok(map)
    }

    pub fn insert(&mut self, verb: &str, layer: Layer, cell: BloomCell) {
        self.cells.insert((verb.to_lowercase(), layer), cell);
    }

    pub fn get(&self, verb: &str, layer: Layer) -> Option<BloomCell> {
        self.cells.get(&(verb.to_lowercase(), layer)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Layer, BloomCell)> {
        self.cells.iter().map(|((v, l), c)| (v.as_str(), *l, *c))
    }
}

/// Fallback cell for verbs missing from the map.
pub fn default_cell(layer: Layer) -> BloomCell {
    match layer {
        Layer::Eval => BloomCell::new(ProcessCategory::Apply, KnowledgeCategory::Procedural),
        _ => BloomCell::new(ProcessCategory::Understand, KnowledgeCategory::Conceptual),
    }
}

pub fn atom_score(cell: BloomCell) -> f64 {
    1.0 + f64::from(cell.process.rank()) + f64::from(cell.knowledge.rank())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub star_factor: f64,
    pub missing_path_ratio: f64,
    pub path_bound: usize,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            star_factor: 2.0,
            missing_path_ratio: 4.0,
            path_bound: 64,
        }
    }
}

impl Weights {
    pub fn builtin() -> Weights {
        Weights::parse(include_str!("../../data/weights.txt")).expect("shipped weights parse")
    }

    /// `key = value` lines; unknown keys are rejected, missing keys keep defaults.
    pub fn parse(text: &str) -> Result<Weights, PlanError> {
        let mut w = Weights::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| PlanError::Config {
                line: i + 1,
                message,
            };
            let (k, v) = line
                .split_once(['=', ':'])
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let v = v.trim();
            let num = || v.parse::<f64>().map_err(|_| err(format!("bad number `{v}`")));
            match k.trim() {
                "star_factor" => w.star_factor = num()?,
                "missing_path_ratio" => w.missing_path_ratio = num()?,
                "path_bound" => {
                    w.path_bound = v.parse().map_err(|_| err(format!("bad count `{v}`")))?
                }
                other => return Err(err(format!("unknown weight `{other}`"))),
            }
        }
        if w.star_factor <= 0.0 || w.missing_path_ratio <= 0.0 || w.path_bound == 0 {
            return Err(PlanError::Config {
                line: 0,
                message: "weights must be positive".into(),
            });
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PatternId {
    P1,
    P2,
    P3,
}

impl PatternId {
    pub fn shape(self) -> [Layer; 3] {
        match self {
            PatternId::P1 => [Layer::DR, Layer::Eval, Layer::DR],
            PatternId::P2 => [Layer::DR, Layer::MDR, Layer::DR],
            PatternId::P3 => [Layer::MDR, Layer::DR, Layer::Eval],
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            PatternId::P1 => "oscillation",
            PatternId::P2 => "abstraction",
            PatternId::P3 => "inflection",
        }
    }
}

/// Patterns occurring as contiguous fragments of any signature, after runs of
/// the same layer are collapsed.
pub fn detect_patterns(signatures: &[Vec<Layer>]) -> Vec<PatternId> {
    let mut found = Vec::new();
    for sig in signatures {
        let mut s = sig.clone();
        s.dedup();
        for p in [PatternId::P1, PatternId::P2, PatternId::P3] {
            if !found.contains(&p) && s.windows(3).any(|w| w == p.shape()) {
                found.push(p);
            }
        }
    }
    found.sort();
    found
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum PlanWarning {
    MissingPath {
        /// Position of the sequence node.
        pos: Pos,
        smaller: Pos,
        larger: Pos,
        smaller_plan: String,
        smaller_effort: f64,
        larger_effort: f64,
        ratio: f64,
    },
    UnmappedVerb {
        pos: Pos,
        verb: String,
        layer: Layer,
    },
    PathExplosion {
        pos: Pos,
        bound: usize,
        paths: u64,
    },
}

impl PlanWarning {
    pub fn pos(&self) -> Pos {
        match self {
            PlanWarning::MissingPath { pos, .. }
            | PlanWarning::UnmappedVerb { pos, .. }
            | PlanWarning::PathExplosion { pos, .. } => *pos,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            PlanWarning::MissingPath { .. } => "MissingPath",
            PlanWarning::UnmappedVerb { .. } => "UnmappedVerb",
            PlanWarning::PathExplosion { .. } => "PathExplosion",
        }
    }

    pub fn message(&self) -> String {
        match self {
            PlanWarning::MissingPath {
                smaller_plan,
                smaller_effort,
                larger_effort,
                ratio,
                ..
            } => format!(
                "`{smaller_plan}` (effort {smaller_effort}) is dwarfed by its sibling \
                 (effort {larger_effort}, ratio {ratio:.2}) and may be skipped"
            ),
            PlanWarning::UnmappedVerb { verb, layer, .. } => {
                format!("verb `{verb}` has no cell at layer {layer}; using the layer default")
            }
            PlanWarning::PathExplosion { bound, paths, .. } => {
                format!("plan has {paths} paths, more than the bound {bound}; signatures truncated")
            }
        }
    }
}

/// Effort and cell bounds of a subplan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub effort_min: f64,
    pub effort_max: f64,
    /// Join of the cells on the cheapest path.
    pub cell_min: BloomCell,
    /// Join of the cells over every path.
    pub cell_max: BloomCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub cell_min_path: BloomCell,
    pub cell_max_path: BloomCell,
    pub effort_min: f64,
    pub effort_max: f64,
    pub path_count: u64,
    pub signature: Vec<Vec<Layer>>,
    pub truncated: bool,
    pub patterns: Vec<PatternId>,
    pub warnings: Vec<PlanWarning>,
}

/// Typing context: a plan document, its verb cells and the scoring weights.
pub struct Typer<'a> {
    pub doc: &'a PlanDoc,
    pub map: &'a VerbMap,
    pub weights: &'a Weights,
}

impl<'a> Typer<'a> {
    pub fn new(doc: &'a PlanDoc, map: &'a VerbMap, weights: &'a Weights) -> Self {
        Typer { doc, map, weights }
    }

    pub fn rule(&self, name: &str) -> &'a Plan {
        &self.doc.rules[name]
    }

    pub fn atom_cell(&self, verb: &str, layer: Layer) -> BloomCell {
        self.map.get(verb, layer).unwrap_or_else(|| default_cell(layer))
    }

    pub fn summary(&self, p: &Plan) -> Summary {
        match &p.node {
            PlanNode::Atom { verb, layer, .. } => {
                let c = self.atom_cell(verb, *layer);
                let e = atom_score(c);
                Summary {
                    effort_min: e,
                    effort_max: e,
                    cell_min: c,
                    cell_max: c,
                }
            }
            PlanNode::Seq(a, b) => {
                let (a, b) = (self.summary(a), self.summary(b));
                Summary {
                    effort_min: a.effort_min + b.effort_min,
                    effort_max: a.effort_max + b.effort_max,
                    cell_min: a.cell_min.join(b.cell_min),
                    cell_max: a.cell_max.join(b.cell_max),
                }
            }
            PlanNode::Choice(a, b) => {
                let (a, b) = (self.summary(a), self.summary(b));
                let cheap = if b.effort_min < a.effort_min { b } else { a };
                Summary {
                    effort_min: cheap.effort_min,
                    effort_max: a.effort_max.max(b.effort_max),
                    cell_min: cheap.cell_min,
                    cell_max: a.cell_max.join(b.cell_max),
                }
            }
            PlanNode::Star(body) => {
                let s = self.summary(body);
                let k = self.weights.star_factor;
                Summary {
                    effort_min: s.effort_min * k,
                    effort_max: s.effort_max * k,
                    ..s
                }
            }
            PlanNode::RuleRef(name) => self.summary(self.rule(name)),
        }
    }

    /// Number of paths, with a star unrolled once; saturates instead of overflowing.
    pub fn path_count(&self, p: &Plan) -> u64 {
        match &p.node {
            PlanNode::Atom { .. } => 1,
            PlanNode::Seq(a, b) => self.path_count(a).saturating_mul(self.path_count(b)),
            PlanNode::Choice(a, b) => self.path_count(a).saturating_add(self.path_count(b)),
            PlanNode::Star(body) => self.path_count(body),
            PlanNode::RuleRef(name) => self.path_count(self.rule(name)),
        }
    }

    /// Layer sequences of at most `cap` paths.
    pub fn signatures(&self, p: &Plan, cap: usize) -> Vec<Vec<Layer>> {
        match &p.node {
            PlanNode::Atom { layer, .. } => vec![vec![*layer]],
            PlanNode::Seq(a, b) => {
                let (xs, ys) = (self.signatures(a, cap), self.signatures(b, cap));
                let mut out = Vec::new();
                'outer: for x in &xs {
                    for y in &ys {
                        if out.len() >= cap {
                            break 'outer;
                        }
                        out.push(x.iter().chain(y).copied().collect());
                    }
                }
                out
            }
            PlanNode::Choice(a, b) => {
                let mut out = self.signatures(a, cap);
                out.extend(self.signatures(b, cap));
                out.truncate(cap);
                out
            }
            PlanNode::Star(body) => self.signatures(body, cap),
            PlanNode::RuleRef(name) => self.signatures(self.rule(name), cap),
        }
    }

    /// Visits every node reachable from the main plan, entering each rule body once.
    pub fn walk(&self, mut f: impl FnMut(&'a Plan)) {
        fn go<'a>(t: &Typer<'a>, p: &'a Plan, seen: &mut HashSet<&'a str>, f: &mut dyn FnMut(&'a Plan)) {
            f(p);
            match &p.node {
                PlanNode::Atom { .. } => {}
                PlanNode::Seq(a, b) | PlanNode::Choice(a, b) => {
                    go(t, a, seen, f);
                    go(t, b, seen, f);
                }
                PlanNode::Star(a) => go(t, a, seen, f),
                PlanNode::RuleRef(name) => {
                    if seen.insert(name) {
                        go(t, t.rule(name), seen, f);
                    }
                }
            }
        }
        go(self, &self.doc.main, &mut HashSet::new(), &mut f);
    }

    /// MissingPath check for one sequence node, comparing canonical (cheapest
    /// path) efforts.
    pub fn missing_path_at(&self, p: &Plan, ratio_threshold: f64) -> Option<PlanWarning> {
        let PlanNode::Seq(a, b) = &p.node else {
            return None;
        };
        let (ea, eb) = (self.summary(a).effort_min, self.summary(b).effort_min);
        let (small, large, es, el) = if eb <= ea { (b, a, eb, ea) } else { (a, b, ea, eb) };
        if es <= 0.0 || el < ratio_threshold * es {
            return None;
        }
        Some(PlanWarning::MissingPath {
            pos: p.pos,
            smaller: small.pos,
            larger: large.pos,
            smaller_plan: small.to_string(),
            smaller_effort: es,
            larger_effort: el,
            ratio: el / es,
        })
    }

    fn unmapped(&self) -> Vec<PlanWarning> {
        let mut out = Vec::new();
        self.walk(|p| {
            if let PlanNode::Atom { verb, layer, .. } = &p.node {
                if self.map.get(verb, *layer).is_none() {
                    out.push(PlanWarning::UnmappedVerb {
                        pos: p.pos,
                        verb: verb.clone(),
                        layer: *layer,
                    });
                }
            }
        });
        out
    }
}

pub fn missing_path_lint(
    doc: &PlanDoc,
    map: &VerbMap,
    weights: &Weights,
    ratio_threshold: f64,
) -> Vec<PlanWarning> {
    let t = Typer::new(doc, map, weights);
    let mut out = Vec::new();
    t.walk(|p| out.extend(t.missing_path_at(p, ratio_threshold)));
    out
}

pub fn type_plan(doc: &PlanDoc, map: &VerbMap, weights: &Weights) -> ComplexityReport {
    let t = Typer::new(doc, map, weights);
    let s = t.summary(&doc.main);
    let path_count = t.path_count(&doc.main);
    let truncated = path_count > weights.path_bound as u64;
    let signature = t.signatures(&doc.main, weights.path_bound);
    let patterns = detect_patterns(&signature);
    let mut warnings = t.unmapped();
    if truncated {
        warnings.push(PlanWarning::PathExplosion {
            pos: doc.main.pos,
            bound: weights.path_bound,
            paths: path_count,
        });
    }
    warnings.extend(missing_path_lint(doc, map, weights, weights.missing_path_ratio));
    ComplexityReport {
        cell_min_path: s.cell_min,
        cell_max_path: s.cell_max,
        effort_min: s.effort_min,
        effort_max: s.effort_max,
        path_count,
        signature,
        truncated,
        patterns,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dimension {
    Process,
    Knowledge,
}

/// The declared target falls outside the computed cell interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub dimension: Dimension,
    pub declared: BloomCell,
    pub min: BloomCell,
    pub max: BloomCell,
}

impl Discrepancy {
    pub fn message(&self) -> String {
        let (d, lo, hi, what) = match self.dimension {
            Dimension::Process => (
                self.declared.process.to_string(),
                self.min.process.to_string(),
                self.max.process.to_string(),
                "process",
            ),
            Dimension::Knowledge => (
                self.declared.knowledge.to_string(),
                self.min.knowledge.to_string(),
                self.max.knowledge.to_string(),
                "knowledge",
            ),
        };
        format!("declared {what} {d} lies outside the plan's range {lo}..{hi}")
    }
}

pub fn cell_discrepancies(declared: BloomCell, report: &ComplexityReport) -> Vec<Discrepancy> {
    let (lo, hi) = (report.cell_min_path, report.cell_max_path);
    let mut out = Vec::new();
    if declared.process < lo.process || declared.process > hi.process {
        out.push(Discrepancy {
            dimension: Dimension::Process,
            declared,
            min: lo,
            max: hi,
        });
    }
    if declared.knowledge < lo.knowledge || declared.knowledge > hi.knowledge {
        out.push(Discrepancy {
            dimension: Dimension::Knowledge,
            declared,
            min: lo,
            max: hi,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consistency {
    pub report: ComplexityReport,
    pub discrepancies: Vec<Discrepancy>,
}

/// Compares an exercise's declared target with the typed complexity of its
/// plan. Lint and unmapped-verb warnings are carried in `report.warnings`.
pub fn consistency_check(
    spec: &crate::specdsl::ExerciseSpec,
    map: &VerbMap,
    weights: &Weights,
) -> Result<Consistency, PlanError> {
    let doc = spec.plan.as_ref().ok_or(PlanError::MissingPlan)?;
    let report = type_plan(doc, map, weights);
    let discrepancies = cell_discrepancies(spec.target, &report);
    Ok(Consistency {
        report,
        discrepancies,
    })
}
