//! Revised Bloom taxonomy: the two category dimensions, clue-based
//! classification of objective statements and course-level groupings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ProcessCategory {
    Remember,
    Understand,
    Apply,
    Analyze,
    Evaluate,
    Create,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum KnowledgeCategory {
    Factual,
    Conceptual,
    Procedural,
    Metacognitive,
}

impl ProcessCategory {
    pub const ALL: [ProcessCategory; 6] = [
        ProcessCategory::Remember,
        ProcessCategory::Understand,
        ProcessCategory::Apply,
        ProcessCategory::Analyze,
        ProcessCategory::Evaluate,
        ProcessCategory::Create,
    ];

    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_rank(rank: u8) -> Option<Self> {
        Self::ALL.get(rank as usize).copied()
    }
}

impl KnowledgeCategory {
    pub const ALL: [KnowledgeCategory; 4] = [
        KnowledgeCategory::Factual,
        KnowledgeCategory::Conceptual,
        KnowledgeCategory::Procedural,
        KnowledgeCategory::Metacognitive,
    ];

    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_rank(rank: u8) -> Option<Self> {
        Self::ALL.get(rank as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for ProcessCategory {
    type Err = UnknownCategory;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl FromStr for KnowledgeCategory {
    type Err = UnknownCategory;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for ProcessCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for KnowledgeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One cell of the taxonomy table, ordered componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BloomCell {
    pub process: ProcessCategory,
    pub knowledge: KnowledgeCategory,
}

impl BloomCell {
    pub const fn new(process: ProcessCategory, knowledge: KnowledgeCategory) -> Self {
        BloomCell { process, knowledge }
    }

    pub fn join(self, other: BloomCell) -> BloomCell {
        BloomCell::new(
            self.process.max(other.process),
            self.knowledge.max(other.knowledge),
        )
    }

    /// Componentwise `<=`.
    pub fn le(self, other: BloomCell) -> bool {
        self.process <= other.process && self.knowledge <= other.knowledge
    }

    pub fn all() -> impl Iterator<Item = BloomCell> {
        ProcessCategory::ALL.into_iter().flat_map(|p| {
            KnowledgeCategory::ALL
                .into_iter()
                .map(move |k| BloomCell::new(p, k))
        })
    }
}

impl fmt::Display for BloomCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.process, self.knowledge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MissingSide {
    Verb,
    Noun,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BloomError {
    #[error("cannot normalize statement: no known verb in `{0}`")]
    CannotNormalize(String),
    #[error("unclassifiable: no clue for the {}", match .0 {
        MissingSide::Verb => "verb",
        MissingSide::Noun => "noun phrase",
        MissingSide::Both => "verb or the noun phrase",
    })]
    Unclassifiable(MissingSide),
    #[error("clue table line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Verb and noun association rules. Keys are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClueTable {
    verbs: BTreeMap<String, ProcessCategory>,
    nouns: BTreeMap<String, KnowledgeCategory>,
}

static DEFAULT_CLUES: OnceLock<ClueTable> = OnceLock::new();

impl ClueTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static ClueTable {
        DEFAULT_CLUES.get_or_init(|| {
            ClueTable::parse(include_str!("../data/clues.txt")).expect("shipped clue table parses")
        })
    }

    pub fn parse(text: &str) -> Result<ClueTable, BloomError> {
        let mut table = ClueTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| BloomError::Syntax {
                line: i + 1,
                message,
            };
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| err("expected `->`".into()))?;
            let mut words = lhs.split_whitespace();
            let kind = words.next().unwrap_or("");
            let key = words
                .next()
                .ok_or_else(|| err("missing lemma".into()))?
                .to_lowercase();
            if words.next().is_some() {
                return Err(err("lemma must be a single word; join phrases with `_` or `-`".into()));
            }
            match kind {
                "verb" => {
                    let p = rhs.parse().map_err(|e: UnknownCategory| err(e.to_string()))?;
                    table.verbs.insert(key, p);
                }
                "noun" => {
                    let k = rhs.parse().map_err(|e: UnknownCategory| err(e.to_string()))?;
                    table.nouns.insert(key, k);
                }
                other => return Err(err(format!("expected `verb` or `noun`, found `{other}`"))),
            }
        }
        Ok(table)
    }

    pub fn verb(&self, lemma: &str) -> Option<ProcessCategory> {
        self.verbs.get(&lemma.to_lowercase()).copied()
    }

    pub fn noun(&self, id: &str) -> Option<KnowledgeCategory> {
        self.nouns.get(&id.to_lowercase()).copied()
    }

    pub fn insert_verb(&mut self, lemma: &str, p: ProcessCategory) -> Option<ProcessCategory> {
        self.verbs.insert(lemma.to_lowercase(), p)
    }

    pub fn insert_noun(&mut self, id: &str, k: KnowledgeCategory) -> Option<KnowledgeCategory> {
        self.nouns.insert(id.to_lowercase(), k)
    }

    pub fn verbs(&self) -> impl Iterator<Item = (&str, ProcessCategory)> {
        self.verbs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn nouns(&self) -> impl Iterator<Item = (&str, KnowledgeCategory)> {
        self.nouns.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// A statement in `V x NP` form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Normalized {
    pub verb: String,
    pub np: Vec<String>,
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "of", "in", "into", "its", "it", "to", "be", "able", "between",
    "for", "with", "on", "from", "by", "their", "this", "that", "these", "those", "is", "are",
    "given", "following", "each", "all", "some", "any", "how", "what", "which", "as", "at",
];

fn lemma(word: &str) -> String {
    let w = word.to_lowercase();
    if w.len() <= 3 || w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return w;
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return format!("{stem}y");
    }
    match w.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => w,
    }
}

/// Splits a statement into its main verb and noun-phrase members. The verb is
/// the first (longest) lexicon match; adjacent content words outside stopwords
/// and verbs are joined with `-` into one concept identifier.
pub fn normalize_statement(text: &str, lexicon: &ClueTable) -> Result<Normalized, BloomError> {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric() && c != '_' && c != '-')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();

    // (start, len) of each lexicon verb occurrence, two-word phrases first
    let mut verb_spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        if i + 1 < words.len() && lexicon.verb(&format!("{}_{}", words[i], words[i + 1])).is_some()
        {
            verb_spans.push((i, 2));
            i += 2;
        } else if lexicon.verb(&words[i]).is_some() {
            verb_spans.push((i, 1));
            i += 1;
        } else {
            i += 1;
        }
    }
    let Some(&(vstart, vlen)) = verb_spans.first() else {
        return Err(BloomError::CannotNormalize(text.to_string()));
    };
    let verb = words[vstart..vstart + vlen].join("_");

    let in_verb = |i: usize| verb_spans.iter().any(|&(s, l)| i >= s && i < s + l);
    let mut np = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if in_verb(i) || STOPWORDS.contains(&w.as_str()) {
            if !current.is_empty() {
                np.push(current.join("-"));
                current.clear();
            }
            continue;
        }
        current.push(lemma(w));
    }
    if !current.is_empty() {
        np.push(current.join("-"));
    }
    let mut seen = std::collections::HashSet::new();
    np.retain(|n| seen.insert(n.clone()));
    Ok(Normalized { verb, np })
}

/// Maps `V x NP` to a cell. Every NP member must be known; the knowledge row
/// is that of the most abstract member.
pub fn classify(verb: &str, np: &[String], clues: &ClueTable) -> Result<BloomCell, BloomError> {
    let process = clues.verb(verb);
    let knowledge = if np.is_empty() {
        None
    } else {
        np.iter()
            .map(|n| clues.noun(n))
            .collect::<Option<Vec<_>>>()
            .and_then(|ks| ks.into_iter().max())
    };
    match (process, knowledge) {
        (Some(p), Some(k)) => Ok(BloomCell::new(p, k)),
        (None, Some(_)) => Err(BloomError::Unclassifiable(MissingSide::Verb)),
        (Some(_), None) => Err(BloomError::Unclassifiable(MissingSide::Noun)),
        (None, None) => Err(BloomError::Unclassifiable(MissingSide::Both)),
    }
}

pub fn classify_statement(text: &str, clues: &ClueTable) -> Result<BloomCell, BloomError> {
    let n = normalize_statement(text, clues)?;
    classify(&n.verb, &n.np, clues)
}

/// A student below the exercise's knowledge row has to create that knowledge
/// first, so the task moves to the last cell of the row.
pub fn dynamic_cell(static_cell: BloomCell, student: KnowledgeCategory) -> BloomCell {
    if student < static_cell.knowledge {
        BloomCell::new(ProcessCategory::Create, static_cell.knowledge)
    } else {
        static_cell
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CourseLevel {
    ReadingUnderstanding,
    WritingSmallFragments,
    WritingNontrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum KnowledgeGroup {
    Behavioral,
    Implementation,
    Enhancement,
}

impl FromStr for CourseLevel {
    type Err = UnknownCategory;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ReadingUnderstanding" => Ok(CourseLevel::ReadingUnderstanding),
            "WritingSmallFragments" => Ok(CourseLevel::WritingSmallFragments),
            "WritingNontrivial" => Ok(CourseLevel::WritingNontrivial),
            other => Err(UnknownCategory(other.to_string())),
        }
    }
}

impl FromStr for KnowledgeGroup {
    type Err = UnknownCategory;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Behavioral" => Ok(KnowledgeGroup::Behavioral),
            "Implementation" => Ok(KnowledgeGroup::Implementation),
            "Enhancement" => Ok(KnowledgeGroup::Enhancement),
            other => Err(UnknownCategory(other.to_string())),
        }
    }
}

/// Parses a grouping file of `<Category> -> <Group>` lines. Every category of
/// the source dimension must be covered exactly once.
pub fn parse_grouping<C, G>(text: &str, all: &[C]) -> Result<BTreeMap<C, G>, BloomError>
where
    C: FromStr<Err = UnknownCategory> + Ord + Copy,
    G: FromStr<Err = UnknownCategory>,
{
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| BloomError::Syntax {
            line: i + 1,
            message,
        };
        let (lhs, rhs) = line
            .split_once("->")
            .ok_or_else(|| err("expected `->`".into()))?;
        let c: C = lhs.parse().map_err(|e: UnknownCategory| err(e.to_string()))?;
        let g: G = rhs.parse().map_err(|e: UnknownCategory| err(e.to_string()))?;
        if map.insert(c, g).is_some() {
            return Err(err("category grouped twice".into()));
        }
    }
    if map.len() != all.len() {
        return Err(BloomError::Syntax {
            line: 0,
            message: "grouping does not cover every category".into(),
        });
    }
    Ok(map)
}

static COURSE_LEVELS: OnceLock<BTreeMap<ProcessCategory, CourseLevel>> = OnceLock::new();
static KNOWLEDGE_GROUPS: OnceLock<BTreeMap<KnowledgeCategory, KnowledgeGroup>> = OnceLock::new();

/// Course-level skill for a cell; only the process column matters.
pub fn course_level(cell: BloomCell) -> CourseLevel {
    COURSE_LEVELS.get_or_init(|| {
        parse_grouping(include_str!("../data/course_levels.txt"), &ProcessCategory::ALL)
            .expect("shipped course grouping parses")
    })[&cell.process]
}

pub fn knowledge_group(k: KnowledgeCategory) -> KnowledgeGroup {
    KNOWLEDGE_GROUPS.get_or_init(|| {
        parse_grouping(include_str!("../data/knowledge_groups.txt"), &KnowledgeCategory::ALL)
            .expect("shipped knowledge grouping parses")
    })[&k]
}
