use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use super::normal::normalize;
use super::pack::{RewriteRule, RuleKind, RulePack};
use super::pattern::{instantiate, match_all, Substitution};
use super::{is_ac, RewriteError, Term};

/// One way a rule applies somewhere inside a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub path: Vec<usize>,
    /// Operands of an AC node that the rule consumed, when it matched only
    /// part of a sum or product.
    pub operands: Option<Vec<usize>>,
    pub subst: Substitution,
    pub result: Term,
}

fn subterm<'t>(t: &'t Term, path: &[usize]) -> &'t Term {
    path.iter().fold(t, |t, &i| match t {
        Term::App(_, args) => &args[i],
        _ => unreachable!("path leads through an application"),
    })
}

fn replace(t: &Term, path: &[usize], operands: Option<&[usize]>, new: Term) -> Term {
    match (path.split_first(), t) {
        (Some((&i, rest)), Term::App(op, args)) => {
            let mut args = args.clone();
            args[i] = replace(&args[i], rest, operands, new);
            Term::App(op.clone(), args)
        }
        (None, Term::App(op, args)) if operands.is_some() => {
            let picked = operands.unwrap();
            let mut kept: Vec<Term> = args.iter().enumerate().filter(|(i, _)| !picked.contains(i)).map(|(_, a)| a.clone()).collect();
            kept.push(new);
            Term::App(op.clone(), kept)
        }
        _ => new,
    }
}

fn positions(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(path.clone());
    if let Term::App(_, args) = t {
        for (i, a) in args.iter().enumerate() {
            path.push(i);
            positions(a, path, out);
            path.pop();
        }
    }
}

fn subsets(n: usize, min: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n > 12 {
        return out;
    }
    for mask in 1u32..(1 << n) - 1 {
        if mask.count_ones() as usize >= min {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Every application of `rule` inside the normalized term `t`. Subtasks are
/// left in place of their solutions, so the result is again a task. Results
/// are normalized.
pub fn applications(rule: &RewriteRule, t: &Term) -> Vec<Application> {
    let mut paths = Vec::new();
    positions(t, &mut Vec::new(), &mut paths);
    let mut out = Vec::new();
    let root_op = rule.pattern.root_op().filter(|o| is_ac(o));
    let arity = match &rule.pattern {
        super::Pattern::App(_, a) => a.len(),
        _ => 0,
    };
    for path in paths {
        let focus = subterm(t, &path);
        let mut candidates: Vec<(Option<Vec<usize>>, Term)> = vec![(None, focus.clone())];
        if let (Some(op), Term::App(fop, args)) = (root_op, focus) {
            if op == fop && arity >= 2 {
                for picked in subsets(args.len(), arity) {
                    let part = Term::App(op.to_string(), picked.iter().map(|&i| args[i].clone()).collect());
                    candidates.push((Some(picked), part));
                }
            }
        }
        for (operands, focus) in candidates {
            for subst in match_all(&rule.pattern, &focus) {
                let subtasks: Vec<Term> = rule.subtasks.iter().map(|s| normalize(&instantiate(s, &subst, &[]))).collect();
                let local = instantiate(&rule.rebuild, &subst, &subtasks);
                let result = normalize(&replace(t, &path, operands.as_deref(), local));
                if result != *t {
                    out.push(Application { path: path.clone(), operands: operands.clone(), subst, result });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "result", rename_all = "lowercase")]
pub enum NodeStatus {
    Open,
    Solved(Term),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub task: Term,
    pub status: NodeStatus,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphEdge {
    pub parent: usize,
    pub rule: String,
    pub children: Vec<usize>,
    #[serde(skip)]
    rebuild: Option<(usize, Substitution)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolutionGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub root: usize,
    pub depth_exceeded: bool,
}

impl SolutionGraph {
    pub fn solution(&self) -> Option<&Term> {
        match &self.nodes[self.root].status {
            NodeStatus::Solved(t) => Some(t),
            NodeStatus::Open => None,
        }
    }

    pub fn find(&self, task: &Term) -> Option<usize> {
        let task = normalize(task);
        self.nodes.iter().position(|n| n.task == task)
    }

    pub fn children_of(&self, node: usize) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.parent == node)
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.children_of(n).flat_map(|e| e.children.iter().copied()));
            }
        }
        false
    }
}

/// Breadth-first expansion of `task` with the pack's expert rules. Rules with
/// subtasks decompose a node at its root; rules without subtasks rewrite
/// anywhere inside it and yield a single follow-up task. A node no rule
/// applies to is solved by itself unless a derivative remains in it.
pub fn build_solution_graph(task: &Term, pack: &RulePack, max_depth: usize) -> SolutionGraph {
    let root_task = normalize(task);
    let mut g = SolutionGraph {
        nodes: vec![GraphNode { task: root_task.clone(), status: NodeStatus::Open, depth: 0 }],
        edges: Vec::new(),
        root: 0,
        depth_exceeded: false,
    };
    let mut index: HashMap<Term, usize> = HashMap::from([(root_task, 0)]);
    let mut unexpanded = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let rules: Vec<&RewriteRule> = pack.expert().collect();

    while let Some(id) = queue.pop_front() {
        let task = g.nodes[id].task.clone();
        let depth = g.nodes[id].depth;
        let mut found: Vec<(usize, Vec<Term>, Option<Substitution>)> = Vec::new();
        for (ri, rule) in rules.iter().enumerate() {
            if rule.subtasks.is_empty() {
                for app in applications(rule, &task) {
                    found.push((ri, vec![app.result], None));
                }
            } else {
                for subst in match_all(&rule.pattern, &task) {
                    let subs = rule.subtasks.iter().map(|s| normalize(&instantiate(s, &subst, &[]))).collect();
                    found.push((ri, subs, Some(subst)));
                }
            }
        }
        if found.is_empty() {
            if !task.has_derivative() {
                g.nodes[id].status = NodeStatus::Solved(task);
            }
            continue;
        }
        if depth >= max_depth {
            unexpanded.push(id);
            continue;
        }
        for (ri, subs, subst) in found {
            let mut children = Vec::with_capacity(subs.len());
            let mut cyclic = false;
            for s in subs {
                let child = match index.get(&s) {
                    Some(&c) => {
                        if c == id || g.reaches(c, id) {
                            cyclic = true;
                        }
                        c
                    }
                    None => {
                        let c = g.nodes.len();
                        g.nodes.push(GraphNode { task: s.clone(), status: NodeStatus::Open, depth: depth + 1 });
                        index.insert(s, c);
                        queue.push_back(c);
                        c
                    }
                };
                children.push(child);
            }
            if !cyclic {
                g.edges.push(GraphEdge {
                    parent: id,
                    rule: rules[ri].name.clone(),
                    children,
                    rebuild: subst.map(|s| (ri, s)),
                });
            }
        }
    }

    loop {
        let mut changed = false;
        for ei in 0..g.edges.len() {
            let e = &g.edges[ei];
            if g.nodes[e.parent].status != NodeStatus::Open {
                continue;
            }
            let solved: Option<Vec<Term>> = e
                .children
                .iter()
                .map(|&c| match &g.nodes[c].status {
                    NodeStatus::Solved(t) => Some(t.clone()),
                    NodeStatus::Open => None,
                })
                .collect();
            let Some(solved) = solved else { continue };
            let value = match &e.rebuild {
                Some((ri, subst)) => normalize(&instantiate(&rules[*ri].rebuild, subst, &solved)),
                None => solved.into_iter().next().unwrap(),
            };
            let parent = e.parent;
            g.nodes[parent].status = NodeStatus::Solved(value);
            changed = true;
        }
        if !changed {
            break;
        }
    }
    g.depth_exceeded = unexpanded.iter().any(|&n| g.nodes[n].status == NodeStatus::Open);
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplanationStep {
    pub rule: String,
    pub kind: RuleKind,
    pub tags: Vec<String>,
    pub result: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplanationPath {
    pub steps: Vec<ExplanationStep>,
    pub buggy_steps: usize,
}

impl ExplanationPath {
    pub fn rule_names(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.rule.as_str()).collect()
    }

    fn rank_key(&self) -> (usize, usize, Vec<&str>) {
        (self.buggy_steps, self.steps.len(), self.rule_names())
    }
}

const SEARCH_BUDGET: usize = 200_000;

struct Search<'a> {
    pack: &'a RulePack,
    answer: Term,
    max_steps: usize,
    moves: HashMap<Term, Vec<(usize, Term)>>,
    found: Vec<Vec<(usize, Term)>>,
    visited: usize,
}

impl Search<'_> {
    fn moves(&mut self, t: &Term) -> Vec<(usize, Term)> {
        if let Some(m) = self.moves.get(t) {
            return m.clone();
        }
        let mut m: Vec<(usize, Term)> = Vec::new();
        for (ri, rule) in self.pack.rules.iter().enumerate() {
            for app in applications(rule, t) {
                if !m.iter().any(|(r, x)| *r == ri && *x == app.result) {
                    m.push((ri, app.result));
                }
            }
        }
        self.moves.insert(t.clone(), m.clone());
        m
    }

    fn dfs(&mut self, state: &Term, path: &mut Vec<(usize, Term)>, seen: &mut Vec<Term>) {
        self.visited += 1;
        if *state == self.answer {
            self.found.push(path.clone());
            return;
        }
        if path.len() >= self.max_steps || self.visited > SEARCH_BUDGET {
            return;
        }
        for (ri, next) in self.moves(state) {
            if seen.contains(&next) {
                continue;
            }
            seen.push(next.clone());
            path.push((ri, next.clone()));
            self.dfs(&next, path, seen);
            path.pop();
            seen.pop();
        }
    }
}

/// Every sequence of at most `max_steps` expert or buggy rule applications
/// leading from `task` to `answer` (compared in canonical form), ranked by
/// fewest buggy steps, then length, then rule names. A path stops as soon as
/// it reaches the answer.
pub fn diagnose(task: &Term, answer: &Term, pack: &RulePack, max_steps: usize) -> Result<Vec<ExplanationPath>, RewriteError> {
    let start = normalize(task);
    let mut search = Search {
        pack,
        answer: normalize(answer),
        max_steps: max_steps.max(1),
        moves: HashMap::new(),
        found: Vec::new(),
        visited: 0,
    };
    search.dfs(&start.clone(), &mut Vec::new(), &mut vec![start]);
    let mut paths: Vec<ExplanationPath> = search
        .found
        .into_iter()
        .map(|p| {
            let steps: Vec<ExplanationStep> = p
                .into_iter()
                .map(|(ri, result)| {
                    let r = &pack.rules[ri];
                    ExplanationStep { rule: r.name.clone(), kind: r.kind, tags: r.tags.iter().cloned().collect(), result }
                })
                .collect();
            let buggy_steps = steps.iter().filter(|s| s.kind == RuleKind::Buggy).count();
            ExplanationPath { steps, buggy_steps }
        })
        .collect();
    if paths.is_empty() {
        return Err(RewriteError::NoExplanation { max_steps });
    }
    paths.sort_by(|a, b| a.rank_key().cmp(&b.rank_key()));
    paths.dedup();
    Ok(paths)
}
