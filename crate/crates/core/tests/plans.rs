use exr_core::bloom::{BloomCell, KnowledgeCategory::*, ProcessCategory::*};
use exr_core::plans::*;
use exr_core::pos::Pos;
use proptest::prelude::*;

const COUNTING: &str = "read(DR) ; infer_intent(MDR) ; count_manual(Eval) ; conclude(DR)";
const EXTENDED: &str =
    "read(DR) ; infer_intent(MDR) ; count_manual(DR) ; conclude(DR) ; check_bounds(Eval)";

fn doc(src: &str) -> PlanDoc {
    parse_plan_doc(src, Pos::new(1, 1)).unwrap()
}

fn typed(src: &str) -> ComplexityReport {
    type_plan(&doc(src), VerbMap::builtin(), &Weights::default())
}

fn score(c: BloomCell) -> f64 {
    (1 + c.process as u8 + c.knowledge as u8) as f64
}

#[test]
fn counting_plan_parses_as_left_nested_sequence() {
    let p = parse_plan(COUNTING).unwrap();
    let mut verbs = Vec::new();
    let mut cur = &p;
    while let PlanNode::Seq(a, b) = &cur.node {
        let PlanNode::Atom { verb, .. } = &b.node else { panic!() };
        verbs.push(verb.clone());
        cur = a;
    }
    let PlanNode::Atom { verb, .. } = &cur.node else { panic!() };
    verbs.push(verb.clone());
    verbs.reverse();
    assert_eq!(verbs, ["read", "infer_intent", "count_manual", "conclude"]);
}

#[test]
fn simple_parses_and_errors() {
    assert!(matches!(parse_plan("execute(Eval)").unwrap().node, PlanNode::Atom { .. }));
    assert!(matches!(parse_plan("a(DR) ; )"), Err(PlanError::Parse { .. })));
    assert!(matches!(parse_plan("a(XR)"), Err(PlanError::Parse { .. })));
    assert!(matches!(parse_plan("NOPE ; a(DR)"), Err(PlanError::UndefinedRule { .. })));
    assert!(matches!(
        parse_plan("A => b(DR) ; B . B => A | c(E) . A"),
        Err(PlanError::RecursiveRule { .. })
    ));
    let p = parse_plan("a(DR) | b(E) ; c(MDR)").unwrap();
    assert!(matches!(p.node, PlanNode::Choice(..)));
}

#[test]
fn counting_plan_max_cell() {
    let r = typed(COUNTING);
    let cells = [
        BloomCell::new(Understand, Factual),
        BloomCell::new(Analyze, Conceptual),
        BloomCell::new(Apply, Procedural),
        BloomCell::new(Evaluate, Conceptual),
    ];
    let p = cells.iter().map(|c| c.process).max().unwrap();
    let k = cells.iter().map(|c| c.knowledge).max().unwrap();
    assert_eq!(r.cell_max_path, BloomCell::new(p, k));
    assert_eq!(r.cell_max_path, BloomCell::new(Evaluate, Procedural));
    assert_eq!(r.effort_min, cells.iter().map(|c| score(*c)).sum::<f64>());
}

#[test]
fn single_atom_report() {
    let r = typed("execute(Eval)");
    assert_eq!(r.cell_min_path, BloomCell::new(Apply, Procedural));
    assert_eq!(r.cell_max_path, r.cell_min_path);
    assert_eq!(r.effort_min, r.effort_max);
    assert_eq!(r.effort_min, 5.0);
    assert_eq!(r.path_count, 1);
}

fn custom_map() -> VerbMap {
    let mut m = VerbMap::default();
    m.insert("three", Layer::DR, BloomCell::new(Apply, Factual));
    m.insert("seven", Layer::DR, BloomCell::new(Create, Conceptual));
    m.insert("two", Layer::DR, BloomCell::new(Understand, Factual));
    m.insert("five", Layer::DR, BloomCell::new(Apply, Procedural));
    m.insert("four", Layer::DR, BloomCell::new(Apply, Conceptual));
    m
}

#[test]
fn choice_efforts() {
    let r = type_plan(&doc("three(DR) | seven(DR)"), &custom_map(), &Weights::default());
    assert_eq!((r.effort_min, r.effort_max), (3.0, 7.0));
    assert_eq!(r.cell_min_path, BloomCell::new(Apply, Factual));
    assert_eq!(r.cell_max_path, BloomCell::new(Create, Conceptual));
}

#[test]
fn pattern_examples() {
    use Layer::*;
    assert_eq!(detect_patterns(&[vec![DR, Eval, DR, Eval, DR]]), [PatternId::P1]);
    assert_eq!(detect_patterns(&[vec![MDR, DR, Eval]]), [PatternId::P3]);
    assert!(detect_patterns(&[vec![DR]]).is_empty());
    assert_eq!(detect_patterns(&[vec![DR, MDR, DR]]), [PatternId::P2]);
    assert!(typed(EXTENDED).patterns.contains(&PatternId::P3));
}

#[test]
fn missing_path_examples() {
    let m = custom_map();
    let w = Weights::default();
    // 12 = seven + five, against 2
    let d = doc("(seven(DR) ; five(DR)) ; two(DR)");
    let ws = missing_path_lint(&d, &m, &w, 4.0);
    assert_eq!(ws.len(), 1);
    let PlanWarning::MissingPath { ratio, smaller_plan, .. } = &ws[0] else { panic!() };
    assert_eq!(*ratio, 6.0);
    assert_eq!(smaller_plan, "two(DR)");
    assert!(missing_path_lint(&doc("five(DR) ; four(DR)"), &m, &w, 4.0).is_empty());
}

#[test]
fn extended_leeds_flags_bounds_check() {
    let d = doc(EXTENDED);
    let ws = missing_path_lint(&d, VerbMap::builtin(), &Weights::default(), 4.0);
    assert_eq!(ws.len(), 1);
    let PlanWarning::MissingPath { ratio, smaller_plan, smaller_effort, larger_effort, .. } = &ws[0] else {
        panic!()
    };
    assert_eq!(smaller_plan, "check_bounds(Eval)");
    assert_eq!(*smaller_effort, 4.0);
    assert_eq!(*larger_effort, 18.0);
    assert!(*ratio >= 4.0);
}

#[test]
fn declared_cell_consistency() {
    let r = typed(COUNTING);
    let ds = cell_discrepancies(BloomCell::new(Understand, Conceptual), &r);
    assert_eq!(ds.len(), 2);
    assert!(cell_discrepancies(r.cell_max_path, &r).is_empty());
}

#[test]
fn unmapped_verbs_use_layer_defaults() {
    let r = typed("ponder(Eval) ; muse(MDR)");
    assert_eq!(r.warnings.iter().filter(|w| w.code() == "UnmappedVerb").count(), 2);
    assert_eq!(r.effort_min, score(BloomCell::new(Apply, Procedural)) + score(BloomCell::new(Understand, Conceptual)));
}

#[test]
fn path_explosion_is_flagged() {
    let branch = "(a(DR) | b(DR))";
    let src = [branch; 7].join(" ; ");
    let r = typed(&src);
    assert_eq!(r.path_count, 128);
    assert!(r.truncated);
    assert_eq!(r.signature.len(), 64);
    assert!(r.warnings.iter().any(|w| w.code() == "PathExplosion"));
}

#[test]
fn rule_refs_type_like_inlined_bodies() {
    let a = typed("CHECK => read_case(DR) ; run(Eval) . read(DR) ; (CHECK)* ; conclude(DR)");
    let b = typed("read(DR) ; (read_case(DR) ; run(Eval))* ; conclude(DR)");
    assert_eq!(a.effort_min, b.effort_min);
    assert_eq!(a.cell_max_path, b.cell_max_path);
    assert_eq!(a.signature, b.signature);
}

#[test]
fn weights_file() {
    let w = Weights::parse("star_factor = 3\npath_bound = 8\n").unwrap();
    assert_eq!(w.star_factor, 3.0);
    assert_eq!(w.missing_path_ratio, 4.0);
    assert!(Weights::parse("speed = 1").is_err());
    assert_eq!(Weights::builtin(), Weights::default());
}

// Reference semantics by explicit path enumeration: each path is a list of
// (cell, multiplicity) pairs, a starred body repeating its path k times.
fn paths(p: &Plan, d: &PlanDoc, m: &VerbMap, k: f64) -> Vec<Vec<(BloomCell, f64)>> {
    match &p.node {
        PlanNode::Atom { verb, layer, .. } => {
            vec![vec![(m.get(verb, *layer).unwrap_or_else(|| default_cell(*layer)), 1.0)]]
        }
        PlanNode::Seq(a, b) => {
            let (xs, ys) = (paths(a, d, m, k), paths(b, d, m, k));
            xs.iter()
                .flat_map(|x| ys.iter().map(move |y| x.iter().chain(y).copied().collect()))
                .collect()
        }
        PlanNode::Choice(a, b) => {
            let mut v = paths(a, d, m, k);
            v.extend(paths(b, d, m, k));
            v
        }
        PlanNode::Star(b) => paths(b, d, m, k)
            .into_iter()
            .map(|p| p.into_iter().map(|(c, n)| (c, n * k)).collect())
            .collect(),
        PlanNode::RuleRef(n) => paths(&d.rules[n], d, m, k),
    }
}

fn effort(path: &[(BloomCell, f64)]) -> f64 {
    path.iter().map(|(c, n)| score(*c) * n).sum()
}

fn join(path: &[(BloomCell, f64)]) -> BloomCell {
    path.iter().map(|(c, _)| *c).reduce(BloomCell::join).unwrap()
}

const VERBS: &[(&str, Layer)] = &[
    ("read", Layer::DR),
    ("infer_intent", Layer::MDR),
    ("count_manual", Layer::Eval),
    ("conclude", Layer::DR),
    ("check_bounds", Layer::Eval),
    ("recall", Layer::DR),
    ("write_code", Layer::MDR),
    ("ponder", Layer::DR),
];

fn arb_plan() -> impl Strategy<Value = Plan> {
    let leaf = (0..VERBS.len()).prop_map(|i| Plan::atom(VERBS[i].0, VERBS[i].1));
    leaf.prop_recursive(6, 40, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Plan::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Plan::choice(a, b)),
            inner.prop_map(Plan::star),
        ]
    })
}

fn seq_nodes(p: &Plan, out: &mut Vec<(Plan, Plan)>) {
    match &p.node {
        PlanNode::Seq(a, b) => {
            out.push(((**a).clone(), (**b).clone()));
            seq_nodes(a, out);
            seq_nodes(b, out);
        }
        PlanNode::Choice(a, b) => {
            seq_nodes(a, out);
            seq_nodes(b, out);
        }
        PlanNode::Star(a) => seq_nodes(a, out),
        _ => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn typing_matches_path_enumeration(p in arb_plan()) {
        let d = PlanDoc::single(p);
        let m = VerbMap::builtin();
        let w = Weights::default();
        let t = Typer::new(&d, m, &w);
        prop_assume!(t.path_count(&d.main) <= 4096);
        let ps = paths(&d.main, &d, m, w.star_factor);
        let r = type_plan(&d, m, &w);
        let (mut best, mut best_e) = (0, f64::INFINITY);
        for (i, path) in ps.iter().enumerate() {
            if effort(path) < best_e {
                best = i;
                best_e = effort(path);
            }
        }
        prop_assert_eq!(r.effort_min, best_e);
        prop_assert_eq!(r.effort_max, ps.iter().map(|p| effort(p)).fold(0.0, f64::max));
        prop_assert_eq!(r.cell_min_path, join(&ps[best]));
        prop_assert_eq!(r.cell_max_path, ps.iter().map(|p| join(p)).reduce(BloomCell::join).unwrap());
        prop_assert!(r.effort_min <= r.effort_max);
        prop_assert!(r.cell_min_path.le(r.cell_max_path));
        prop_assert_eq!(r.path_count as usize, ps.len());
    }

    #[test]
    fn lint_flags_exactly_lopsided_sequences(p in arb_plan()) {
        let d = PlanDoc::single(p.clone());
        let m = VerbMap::builtin();
        let w = Weights::default();
        let t = Typer::new(&d, m, &w);
        let mut seqs = Vec::new();
        seq_nodes(&p, &mut seqs);
        let expected = seqs
            .iter()
            .filter(|(a, b)| {
                let (ea, eb) = (t.summary(a).effort_min, t.summary(b).effort_min);
                ea.max(eb) >= 4.0 * ea.min(eb)
            })
            .count();
        let ws = missing_path_lint(&d, m, &w, 4.0);
        prop_assert_eq!(ws.len(), expected);
        for w in &ws {
            let PlanWarning::MissingPath { ratio, .. } = w else { unreachable!() };
            prop_assert!(*ratio >= 4.0);
        }
    }

    #[test]
    fn combinator_laws(a in arb_plan(), b in arb_plan()) {
        let m = VerbMap::builtin();
        let w = Weights::default();
        let ty = |p: Plan| type_plan(&PlanDoc::single(p), m, &w);
        let (ra, rb) = (ty(a.clone()), ty(b.clone()));
        let s = ty(Plan::seq(a.clone(), b.clone()));
        prop_assert_eq!(s.effort_min, ra.effort_min + rb.effort_min);
        prop_assert_eq!(s.effort_max, ra.effort_max + rb.effort_max);
        prop_assert!(ra.cell_max_path.le(s.cell_max_path) && rb.cell_max_path.le(s.cell_max_path));
        let c = ty(Plan::choice(a.clone(), b.clone()));
        prop_assert_eq!(c.effort_min, ra.effort_min.min(rb.effort_min));
        prop_assert_eq!(c.effort_max, ra.effort_max.max(rb.effort_max));
        let st = ty(Plan::star(a.clone()));
        prop_assert_eq!(st.cell_min_path, ra.cell_min_path);
        prop_assert_eq!(st.cell_max_path, ra.cell_max_path);
        prop_assert_eq!(st.effort_min, ra.effort_min * w.star_factor);
        prop_assert_eq!(st.effort_max, ra.effort_max * w.star_factor);
        prop_assert_eq!(ty(a.clone()), ra);
    }

    #[test]
    fn display_round_trips(p in arb_plan()) {
        prop_assert_eq!(parse_plan(&p.to_string()).unwrap(), p);
    }
}
