use std::collections::BTreeSet;

use exr_core::rewrite::*;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(s: &str) -> Term {
    parse_term(s).unwrap()
}

fn n(s: &str) -> Term {
    normalize(&t(s))
}

#[test]
fn normalize_examples() {
    assert_eq!(n("4 + x"), n("x + 4"));
    assert_eq!(n("2 + 3"), Term::int(5));
    assert_eq!(n("x*(7+4)"), n("11*x"));
    assert_eq!(n("x*(7+4)"), Term::app("*", vec![Term::int(11), Term::sym("x")]));
    assert_eq!(n("neg(3)"), Term::int(-3));
    assert_eq!(n("1/4"), Term::ratio(1, 4));
    assert_eq!(n("(a + b) + (c + 1) + 2"), n("c + 3 + b + a"));
    assert_eq!(n("x*1 + 0"), Term::sym("x"));
}

#[test]
fn match_examples() {
    let p = parse_pattern("d/dx(F(G))").unwrap();
    let s = match_term(&p, &t("d/dx(log(sin(x^3)))")).unwrap();
    assert_eq!(s["F"], Term::sym("log"));
    assert_eq!(s["G"], n("sin(x^3)"));

    let s = match_term(&parse_pattern("X").unwrap(), &t("eq(1, y)")).unwrap();
    assert_eq!(s["X"], n("eq(1, y)"));

    let s = match_term(&parse_pattern("a + X").unwrap(), &t("y + a")).unwrap();
    assert_eq!(s["X"], Term::sym("y"));

    assert!(match_term(&parse_pattern("X:num").unwrap(), &t("y")).is_none());
    assert!(match_term(&parse_pattern("X + X").unwrap(), &t("y + z")).is_none());
    assert!(match_term(&parse_pattern("X + X").unwrap(), &t("y + y")).is_some());
}

#[test]
fn chain_rule_graph_has_both_subtasks() {
    let task = t("d/dx(log(sin(x^3)))");
    let g = build_solution_graph(&task, RulePack::differentiation(), 32);
    assert!(!g.depth_exceeded);
    let edge = g.children_of(g.root).find(|e| e.rule == "chain").unwrap();
    let kids: Vec<Term> = edge.children.iter().map(|&c| g.nodes[c].task.clone()).collect();
    assert_eq!(kids, vec![n("d/dz(log(z))"), n("d/dx(sin(x^3))")]);
    let inner = g.find(&t("d/dx(sin(x^3))")).unwrap();
    let edge = g.children_of(inner).find(|e| e.rule == "chain").unwrap();
    assert!(edge.children.contains(&g.find(&t("d/dx(x^3)")).unwrap()));
    assert_eq!(g.solution().unwrap(), &n("3*x^2*cos(x^3)/sin(x^3)"));
    for e in &g.edges {
        assert_eq!(RulePack::differentiation().get(&e.rule).unwrap().kind, RuleKind::Expert);
    }
}

#[test]
fn base_case_is_single_step() {
    let g = build_solution_graph(&t("d/dx(x)"), RulePack::differentiation(), 4);
    assert_eq!(g.solution(), Some(&Term::int(1)));
    assert_eq!(g.children_of(g.root).count(), 1);
}

#[test]
fn missing_inner_derivative_is_diagnosed() {
    let paths = diagnose(&t("d/dx(log(sin(x^3)))"), &t("1/sin(x^3)"), RulePack::differentiation(), 8).unwrap();
    let top = &paths[0];
    assert_eq!(top.buggy_steps, 1);
    let buggy: Vec<_> = top.steps.iter().filter(|s| s.kind == RuleKind::Buggy).collect();
    let tags: BTreeSet<&str> = buggy[0].tags.iter().map(String::as_str).collect();
    assert_eq!(tags, BTreeSet::from(["buggy", "chainrule", "inner_layer"]));
}

#[test]
fn linear_equation_graph() {
    let g = build_solution_graph(&t("eq(2x+9, 8+6x)"), RulePack::linear_equations(), 16);
    // 2x + 9 = 8 + 6x gives 1 = 4x
    assert_eq!(g.solution(), Some(&n("eq(x, 1/4)")));
    let g = build_solution_graph(&t("eq(2x+9, 8+6x)"), RulePack::linear_equations(), 2);
    assert!(g.depth_exceeded);
    assert!(g.solution().is_none());
}

/// Independent model of the equation moves over coefficient lists: the left
/// side holds unknown coefficients and one folded constant, the right side
/// likewise.
#[derive(Clone, Debug, PartialEq)]
struct Side {
    vars: Vec<i64>,
    konst: i64,
}

fn oracle_moves(l: &Side, r: &Side) -> Vec<(bool, Side, Side)> {
    let mut out = Vec::new();
    for i in 0..r.vars.len() {
        for (buggy, sign) in [(false, -1), (true, 1)] {
            let mut l2 = l.clone();
            let mut r2 = r.clone();
            let a = r2.vars.remove(i);
            l2.vars.push(sign * a);
            out.push((buggy, l2, r2));
        }
    }
    if l.konst != 0 && !l.vars.is_empty() {
        for (buggy, sign) in [(false, -1), (true, 1)] {
            let mut l2 = l.clone();
            let mut r2 = r.clone();
            r2.konst += sign * l.konst;
            l2.konst = 0;
            out.push((buggy, l2, r2));
        }
    }
    for side in 0..2 {
        let s = if side == 0 { l } else { r };
        for i in 0..s.vars.len() {
            for j in 0..s.vars.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (s.vars[i], s.vars[j]);
                for (buggy, c) in [(false, a + b), (true, a - b)] {
                    let mut s2 = s.clone();
                    s2.vars.retain({
                        let mut k = 0;
                        move |_| {
                            k += 1;
                            k - 1 != i && k - 1 != j
                        }
                    });
                    if c != 0 {
                        s2.vars.push(c);
                    }
                    if side == 0 {
                        out.push((buggy, s2, r.clone()));
                    } else {
                        out.push((buggy, l.clone(), s2));
                    }
                }
            }
        }
    }
    out
}

fn canonical(s: &Side) -> (Vec<i64>, i64) {
    let mut v = s.vars.clone();
    v.sort();
    (v, s.konst)
}

fn oracle_min_buggy(l: Side, r: Side, goal: (&Side, &Side), depth: usize) -> Option<usize> {
    if canonical(&l) == canonical(goal.0) && canonical(&r) == canonical(goal.1) {
        return Some(0);
    }
    if depth == 0 {
        return None;
    }
    oracle_moves(&l, &r)
        .into_iter()
        .filter_map(|(b, l2, r2)| oracle_min_buggy(l2, r2, goal, depth - 1).map(|k| k + b as usize))
        .min()
}

#[test]
fn two_slip_diagnosis_matches_exhaustive_oracle() {
    let pack = RulePack::linear_equations();
    let paths = diagnose(&t("eq(2x+9, 8+6x)"), &t("eq(8x, 17)"), pack, 3).unwrap();
    let top = &paths[0];
    assert_eq!(top.buggy_steps, 2);
    let equal_rank_expert =
        paths.iter().filter(|p| p.buggy_steps == 0 && p.steps.len() == top.steps.len()).count();
    assert_eq!(equal_rank_expert, 0);
    assert!(paths.iter().all(|p| p.buggy_steps >= 2));

    let start = (Side { vars: vec![2], konst: 9 }, Side { vars: vec![6], konst: 8 });
    let goal = (Side { vars: vec![8], konst: 0 }, Side { vars: vec![], konst: 17 });
    let best = oracle_min_buggy(start.0.clone(), start.1.clone(), (&goal.0, &goal.1), 3);
    assert_eq!(best, Some(top.buggy_steps));
    assert!(oracle_min_buggy(start.0, start.1, (&goal.0, &goal.1), 2).is_none());
    assert!(diagnose(&t("eq(2x+9, 8+6x)"), &t("eq(8x, 17)"), pack, 2).is_err());
}

#[test]
fn no_explanation_is_an_error() {
    let r = diagnose(&t("d/dx(x^2)"), &t("7*x"), RulePack::differentiation(), 4);
    assert_eq!(r, Err(RewriteError::NoExplanation { max_steps: 4 }));
}

#[test]
fn explanation_paths_are_minimal() {
    let answer = n("1/sin(x^3)");
    let paths = diagnose(&t("d/dx(log(sin(x^3)))"), &answer, RulePack::differentiation(), 8).unwrap();
    for p in &paths {
        assert_eq!(p.steps.last().unwrap().result, answer);
        assert!(p.steps[..p.steps.len() - 1].iter().all(|s| s.result != answer));
    }
}

#[test]
fn pack_validation() {
    let bad = [
        "rule r expert : f(X) ~> g(Y)",
        "rule r expert : f(X) => g(X) ~> $2",
        "rule r expert : f(X) ~> X\nrule r buggy : g(X) ~> X",
        "rule r sometimes : f(X) ~> X",
        "rule r expert : f(X ~> X",
        "  f(X) ~> X",
    ];
    for src in bad {
        assert!(matches!(RulePack::parse(src), Err(RewriteError::Pack { .. })), "{src}");
    }
    let ok = RulePack::parse("# c\nrule r expert tags(a, b) : f(X)\n    ~> g(X)\n").unwrap();
    assert_eq!(ok.rules[0].tags, BTreeSet::from(["a".to_string(), "b".to_string()]));
}

fn random_term(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.7) { "x".into() } else { rng.random_range(1..6).to_string() };
    }
    let a = random_term(rng, depth - 1);
    match rng.random_range(0..7) {
        0 => format!("({a} + {})", random_term(rng, depth - 1)),
        1 => format!("({a} * {})", random_term(rng, depth - 1)),
        2 => format!("({a} - {})", random_term(rng, depth - 1)),
        3 => format!("({a})^{}", rng.random_range(2..4)),
        4 => format!("log({a})"),
        5 => format!("sin({a})"),
        _ => format!("cos({a})"),
    }
}

fn richardson(f: &Term, x: f64) -> Option<f64> {
    let d = |h: f64| Some((f.eval_f64(&[("x", x + h)])? - f.eval_f64(&[("x", x - h)])?) / (2.0 * h));
    let h = 1e-3;
    Some((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

#[test]
fn expert_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pack = RulePack::differentiation();
    let mut checked = 0;
    while checked < 50 {
        let src = random_term(&mut rng, 3);
        let f = n(&src);
        let g = build_solution_graph(&t(&format!("d/dx({src})")), pack, 64);
        let d = g.solution().unwrap_or_else(|| panic!("unsolved: {src}"));
        assert!(!d.has_derivative());
        let mut points = 0;
        for k in 0..60 {
            if points == 5 {
                break;
            }
            let x = 0.35 + 0.05 * k as f64;
            let (Some(exact), Some(approx)) = (d.eval_f64(&[("x", x)]), richardson(&f, x)) else { continue };
            let scale = exact.abs().max(approx.abs()).max(1.0);
            assert!((exact - approx).abs() <= 1e-6 * scale, "{src} at {x}: {exact} vs {approx} ({d})");
            points += 1;
        }
        if points == 5 {
            checked += 1;
        }
    }
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (-5i64..6).prop_map(Term::int),
        (1i64..5, 2i64..5).prop_map(|(a, b)| Term::ratio(a, b)),
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Term::sym),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|a| Term::app("+", a)),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|a| Term::app("*", a)),
            (inner.clone(), -2i64..4).prop_map(|(a, k)| Term::app("^", vec![a, Term::int(k)])),
            inner.clone().prop_map(|a| Term::app("neg", vec![a])),
            inner.clone().prop_map(|a| Term::app("sin", vec![a])),
            (inner.clone(), inner).prop_map(|(a, b)| Term::app("eq", vec![a, b])),
        ]
    })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(term in arb_term()) {
        let once = normalize(&term);
        prop_assert_eq!(normalize(&once), once.clone());
        let reparsed = normalize(&parse_term(&once.to_string()).unwrap());
        prop_assert_eq!(reparsed, once);
    }

    #[test]
    fn normalize_preserves_value(term in arb_term(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let env = [("x", x), ("y", y), ("z", 0.5)];
        let is_eq = matches!(&term, Term::App(op, _) if op == "eq");
        if !is_eq {
            if let (Some(a), Some(b)) = (term.eval_f64(&env), normalize(&term).eval_f64(&env)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn matching_is_stable_under_renormalization(term in arb_term()) {
        let p = parse_pattern("X + Y").unwrap();
        let once = normalize(&term);
        prop_assert_eq!(match_term(&p, &term), match_term(&p, &once));
    }

    #[test]
    fn diagnosis_subsumes_solving(a in 1i64..6, b in -9i64..10, c in -9i64..10, d in 1i64..6) {
        prop_assume!(a != d && b != 0 && c != 0);
        let task = t(&format!("eq({a}x + {b}, {c} + {d}x)"));
        let pack = RulePack::linear_equations();
        let g = build_solution_graph(&task, pack, 12);
        let sol = g.solution().unwrap().clone();
        let root = Term::Const(BigRational::new((c - b).into(), (a - d).into()));
        prop_assert_eq!(&sol, &normalize(&Term::app("eq", vec![Term::sym("x"), root])));
        let paths = diagnose(&task, &sol, pack, 5).unwrap();
        prop_assert_eq!(paths[0].buggy_steps, 0);
    }
}
