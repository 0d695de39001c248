use exr_core::plans::*;
use exr_core::pos::Pos;
use exr_core::sim::*;

const LOOP_CHOICE: &str = "read_case(DR) ; run(Eval) ; compare(DR) | read_case(DR) ; abstract(MDR) ; compare(DR)";
const EXTENDED: &str =
    "read(DR) ; infer_intent(MDR) ; count_manual(DR) ; conclude(DR) ; check_bounds(Eval)";

fn doc(src: &str) -> PlanDoc {
    parse_plan_doc(src, Pos::new(1, 1)).unwrap()
}

fn profile(name: &str) -> StudentProfile {
    let path = format!("{}/../../profiles/{name}", env!("CARGO_MANIFEST_DIR"));
    StudentProfile::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(src: &str, p: &StudentProfile, seed: u64, trials: u64) -> SimOutcome {
    simulate(&doc(src), p, VerbMap::builtin(), &Weights::builtin(), seed, trials)
}

fn only_choice(o: &SimOutcome) -> [u64; 2] {
    assert_eq!(o.branch_counts.len(), 1);
    *o.branch_counts.values().next().unwrap()
}

fn three_sigma(n: u64, p: f64) -> f64 {
    3.0 * (n as f64 * p * (1.0 - p)).sqrt()
}

// Both branches carry effort 2 + 5 + 3 = 10; preference scales it down.
fn left_probability(pref: [f64; 3], t: f64) -> f64 {
    let [eval, dr, mdr] = pref;
    let left = 10.0 * (1.0 - (dr + eval + dr) / 3.0);
    let right = 10.0 * (1.0 - (dr + mdr + dr) / 3.0);
    1.0 / (1.0 + ((left - right) / t).exp())
}

#[test]
fn expert_prefers_abstraction_novice_prefers_execution() {
    let e = run(LOOP_CHOICE, &profile("expert"), 1, 4000);
    let [l, r] = only_choice(&e);
    assert!(r > l, "expert {l}/{r}");
    assert_eq!(e.solved, e.trials);

    let n = run(LOOP_CHOICE, &profile("novice"), 1, 4000);
    let [l, r] = only_choice(&n);
    assert!(l > r, "novice {l}/{r}");
    assert!(n.misses.is_empty());
}

#[test]
fn branch_frequency_matches_softmax() {
    for (name, pref) in [("expert", [0.1, 0.3, 0.6]), ("novice", [0.6, 0.3, 0.1])] {
        let n = 20_000;
        let o = run(LOOP_CHOICE, &profile(name), 9, n);
        let p = left_probability(pref, 1.0);
        let [l, _] = only_choice(&o);
        let dev = (l as f64 - n as f64 * p).abs();
        assert!(dev <= three_sigma(n, p), "{name}: left {l}, expected {}", n as f64 * p);
    }
}

#[test]
fn temperature_flattens_choice() {
    let mut p = profile("expert");
    p.temperature = 1e6;
    let n = 20_000;
    let [l, _] = only_choice(&run(LOOP_CHOICE, &p, 3, n));
    assert!((l as f64 - n as f64 / 2.0).abs() <= three_sigma(n, 0.5));
}

#[test]
fn expert_slips_on_bounds_check() {
    let n = 10_000;
    let o = run(EXTENDED, &profile("expert"), 42, n);
    let site = Pos::new(1, 66);
    let misses = o.misses_at(site);
    assert!((misses as f64 - 3000.0).abs() <= three_sigma(n, 0.3), "{misses} {:?}", o.misses);
    assert_eq!(o.misses.values().sum::<u64>(), misses);
    assert_eq!(o.solved, n - misses);
}

#[test]
fn zero_slip_always_solves() {
    let mut p = profile("expert");
    p.slip.clear();
    let o = run(EXTENDED, &p, 5, 500);
    assert_eq!(o.solved, 500);
    assert!(o.misses.is_empty());
}

#[test]
fn generic_slip_applies_without_pattern_entry() {
    let mut p = profile("expert");
    p.slip.clear();
    p.slip.insert(SlipKey::Generic, 1.0);
    let o = run(EXTENDED, &p, 5, 200);
    assert_eq!(o.solved, 0);
    assert_eq!(o.misses_at(Pos::new(1, 66)), 200);
}

#[test]
fn knowledge_gap_escalates_to_miss() {
    let mut p = profile("novice");
    p.knowledge_level = exr_core::bloom::KnowledgeCategory::Factual;
    p.slip.clear();
    // compare is Conceptual, above a Factual student
    let o = run("read_case(DR) ; compare(DR)", &p, 0, 100);
    assert_eq!(o.solved, 0);
    assert_eq!(o.misses_at(Pos::new(1, 17)), 100);
}

#[test]
fn seeded_runs_are_reproducible() {
    let p = profile("expert");
    let a = run(EXTENDED, &p, 77, 3000);
    assert_eq!(a, run(EXTENDED, &p, 77, 3000));
    assert_ne!(a, run(EXTENDED, &p, 78, 3000));
    let b = run(LOOP_CHOICE, &p, 77, 3000);
    assert_eq!(b, run(LOOP_CHOICE, &p, 77, 3000));
}

#[test]
fn profile_parsing() {
    let p = StudentProfile::parse("level: Conceptual; prefer Eval=0.2 DR=0.5 MDR=0.3; slip P1=0.1 p2=0.2 generic=0.05").unwrap();
    assert_eq!(p.slip_for(&[PatternId::P1, PatternId::P2]), 0.2);
    assert_eq!(p.slip_for(&[PatternId::P3]), 0.05);
    assert_eq!(p.slip_for(&[]), 0.0);
    assert_eq!(p.temperature, 1.0);
    assert!(matches!(StudentProfile::parse("level: Factual; prefer Eval=0.5"), Err(ProfileError::PreferenceSum(_))));
    assert!(matches!(
        StudentProfile::parse("level: Factual; prefer DR=1; slip P3=1.5"),
        Err(ProfileError::Probability { .. })
    ));
    assert!(matches!(StudentProfile::parse("prefer DR=1"), Err(ProfileError::MissingLevel)));
    assert!(matches!(StudentProfile::parse("level: Factual\nprefer DR=1\nwobble 3"), Err(ProfileError::Syntax { line: 3, .. })));
}
