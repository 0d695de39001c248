use exr_core::bloom::{BloomCell, KnowledgeCategory, ProcessCategory};
use exr_core::finding::Severity;
use exr_core::minilang::Value;
use exr_core::plans::{VerbMap, Weights};
use exr_core::specdsl::*;
use proptest::prelude::*;

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn verdict(r: &ValidationReport, key: char) -> &Verdict {
    &r.options.iter().find(|o| o.key == key).unwrap().verdict
}

fn errors(r: &ValidationReport) -> usize {
    r.findings.iter().filter(|f| f.severity == Severity::Error).count()
}

#[test]
fn leeds_spec() {
    let s = parse_spec(&corpus("leeds-q2.exr")).unwrap();
    assert_eq!(s.options.len(), 4);
    assert_eq!(s.correct_option().unwrap().key, 'b');
    assert!(s.plan.is_some());
    let r = validate_spec(&s, 10_000);
    assert_eq!(verdict(&r, 'b'), &Verdict::Confirmed);
    assert_eq!(verdict(&r, 'a'), &Verdict::Refuted);
    assert_eq!(errors(&r), 0);
    assert_eq!(r.effect.unwrap().bindings["count"], Value::Int(2));
}

#[test]
fn leeds_with_wrong_key_reports_mismatch() {
    let src = corpus("leeds-q2.exr")
        .replace("expect count = 3", "expect count = 3 *")
        .replace("expect count = 2 *", "expect count = 2");
    let s = parse_spec(&src).unwrap();
    let r = validate_spec(&s, 10_000);
    assert!(r.findings.iter().any(|f| f.code == "CorrectOptionMismatch" && f.severity == Severity::Error));
    // option b now evaluates true while being a distractor
    assert!(r.findings.iter().any(|f| f.code == "DegenerateDistractor"));
}

#[test]
fn loop_output_spec() {
    let s = parse_spec(&corpus("loop-output.exr")).unwrap();
    assert_eq!(s.options.len(), 5);
    assert_eq!(s.correct_option().unwrap().key, 'c');
    let r = validate_spec(&s, 100);
    assert_eq!(verdict(&r, 'c'), &Verdict::Confirmed);
    for k in ['a', 'b', 'd', 'e'] {
        assert_eq!(verdict(&r, k), &Verdict::Refuted);
    }
    assert_eq!(r.effect.unwrap().stdout, "0 2 ");
}

#[test]
fn fill_in_spec() {
    let s = parse_spec(&corpus("maxpos.exr")).unwrap();
    assert_eq!(s.mode, AnswerMode::McqFill);
    let r = validate_spec(&s, 10_000);
    assert_eq!(errors(&r), 0, "{:?}", r.findings);
    assert_eq!(verdict(&r, 'd'), &Verdict::Confirmed);
    assert_eq!(verdict(&r, 'a'), &Verdict::Refuted);
    assert!(matches!(verdict(&r, 'b'), Verdict::EvaluationFailed { .. }));
}

#[test]
fn free_value_specs() {
    let s = parse_spec(&corpus("bindings.exr")).unwrap();
    assert_eq!(s.mode, AnswerMode::FreeValue);
    let r = validate_spec(&s, 100);
    assert!(r.answer.iter().all(|a| a.verdict == Verdict::Confirmed));
    let s = parse_spec(&corpus("getter.exr")).unwrap();
    assert!(s.program.is_none());
    let r = validate_spec(&s, 100);
    assert_eq!(r.answer[0].verdict, Verdict::Unverifiable);
    assert_eq!(r.findings[0].severity, Severity::Info);
}

#[test]
fn structural_errors() {
    let base = |opts: &str| format!("exercise \"t\" {{ question {{ ```\nint a = 1;\n``` }} mcq {{ {opts} }} }}");
    assert!(matches!(
        parse_spec(&base("a: \"1\" * b: \"2\" *")),
        Err(SpecError::MultipleCorrectOptions { .. })
    ));
    assert!(matches!(parse_spec(&base("a: \"1\" b: \"2\"")), Err(SpecError::MissingCorrectOption { .. })));
    assert!(matches!(
        parse_spec(&base("a: \"1\" * a: \"2\"")),
        Err(SpecError::DuplicateOptionKey { key: 'a', .. })
    ));
    assert!(matches!(parse_spec("exercise \"t\" { mcq }"), Err(SpecError::Parse { .. })));
    match parse_spec("exercise \"t\" {\n  question {\n    ```\n    int a = ;\n    ```\n  }\n}") {
        Err(SpecError::Code { pos, .. }) => assert_eq!((pos.line, pos.col), (4, 13)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn defaults_and_check_findings() {
    let s = parse_spec("exercise \"t\" { question { ```\nint a = 1;\n``` } answer: a = 1 }").unwrap();
    assert!(!s.target_declared);
    assert_eq!(s.target, BloomCell::new(ProcessCategory::Understand, KnowledgeCategory::Conceptual));
    let c = check_spec(&s, VerbMap::builtin(), &Weights::default(), 100);
    let codes: Vec<_> = c.findings.iter().map(|f| f.code.as_str()).collect();
    assert!(codes.contains(&"DefaultTarget"));
    assert!(codes.contains(&"MissingPlan"));
}

#[test]
fn leeds_check_reports_missing_path_and_discrepancy() {
    let s = parse_spec(&corpus("leeds-q2.exr")).unwrap();
    let c = check_spec(&s, VerbMap::builtin(), &Weights::default(), 10_000);
    let codes: Vec<_> = c.findings.iter().map(|f| f.code.as_str()).collect();
    assert!(codes.contains(&"MissingPath"));
    assert_eq!(codes.iter().filter(|c| **c == "BloomDiscrepancy").count(), 2);
    assert!(c.findings.iter().all(|f| f.severity <= Severity::Warning));
}

#[test]
fn corpus_round_trips() {
    for f in ["leeds-q2.exr", "bindings.exr", "maxpos.exr", "loop-output.exr", "getter.exr"] {
        let s = parse_spec(&corpus(f)).unwrap();
        let again = parse_spec(&render(&s)).unwrap();
        // leading comments are not preserved, so positions may shift
        assert_eq!(again.options, s.options, "{f}");
        assert_eq!(again.answer, s.answer, "{f}");
        assert_eq!(again.plan, s.plan, "{f}");
        assert_eq!((again.id.as_str(), again.target, &again.requires), (s.id.as_str(), s.target, &s.requires));
        assert_eq!(render(&again), render(&s));
        assert_eq!(parse_spec(&render(&again)).unwrap(), again);
    }
}

#[test]
fn validation_does_not_touch_spec() {
    let s = parse_spec(&corpus("loop-output.exr")).unwrap();
    let before = s.clone();
    let r1 = validate_spec(&s, 100);
    assert_eq!(r1, validate_spec(&s, 100));
    assert_eq!(s, before);
}

fn arb_facet() -> impl Strategy<Value = Facet> {
    prop_oneof![
        "[ -~]{0,8}".prop_map(|text| Facet::Stdout { text }),
        ("[a-z][a-z0-9]{0,4}", any::<i32>()).prop_map(|(name, v)| Facet::Binding {
            name: format!("v{name}"),
            value: Value::Int(v as i64)
        }),
        ("[a-z]{1,4}", prop::collection::vec(-50i64..50, 0..4)).prop_map(|(name, xs)| Facet::Binding {
            name: format!("v{name}"),
            value: Value::IntArray(xs)
        }),
    ]
}

fn arb_spec() -> impl Strategy<Value = String> {
    (
        "[a-z][a-z0-9-]{0,8}",
        prop::option::of((0u8..6, 0u8..4)),
        prop::collection::vec("[a-z]{1,6}", 0..3),
        prop::collection::vec(("[ -~&&[^\"\\\\]]{0,10}", prop::option::of(arb_facet()), prop::option::of("[a-z_]{1,8}")), 1..6),
        any::<prop::sample::Index>(),
        -100i64..100,
        prop::bool::ANY,
    )
        .prop_map(|(id, target, reqs, opts, correct, n, with_plan)| {
            let mut s = format!("exercise \"{id}\" {{\n");
            if let Some((p, k)) = target {
                let p = ProcessCategory::from_rank(p).unwrap();
                let k = KnowledgeCategory::from_rank(k).unwrap();
                s += &format!("target: {p} x {k}\n");
            }
            if !reqs.is_empty() {
                s += &format!("requires: {}\n", reqs.join(", "));
            }
            s += &format!("question {{ Count {{braces}}:\n```\nint q = {n};\nprint(q + \"}}\");\n```\n}}\n");
            s += "mcq {\n";
            let c = correct.index(opts.len());
            for (i, (label, facet, tag)) in opts.iter().enumerate() {
                s += &format!("{}: \"{label}\"", (b'a' + i as u8) as char);
                if let Some(f) = facet {
                    s += &format!(" expect {f}");
                }
                if let Some(t) = tag {
                    s += &format!(" tag {t}");
                }
                if i == c {
                    s += " *";
                }
                s += "\n";
            }
            s += "}\n";
            if with_plan {
                s += "plan { R => read(DR) ; run(E) . (R)* | compare(DR, \"q\") }\n";
            }
            s += "}\n";
            s
        })
}

proptest! {
    #[test]
    fn render_round_trip(src in arb_spec()) {
        let s = parse_spec(&src).unwrap();
        let again = parse_spec(&render(&s)).unwrap();
        prop_assert_eq!(&again, &s);
        // zero errors implies exactly one option matching the evaluation
        let r = validate_spec(&s, 100);
        if r.findings.iter().all(|f| f.severity != Severity::Error) {
            prop_assert_eq!(r.options.iter().filter(|o| o.verdict == Verdict::Confirmed).count(), 1);
        }
    }

    #[test]
    fn parser_is_total(src in "\\PC{0,80}") {
        let _ = parse_spec(&src);
    }
}
