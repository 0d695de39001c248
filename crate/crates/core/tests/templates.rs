use exr_core::finding::Severity;
use exr_core::minilang::run_source;
use exr_core::specdsl::{validate_spec, AnswerMode, Facet, Verdict};
use exr_core::templates::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LOOP_BODY: &str = "for(int i=0;i<=3;i+=2) System.out.print(i+\" \");";

fn bind(pairs: &[(&str, &str)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn loop_bindings() -> Bindings {
    bind(&[("init", "0"), ("test", "<="), ("limit", "3"), ("assign", "+="), ("step", "2")])
}

#[test]
fn gen_body_reproduces_the_loop() {
    let pack = TemplatePack::builtin();
    assert_eq!(pack.expand_call("genBody(0, \"<=\", 3, \"+=\", 2)").unwrap(), LOOP_BODY);
    assert_eq!(pack.expand(pack.get("genBody").unwrap(), &loop_bindings()).unwrap(), LOOP_BODY);
    assert_eq!(run_source(LOOP_BODY, 100).unwrap().stdout, "0 2 ");
}

#[test]
fn case_c_uses_a_behavioural_limit() {
    let pack = TemplatePack::builtin();
    let text = pack.expand(pack.get("caseC").unwrap(), &loop_bindings()).unwrap();
    // limit 3 - step 2 = 1 changes the output, so it is used
    assert_eq!(text, "c) for(int i=0;i<=1;i+=2) System.out.print(i+\" \");");
    assert_eq!(run_source(&text[3..], 100).unwrap().stdout, "0 ");
}

#[test]
fn buggy_limit_falls_back_to_larger_limit() {
    // limit 2 - 2 = 0 prints "0 " like limit 2 does not; limit 4 with < prints "0 2 " like limit 3
    let b = bind(&[("init", "0"), ("test", "<"), ("limit", "3"), ("assign", "+="), ("step", "2")]);
    let t = transform("buggy_limit").unwrap();
    let out = t.apply("3", Some("limit"), &b, None).unwrap();
    let run = |l: &str| run_source(&format!("for(int i=0;i<{l};i+=2) System.out.print(i+\" \");"), 100).unwrap().stdout;
    assert_ne!(run(&out), run("3"));
    let b = bind(&[("init", "0"), ("test", "<"), ("limit", "4"), ("assign", "+="), ("step", "1")]);
    assert_eq!(t.apply("4", Some("limit"), &b, None).unwrap(), "3");
}

#[test]
fn transforms_always_change_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in TRANSFORMS.iter() {
        let v = if t.role == Role::Operator { "<=" } else { "2" };
        assert_ne!(t.apply(v, None, &loop_bindings(), None).unwrap(), v);
        for _ in 0..50 {
            assert_ne!(t.apply(v, None, &loop_bindings(), Some(&mut rng)).unwrap(), v);
        }
    }
}

#[test]
fn loop_instance() {
    let pack = TemplatePack::builtin();
    let rule = pack.get("loopOutput").unwrap();
    let spec = instantiate_exercise(pack, rule, &loop_bindings(), 1, 1000).unwrap();
    let correct = spec.correct_option().unwrap();
    assert_eq!(correct.expect, Some(Facet::Stdout { text: "0 2 ".into() }));
    let limit = spec.options.iter().find(|o| o.distractor_tag.as_deref() == Some("buggy_limit")).unwrap();
    let Some(Facet::Stdout { text }) = &limit.expect else { panic!() };
    let body = LOOP_BODY.replace("i<=3", "i<=1");
    assert_eq!(text, &run_source(&body, 100).unwrap().stdout);
    assert_eq!(spec.provenance.as_ref().unwrap().seed, 1);
    assert_eq!(spec, instantiate_exercise(pack, rule, &loop_bindings(), 1, 1000).unwrap());
}

fn random_loop(rng: &mut ChaCha8Rng) -> Bindings {
    let init: i64 = rng.random_range(-3..5);
    let step: i64 = rng.random_range(1..4);
    let span: i64 = rng.random_range(1..9);
    let up = rng.random_bool(0.5);
    let (test, limit, assign) = if up {
        (["<", "<="][rng.random_range(0..2)], init + span, "+=")
    } else {
        ([">", ">="][rng.random_range(0..2)], init - span, "-=")
    };
    bind(&[
        ("init", &init.to_string()),
        ("test", test),
        ("limit", &limit.to_string()),
        ("assign", assign),
        ("step", &step.to_string()),
    ])
}

#[test]
fn hundred_generated_specs_validate() {
    let pack = TemplatePack::builtin();
    let rule = pack.get("loopOutput").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for seed in 0..100u64 {
        let b = random_loop(&mut rng);
        let spec = instantiate_exercise(pack, rule, &b, seed, 10_000).unwrap_or_else(|e| panic!("{b:?}: {e}"));
        let report = validate_spec(&spec, 10_000);
        assert!(report.findings.iter().all(|f| f.severity != Severity::Error), "{b:?}: {:?}", report.findings);
        for o in &report.options {
            let want = if o.correct { Verdict::Confirmed } else { Verdict::Refuted };
            assert_eq!(o.verdict, want, "{b:?} option {}", o.key);
        }
        let mut labels: Vec<_> = spec.options.iter().map(|o| &o.label).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), spec.options.len());
    }
}

#[test]
fn getter_is_parametric() {
    let pack = TemplatePack::builtin();
    let rule = pack.get("getter").unwrap();
    let spec = instantiate_exercise(pack, rule, &bind(&[("field", "x"), ("type", "int")]), 0, 100).unwrap();
    assert_eq!(spec.mode, AnswerMode::FreeValue);
    assert_eq!(spec.answer, vec![Facet::Text { text: "public int getX(){return x;}".into() }]);
    let spec = instantiate_exercise(pack, rule, &bind(&[("field", "size"), ("type", "long")]), 0, 100).unwrap();
    assert_eq!(spec.answer, vec![Facet::Text { text: "public long getSize(){return size;}".into() }]);
    assert!(spec.question.contains("private long size;"));
}

#[test]
fn expansion_errors() {
    assert_eq!(TemplatePack::parse("#e() =>\n#end").unwrap().expand_call("e()").unwrap(), "");
    assert!(matches!(TemplatePack::parse("#a(x) => $y #end"), Err(TemplateError::UnboundParam(p)) if p == "y"));
    assert!(matches!(TemplatePack::parse("#a(x) => {b(x)} #end"), Err(TemplateError::UnknownRule(r)) if r == "b"));
    assert!(matches!(
        TemplatePack::parse("#a(x) => {b(x)} #end\n#b(y) => {a(y)} #end"),
        Err(TemplateError::CycleDetected(_))
    ));
    assert!(matches!(TemplatePack::parse("#a(x) => x"), Err(TemplateError::Syntax { .. })));
    let pack = TemplatePack::builtin();
    let rule = pack.get("genBody").unwrap();
    assert!(matches!(pack.expand(rule, &bind(&[("init", "0")])), Err(TemplateError::UnboundParam(_))));
    assert!(matches!(instantiate_exercise(pack, rule, &loop_bindings(), 0, 10), Err(TemplateError::GenerationFailed(_))));
    let p = TemplatePack::parse("#a(x) => cost: $$$x {literal} {return x;} #end").unwrap();
    assert_eq!(p.expand_call("a(5)").unwrap(), "cost: $5 {literal} {return x;}");
}
