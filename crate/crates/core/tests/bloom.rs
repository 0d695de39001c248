use exr_core::bloom::*;
use proptest::prelude::*;
use KnowledgeCategory::*;
use ProcessCategory::*;

fn cell(text: &str) -> BloomCell {
    classify_statement(text, ClueTable::builtin()).unwrap()
}

#[test]
fn distinguish_interpreter_compiler() {
    let n = normalize_statement(
        "To be able to distinguish between an interpreter and a compiler",
        ClueTable::builtin(),
    )
    .unwrap();
    assert_eq!(n.verb, "distinguish");
    assert_eq!(n.np, ["interpreter", "compiler"]);
    assert_eq!(classify(&n.verb, &n.np, ClueTable::builtin()).unwrap(), BloomCell::new(Analyze, Conceptual));
}

#[test]
fn taxonomy_table_examples() {
    let n = normalize_statement("List primitive data types in a language", ClueTable::builtin()).unwrap();
    assert_eq!(n.verb, "list");
    assert_eq!(n.np, ["primitive-data-type", "language"]);
    assert_eq!(cell("List primitive data types in a language"), BloomCell::new(Remember, Factual));
    assert_eq!(cell("Decompose a structured concept in its parts"), BloomCell::new(Analyze, Conceptual));
    assert_eq!(cell("How to implement a sort algorithm"), BloomCell::new(Understand, Procedural));
    assert_eq!(cell("Criticize learning programming methodology"), BloomCell::new(Evaluate, Metacognitive));
}

#[test]
fn empty_statement_cannot_normalize() {
    assert!(matches!(
        normalize_statement("", ClueTable::builtin()),
        Err(BloomError::CannotNormalize(_))
    ));
}

#[test]
fn unclassifiable_sides() {
    let t = ClueTable::builtin();
    let np = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    assert_eq!(classify("ponder", &np(&["compiler"]), t), Err(BloomError::Unclassifiable(MissingSide::Verb)));
    assert_eq!(classify("list", &np(&["widget"]), t), Err(BloomError::Unclassifiable(MissingSide::Noun)));
    assert_eq!(classify("ponder", &np(&["widget"]), t), Err(BloomError::Unclassifiable(MissingSide::Both)));
}

#[test]
fn dynamic_escalation() {
    let s = BloomCell::new(Apply, Procedural);
    assert_eq!(dynamic_cell(s, Conceptual), BloomCell::new(Create, Procedural));
    assert_eq!(dynamic_cell(s, Procedural), s);
    let low = BloomCell::new(Remember, Factual);
    assert_eq!(dynamic_cell(low, Factual), low);
}

#[test]
fn dynamic_cell_properties() {
    for c in BloomCell::all() {
        for k in KnowledgeCategory::ALL {
            let d = dynamic_cell(c, k);
            assert!(c.le(d));
            assert_eq!(dynamic_cell(d, k), d);
        }
    }
}

#[test]
fn course_levels_on_all_cells() {
    for c in BloomCell::all() {
        // pairs of adjacent process columns share a level
        let expected = match c.process.rank() / 2 {
            0 => CourseLevel::ReadingUnderstanding,
            1 => CourseLevel::WritingSmallFragments,
            _ => CourseLevel::WritingNontrivial,
        };
        assert_eq!(course_level(c), expected, "{c}");
    }
    assert_eq!(course_level(BloomCell::new(Understand, Conceptual)), CourseLevel::ReadingUnderstanding);
    assert_eq!(course_level(BloomCell::new(Analyze, Procedural)), CourseLevel::WritingSmallFragments);
    assert_eq!(course_level(BloomCell::new(Create, Metacognitive)), CourseLevel::WritingNontrivial);
}

#[test]
fn knowledge_groups() {
    assert_eq!(knowledge_group(Factual), KnowledgeGroup::Behavioral);
    assert_eq!(knowledge_group(Conceptual), KnowledgeGroup::Behavioral);
    assert_eq!(knowledge_group(Procedural), KnowledgeGroup::Implementation);
    assert_eq!(knowledge_group(Metacognitive), KnowledgeGroup::Enhancement);
}

#[test]
fn clue_file_errors() {
    assert!(matches!(ClueTable::parse("verb x Analyze"), Err(BloomError::Syntax { line: 1, .. })));
    assert!(ClueTable::parse("noun x -> Wisdom").is_err());
    let t = ClueTable::parse("# c\nverb Spot -> analyze\n").unwrap();
    assert_eq!(t.verb("spot"), Some(Analyze));
}

const STATEMENTS: &[&str] = &[
    "List primitive data types in a language",
    "How to implement a sort algorithm",
    "Criticize learning programming methodology",
    "Decompose a structured concept in its parts",
    "distinguish between an interpreter and a compiler",
    "explain the widget of a gadget",
    "ponder the compiler",
    "design a loop",
];

proptest! {
    #[test]
    fn extension_is_monotone(extra in prop::collection::vec(("[a-z]{3,8}", 0u8..6, 0u8..4, any::<bool>()), 0..10)) {
        let base = ClueTable::builtin();
        let mut ext = base.clone();
        for (w, p, k, is_verb) in &extra {
            if *is_verb {
                if base.verb(w).is_none() { ext.insert_verb(w, ProcessCategory::from_rank(*p).unwrap()); }
            } else if base.noun(w).is_none() {
                ext.insert_noun(w, KnowledgeCategory::from_rank(*k).unwrap());
            }
        }
        for s in STATEMENTS {
            let Ok(n) = normalize_statement(s, base) else { continue };
            if let Ok(c) = classify(&n.verb, &n.np, base) {
                prop_assert_eq!(classify(&n.verb, &n.np, &ext), Ok(c));
            }
        }
    }
}
