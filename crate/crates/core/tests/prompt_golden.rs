//! Golden-file tests pinning the exact prompt template bytes for
//! Types 0-6. Regenerate with GOLDEN_WRITE=1 after an intentional
//! template change.

use std::fs;
use std::path::PathBuf;

use factrag_core::corpus::Fact;
use factrag_core::embed::VisualContext;
use factrag_core::prompt::{assemble_prompt, PromptKind};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn fixture_ctx() -> VisualContext {
    VisualContext {
        traditional_caption: Some("a photo of a dog and a ball".into()),
        dense_caption: Some("a dog near a red ball in the park".into()),
        region_captions: vec!["a dog on the left".into(), "a red ball on the right".into()],
        objects: vec!["dog".into(), "ball".into()],
        scene_graph: vec![("dog".into(), "near".into(), "ball".into())],
    }
}

fn fixture_facts() -> Vec<Fact> {
    vec![
        Fact::new("f1", "dogs like to play fetch", "OMCS").unwrap(),
        Fact::new("f2", "balls are round and bounce", "OMCS").unwrap(),
    ]
}

fn assemble(kind: PromptKind) -> String {
    let facts = fixture_facts();
    let refs: Vec<&Fact> = facts.iter().collect();
    let gold = if kind == PromptKind::Type0 { Some("ball") } else { None };
    assemble_prompt(kind, "what does the dog chase?", &fixture_ctx(), &refs, gold, "CRIC")
        .unwrap()
}

#[test]
fn prompt_templates_match_golden_files() {
    let kinds = [
        PromptKind::Type0,
        PromptKind::Type1,
        PromptKind::Type2,
        PromptKind::Type3,
        PromptKind::Type4,
        PromptKind::Type5,
        PromptKind::Type6,
    ];
    let write = std::env::var("GOLDEN_WRITE").is_ok();
    for kind in kinds {
        let got = assemble(kind);
        let path = golden_dir().join(format!("prompt_{}.txt", kind.to_string().to_lowercase()));
        if write {
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
        assert_eq!(got, want, "{kind} drifted from its golden template");
    }
}

#[test]
fn type5_minus_facts_block_equals_type6() {
    let t5 = assemble(PromptKind::Type5);
    let t6 = assemble(PromptKind::Type6);
    let stripped: Vec<&str> = t5
        .lines()
        .filter(|l| *l != "Retrieved Facts (RF):" && !l.starts_with("Fact: "))
        .collect();
    assert_eq!(stripped.join("\n"), t6);
}

#[test]
fn nli_dataset_extends_the_forbidden_clause() {
    let facts = fixture_facts();
    let refs: Vec<&Fact> = facts.iter().collect();
    let p = assemble_prompt(PromptKind::Type1, "q?", &fixture_ctx(), &refs, None, "e-SNLI-VE")
        .unwrap();
    assert!(p.ends_with(
        "Forbidden words: **\"image description\", \"captions\", \"entailment\", \"contradiction\"**."
    ));
}
