//! 50-case truncation suite. Expected token sequences were produced by
//! an independent implementation of the concatenate-then-truncate rule
//! and frozen into tests/golden/truncation_cases.json.

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use factrag_core::integrate::build_reader_input;
use factrag_core::tokenize::tokenize;

#[derive(Deserialize)]
struct Case {
    knowledge: String,
    question: String,
    budget: usize,
    expected_tokens: Vec<String>,
    expected_truncated: bool,
    note: String,
}

#[test]
fn truncation_golden_suite() {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/truncation_cases.json");
    let cases: Vec<Case> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(cases.len(), 50);
    for case in &cases {
        let out =
            build_reader_input(&case.knowledge, &case.question, "img://golden", case.budget, tokenize)
                .unwrap_or_else(|e| panic!("{}: {e}", case.note));
        assert_eq!(out.tokens, case.expected_tokens, "{}", case.note);
        assert_eq!(out.truncated, case.expected_truncated, "{}", case.note);
        assert!(out.tokens.len() <= case.budget, "{}", case.note);
        assert!(out.tokens.len() <= 128);
    }
}
