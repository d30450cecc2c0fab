//! Default tokenizer: lowercase, whitespace split, punctuation stripped
//! from token edges. Deterministic and idempotent on its own output.

use alloc::string::String;
use alloc::vec::Vec;

/// Tokenize `text` into lowercase tokens. Empty input yields an empty
/// list; tokens that are pure punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_edge_punctuation_and_lowercases() {
        assert_eq!(tokenize("A cat sat."), ["a", "cat", "sat"]);
    }

    #[test]
    fn empty_text_gives_empty_list() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t ").is_empty());
    }

    #[test]
    fn question_token_count() {
        let toks = tokenize("Is there a place that is blue and liquid?");
        assert_eq!(toks.len(), 9);
        assert_eq!(toks.last().unwrap(), "liquid");
    }

    #[test]
    fn idempotent_on_joined_output() {
        let once = tokenize("What's in the Box?! (nothing)");
        let twice = tokenize(&once.join(" "));
        assert_eq!(once, twice);
    }

    #[test]
    fn interior_punctuation_kept() {
        assert_eq!(tokenize("what's"), ["what's"]);
    }
}
