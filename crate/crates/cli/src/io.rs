//! JSONL corpus and record files: one JSON object per line, UTF-8.
//! Loading reports line numbers; saving writes the canonical field
//! order so save(load(f)) is byte-identical for canonical input.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use factrag_core::corpus::{Corpus, EvalRecord, Fact};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactLine {
    id: String,
    text: String,
    source: String,
}

/// Load a fact corpus, naming the offending line on error and both
/// lines on a duplicate id.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut corpus = Corpus::new(&name);
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.with_context(|| format!("read line {lineno}"))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FactLine = serde_json::from_str(&line)
            .with_context(|| format!("malformed fact at line {lineno}"))?;
        if let Some(first) = seen.get(&parsed.id) {
            bail!("duplicate id {:?} at lines {first},{lineno}", parsed.id);
        }
        seen.insert(parsed.id.clone(), lineno);
        let fact = Fact::new(&parsed.id, &parsed.text, &parsed.source)
            .map_err(|e| anyhow::anyhow!("line {lineno}: {e}"))?;
        corpus.push(fact).map_err(|e| anyhow::anyhow!("line {lineno}: {e}"))?;
    }
    Ok(corpus)
}

/// Write the corpus in canonical JSONL form (field order id, text,
/// source; one fact per line; trailing newline).
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for fact in corpus.iter() {
        let line = serde_json::to_string(&FactLine {
            id: fact.id.clone(),
            text: fact.text.clone(),
            source: fact.source.clone(),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Load evaluation records with schema validation.
pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.with_context(|| format!("read line {lineno}"))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord = serde_json::from_str(&line)
            .with_context(|| format!("malformed record at line {lineno}"))?;
        if let Some(first) = seen.get(&rec.id) {
            bail!("duplicate id {:?} at lines {first},{lineno}", rec.id);
        }
        seen.insert(rec.id.clone(), lineno);
        rec.validate().map_err(|e| anyhow::anyhow!("line {lineno}: {e}"))?;
        records.push(rec);
    }
    Ok(records)
}

/// Load one JSON value per line.
pub fn load_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("malformed line {}", lineno + 1))?,
        );
    }
    Ok(out)
}

/// Write one JSON value per line.
pub fn save_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for item in items {
        writeln!(w, "{}", serde_json::to_string(item)?)?;
    }
    Ok(())
}
