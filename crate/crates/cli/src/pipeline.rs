//! The per-record answer chain: caption + detect, query building,
//! retrieval, prompt assembly, explanation, filtering, reader input,
//! and answering. Supports sequential or concurrent stage execution
//! and record-level worker parallelism with input-ordered output.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use factrag_core::corpus::{Corpus, EvalRecord};
use factrag_core::integrate::{build_k_fact_input, build_reader_input, majority_vote, Prediction};
use factrag_core::prompt::{assemble_prompt, filter_output, FilterOutcome, PromptKind};
use factrag_core::retrieval::{
    build_query, search_topk, search_topk_late, IndexMode, RetrievalHit, VectorIndex,
};
use factrag_core::tokenize::tokenize;

use crate::clients::ClientSet;
use crate::config::PipelineConfig;

/// Everything produced for one record, serialized one line per record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordOutput {
    pub id: String,
    pub query: String,
    pub hits: Vec<RetrievalHit>,
    pub explanation: Option<String>,
    /// Forbidden word that caused the explanation to be dropped, if any.
    pub filtered_word: Option<String>,
    pub reader_text: String,
    pub truncated: bool,
    pub prediction: Prediction,
}

/// Wall-clock milliseconds per stage, summed over records.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTiming {
    pub caption_ms: f64,
    pub detect_ms: f64,
    pub retrieve_ms: f64,
    pub explain_ms: f64,
    pub integrate_ms: f64,
    pub answer_ms: f64,
    pub total_ms: f64,
}

impl StageTiming {
    pub fn stage_sum_ms(&self) -> f64 {
        self.caption_ms
            + self.detect_ms
            + self.retrieve_ms
            + self.explain_ms
            + self.integrate_ms
            + self.answer_ms
    }

    fn add(&mut self, other: &StageTiming) {
        self.caption_ms += other.caption_ms;
        self.detect_ms += other.detect_ms;
        self.retrieve_ms += other.retrieve_ms;
        self.explain_ms += other.explain_ms;
        self.integrate_ms += other.integrate_ms;
        self.answer_ms += other.answer_ms;
        self.total_ms += other.total_ms;
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Process one record through the full chain. With
/// `concurrent_stages`, caption and detection run on separate threads.
pub fn run_record(
    record: &EvalRecord,
    corpus: &Corpus,
    index: &VectorIndex,
    clients: &ClientSet,
    cfg: &PipelineConfig,
    concurrent_stages: bool,
    vote: bool,
) -> Result<(RecordOutput, StageTiming)> {
    let mut timing = StageTiming::default();
    let total_start = Instant::now();

    // visual context
    let (mut ctx, objects) = if concurrent_stages {
        let captioner = Arc::clone(&clients.captioner);
        let detector = Arc::clone(&clients.detector);
        let image = record.image_ref.clone();
        let image2 = record.image_ref.clone();
        let t = Instant::now();
        let cap_handle = std::thread::spawn(move || captioner.caption(&image));
        let det_handle = std::thread::spawn(move || detector.detect_objects(&image2));
        let ctx = cap_handle
            .join()
            .map_err(|_| anyhow!("caption thread panicked"))?
            .map_err(|e| anyhow!("caption: {e}"))?;
        let objects = det_handle
            .join()
            .map_err(|_| anyhow!("detect thread panicked"))?
            .map_err(|e| anyhow!("detect: {e}"))?;
        // overlapped: charge the wall time to both stages
        let elapsed = ms(t);
        timing.caption_ms += elapsed;
        timing.detect_ms += elapsed;
        (ctx, objects)
    } else {
        let t = Instant::now();
        let ctx = clients.captioner.caption(&record.image_ref).map_err(|e| anyhow!("caption: {e}"))?;
        timing.caption_ms += ms(t);
        let t = Instant::now();
        let objects =
            clients.detector.detect_objects(&record.image_ref).map_err(|e| anyhow!("detect: {e}"))?;
        timing.detect_ms += ms(t);
        (ctx, objects)
    };
    if !objects.is_empty() {
        ctx.objects = objects;
    }

    // retrieval
    let t = Instant::now();
    let query = build_query(cfg.retrieval.query_variant, &record.question, &ctx)
        .map_err(|e| anyhow!("record {}: {e}", record.id))?;
    let embedder = clients.embedder.as_ref();
    let hits = match cfg.retrieval.mode {
        IndexMode::Single => search_topk(index, embedder, &query, cfg.retrieval.k),
        IndexMode::Late => search_topk_late(index, embedder, &query, cfg.retrieval.k),
    }
    .map_err(|e| anyhow!("search: {e}"))?;
    timing.retrieve_ms += ms(t);

    let facts: Vec<&factrag_core::corpus::Fact> = hits
        .iter()
        .map(|h| {
            corpus
                .by_id(&h.fact_id)
                .ok_or_else(|| anyhow!("hit {} not in corpus", h.fact_id))
        })
        .collect::<Result<_>>()?;

    // explanation
    let t = Instant::now();
    let raw_explanation = if cfg.prompt.kind == PromptKind::Type7 {
        // client-side kind: the generation service owns the template,
        // so it receives only the image reference
        clients.explainer.explain(&record.image_ref).map_err(|e| anyhow!("explain: {e}"))?
    } else {
        let gold = if cfg.prompt.kind == PromptKind::Type0 {
            Some(record.gold_answer.as_str())
        } else {
            None
        };
        let prompt = assemble_prompt(cfg.prompt.kind, &record.question, &ctx, &facts, gold, &cfg.dataset)
            .map_err(|e| anyhow!("record {}: prompt: {e}", record.id))?;
        clients.explainer.explain(&prompt).map_err(|e| anyhow!("explain: {e}"))?
    };
    let (explanation, filtered_word) =
        match filter_output(&raw_explanation, &cfg.dataset, cfg.prompt.kind) {
            FilterOutcome::Accepted(e) => (Some(e.text), None),
            FilterOutcome::Rejected { word } => (None, Some(word)),
        };
    timing.explain_ms += ms(t);

    // reader input: explanation if accepted, otherwise retrieved facts
    let t = Instant::now();
    let fact_texts: Vec<&str> = facts.iter().map(|f| f.text.as_str()).collect();
    let reader = match &explanation {
        Some(text) => build_reader_input(
            text,
            &record.question,
            &record.image_ref,
            cfg.prompt.token_budget,
            tokenize,
        ),
        None => build_k_fact_input(
            &fact_texts,
            &record.question,
            &record.image_ref,
            cfg.prompt.token_budget,
            tokenize,
        ),
    }
    .map_err(|e| anyhow!("record {}: {e}", record.id))?;
    timing.integrate_ms += ms(t);

    // answer
    let t = Instant::now();
    let prediction = if vote {
        let mut votes = Vec::with_capacity(facts.len());
        for (rank, text) in fact_texts.iter().enumerate() {
            let input = build_k_fact_input(
                &[text],
                &record.question,
                &record.image_ref,
                cfg.prompt.token_budget,
                tokenize,
            )
            .map_err(|e| anyhow!("record {}: {e}", record.id))?;
            let (label, scores) = clients
                .answerer
                .answer(&input.text, &record.image_ref, &record.options)
                .map_err(|e| anyhow!("answer: {e}"))?;
            votes.push(Prediction { label, scores, provenance: format!("fact-rank-{}", rank + 1) });
        }
        majority_vote(&votes).map_err(|e| anyhow!("record {}: {e}", record.id))?
    } else {
        let (label, scores) = clients
            .answerer
            .answer(&reader.text, &record.image_ref, &record.options)
            .map_err(|e| anyhow!("answer: {e}"))?;
        let provenance = if explanation.is_some() { "explanation" } else { "facts" };
        Prediction { label, scores, provenance: provenance.to_string() }
    };
    timing.answer_ms += ms(t);
    timing.total_ms = ms(total_start);

    Ok((
        RecordOutput {
            id: record.id.clone(),
            query,
            hits,
            explanation,
            filtered_word,
            reader_text: reader.text,
            truncated: reader.truncated,
            prediction,
        },
        timing,
    ))
}

/// Run every record, `workers` at a time, preserving input order in
/// the output. Timing is summed over records.
pub fn run_records(
    records: &[EvalRecord],
    corpus: &Corpus,
    index: &VectorIndex,
    clients: &ClientSet,
    cfg: &PipelineConfig,
    concurrent_stages: bool,
    vote: bool,
) -> Result<(Vec<RecordOutput>, StageTiming)> {
    let workers = cfg.workers.max(1);
    let mut outputs: Vec<Option<RecordOutput>> = (0..records.len()).map(|_| None).collect();
    let mut total = StageTiming::default();

    if workers == 1 {
        for (i, record) in records.iter().enumerate() {
            let (out, timing) =
                run_record(record, corpus, index, clients, cfg, concurrent_stages, vote)
                    .with_context(|| format!("record {}", record.id))?;
            total.add(&timing);
            outputs[i] = Some(out);
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    let next = &next;
                    scope.spawn(move || {
                        let mut local = Vec::new();
                        loop {
                            let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            if i >= records.len() {
                                break;
                            }
                            let res = run_record(
                                &records[i],
                                corpus,
                                index,
                                clients,
                                cfg,
                                concurrent_stages,
                                vote,
                            );
                            local.push((i, res));
                        }
                        local
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        });
        for (i, res) in results {
            let (out, timing) =
                res.with_context(|| format!("record {}", records[i].id))?;
            total.add(&timing);
            outputs[i] = Some(out);
        }
    }

    Ok((outputs.into_iter().map(|o| o.unwrap()).collect(), total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use factrag_core::corpus::Fact;
    use factrag_core::retrieval::index_corpus;

    fn fixture() -> (Corpus, Vec<EvalRecord>, PipelineConfig) {
        let mut corpus = Corpus::new("t");
        let texts = [
            "a dog is an animal that can play with a ball",
            "a ball is round and can bounce",
            "parks are public places with grass and trees",
            "people walk dogs in the park",
            "animals need food and water to live",
            "a frisbee is a toy that flies",
        ];
        for (i, t) in texts.iter().enumerate() {
            corpus.push(Fact::new(&format!("f{i}"), t, "OMCS").unwrap()).unwrap();
        }
        let records: Vec<EvalRecord> = (0..6)
            .map(|i| EvalRecord {
                id: format!("r{i}"),
                image_ref: format!("img://{i}"),
                question: format!("what is the animal {i} doing"),
                options: vec!["playing".into(), "sleeping".into()],
                gold_answer: "playing".into(),
                gold_explanation: None,
                dataset: "CRIC".into(),
            })
            .collect();
        let cfg = PipelineConfig::default();
        (corpus, records, cfg)
    }

    #[test]
    fn sequential_run_produces_one_output_per_record() {
        let (corpus, records, cfg) = fixture();
        let clients = ClientSet::from_config(&cfg);
        let index =
            index_corpus(&corpus, clients.embedder.as_ref(), cfg.retrieval.mode, cfg.seed).unwrap();
        let (outs, timing) =
            run_records(&records, &corpus, &index, &clients, &cfg, false, false).unwrap();
        assert_eq!(outs.len(), records.len());
        for (out, rec) in outs.iter().zip(&records) {
            assert_eq!(out.id, rec.id);
            assert_eq!(out.hits.len(), cfg.retrieval.k);
            assert!(rec.options.contains(&out.prediction.label));
        }
        assert!(timing.total_ms > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let (corpus, records, mut cfg) = fixture();
        let clients = ClientSet::from_config(&cfg);
        let index =
            index_corpus(&corpus, clients.embedder.as_ref(), cfg.retrieval.mode, cfg.seed).unwrap();
        let (a, _) = run_records(&records, &corpus, &index, &clients, &cfg, false, false).unwrap();
        cfg.workers = 4;
        let (b, _) = run_records(&records, &corpus, &index, &clients, &cfg, false, false).unwrap();
        let aj: Vec<String> = a.iter().map(|o| serde_json::to_string(o).unwrap()).collect();
        let bj: Vec<String> = b.iter().map(|o| serde_json::to_string(o).unwrap()).collect();
        assert_eq!(aj, bj);
    }

    #[test]
    fn concurrent_stages_match_sequential_output() {
        let (corpus, records, cfg) = fixture();
        let clients = ClientSet::from_config(&cfg);
        let index =
            index_corpus(&corpus, clients.embedder.as_ref(), cfg.retrieval.mode, cfg.seed).unwrap();
        let (a, _) = run_records(&records, &corpus, &index, &clients, &cfg, false, false).unwrap();
        let (b, _) = run_records(&records, &corpus, &index, &clients, &cfg, true, false).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn vote_mode_uses_majority_provenance() {
        let (corpus, records, cfg) = fixture();
        let clients = ClientSet::from_config(&cfg);
        let index =
            index_corpus(&corpus, clients.embedder.as_ref(), cfg.retrieval.mode, cfg.seed).unwrap();
        let (out, _) =
            run_record(&records[0], &corpus, &index, &clients, &cfg, false, true).unwrap();
        assert_eq!(out.prediction.provenance, format!("majority({})", cfg.retrieval.k));
    }
}
