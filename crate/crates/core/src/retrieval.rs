//! Query assembly, corpus indexing, and top-k retrieval.
//!
//! Two scoring modes: single-vector cosine over unit embeddings, and
//! late interaction (MaxSim) over per-token embeddings. Search is an
//! exact scan in both modes; `brute_force_topk` is the independent
//! oracle that re-embeds the corpus and full-sorts every score.
//!
//! Ties are broken by ascending fact id so ranks are a total order.

use alloc::collections::BinaryHeap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::client::{ClientError, Embedder};
use crate::corpus::Corpus;
use crate::embed::{dot_f64, TokenEmbeddings, VisualContext};

#[derive(Debug, Clone, PartialEq)]
pub enum RetrievalError {
    MissingContext { field: &'static str },
    EmptyCorpus,
    EmptyQuery,
    ZeroK,
    EmptyTokenSet,
    DimDrift { expected: usize, got: usize },
    Client(ClientError),
}

impl fmt::Display for RetrievalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RetrievalError::MissingContext { field } => {
                write!(f, "query variant requires visual context field `{field}`")
            }
            RetrievalError::EmptyCorpus => write!(f, "corpus is empty"),
            RetrievalError::EmptyQuery => write!(f, "query is empty"),
            RetrievalError::ZeroK => write!(f, "k must be >= 1"),
            RetrievalError::EmptyTokenSet => write!(f, "token embedding set is empty"),
            RetrievalError::DimDrift { expected, got } => {
                write!(f, "embedding dim drifted mid-build: expected {expected}, got {got}")
            }
            RetrievalError::Client(e) => write!(f, "{e}"),
        }
    }
}

impl From<ClientError> for RetrievalError {
    fn from(e: ClientError) -> Self {
        RetrievalError::Client(e)
    }
}

/// How the retrieval query is assembled from the question and the
/// visual context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum QueryVariant {
    /// Question only.
    Q,
    /// Caption prepended to the question.
    CQ,
    /// Detected objects prepended to the question.
    OQ,
    /// Scene-graph triplets prepended to the question.
    SgQ,
    /// Caption, objects, and scene graph prepended to the question.
    AllQ,
}

fn render_objects(objects: &[String]) -> String {
    objects.join(", ")
}

fn render_scene_graph(sg: &[(String, String, String)]) -> String {
    let parts: Vec<String> =
        sg.iter().map(|(s, r, o)| alloc::format!("{s} {r} {o}.")).collect();
    parts.join(" ")
}

/// Assemble the retrieval query string for `variant`.
pub fn build_query(
    variant: QueryVariant,
    question: &str,
    ctx: &VisualContext,
) -> Result<String, RetrievalError> {
    let caption = || {
        ctx.traditional_caption
            .as_deref()
            .ok_or(RetrievalError::MissingContext { field: "traditional_caption" })
    };
    let objects = || {
        if ctx.objects.is_empty() {
            Err(RetrievalError::MissingContext { field: "objects" })
        } else {
            Ok(render_objects(&ctx.objects))
        }
    };
    let scene_graph = || {
        if ctx.scene_graph.is_empty() {
            Err(RetrievalError::MissingContext { field: "scene_graph" })
        } else {
            Ok(render_scene_graph(&ctx.scene_graph))
        }
    };
    Ok(match variant {
        QueryVariant::Q => question.to_string(),
        QueryVariant::CQ => alloc::format!("{} {question}", caption()?),
        QueryVariant::OQ => alloc::format!("{} {question}", objects()?),
        QueryVariant::SgQ => alloc::format!("{} {question}", scene_graph()?),
        QueryVariant::AllQ => {
            alloc::format!("{} {} {} {question}", caption()?, objects()?, scene_graph()?)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IndexMode {
    Single,
    Late,
}

/// One retrieved fact with its relevance score and 1-based rank.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RetrievalHit {
    pub fact_id: String,
    pub score: f64,
    pub rank: usize,
}

/// A frozen embedding index over a corpus. Rows are unit f32 vectors;
/// in late mode each fact owns a contiguous run of token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    mode: IndexMode,
    dim: usize,
    seed: u64,
    ids: Vec<String>,
    rows: Vec<f32>,
    /// Per-fact start offsets into `rows` (in vectors); length = count + 1.
    offsets: Vec<u32>,
}

impl VectorIndex {
    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[f32] {
        &self.rows
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    /// Reconstruct an index from snapshot parts.
    pub fn from_parts(
        mode: IndexMode,
        dim: usize,
        seed: u64,
        ids: Vec<String>,
        rows: Vec<f32>,
        offsets: Vec<u32>,
    ) -> Result<Self, RetrievalError> {
        if offsets.len() != ids.len() + 1 {
            return Err(RetrievalError::DimDrift { expected: ids.len() + 1, got: offsets.len() });
        }
        let vectors = *offsets.last().unwrap_or(&0) as usize;
        if rows.len() != vectors * dim {
            return Err(RetrievalError::DimDrift { expected: vectors * dim, got: rows.len() });
        }
        Ok(VectorIndex { mode, dim, seed, ids, rows, offsets })
    }

    fn fact_rows(&self, i: usize) -> &[f32] {
        let lo = self.offsets[i] as usize * self.dim;
        let hi = self.offsets[i + 1] as usize * self.dim;
        &self.rows[lo..hi]
    }
}

/// Embed every fact and freeze the index.
pub fn index_corpus(
    corpus: &Corpus,
    embedder: &dyn Embedder,
    mode: IndexMode,
    seed: u64,
) -> Result<VectorIndex, RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let dim = embedder.dim();
    let mut ids = Vec::with_capacity(corpus.len());
    let mut rows = Vec::new();
    let mut offsets = Vec::with_capacity(corpus.len() + 1);
    offsets.push(0u32);
    for fact in corpus.iter() {
        match mode {
            IndexMode::Single => {
                let v = embedder.embed_text(&fact.text)?;
                if v.dim() != dim {
                    return Err(RetrievalError::DimDrift { expected: dim, got: v.dim() });
                }
                rows.extend_from_slice(v.values());
                offsets.push(offsets.last().unwrap() + 1);
            }
            IndexMode::Late => {
                let toks = embedder.embed_tokens(&fact.text)?;
                if toks.dim() != dim {
                    return Err(RetrievalError::DimDrift { expected: dim, got: toks.dim() });
                }
                for v in toks.vectors() {
                    rows.extend_from_slice(v.values());
                }
                offsets.push(offsets.last().unwrap() + toks.len() as u32);
            }
        }
        ids.push(fact.id.clone());
    }
    Ok(VectorIndex { mode, dim, seed, ids, rows, offsets })
}

/// Late-interaction relevance: sum over query tokens of the maximum
/// dot product against document tokens.
pub fn maxsim_score(
    q_tokens: &TokenEmbeddings,
    d_tokens: &TokenEmbeddings,
) -> Result<f64, RetrievalError> {
    if q_tokens.is_empty() || d_tokens.is_empty() {
        return Err(RetrievalError::EmptyTokenSet);
    }
    Ok(q_tokens
        .vectors()
        .iter()
        .map(|q| {
            d_tokens
                .vectors()
                .iter()
                .map(|d| q.dot(d))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

fn maxsim_over_rows(q: &TokenEmbeddings, rows: &[f32], dim: usize) -> f64 {
    q.vectors()
        .iter()
        .map(|qv| {
            rows.chunks_exact(dim)
                .map(|d| dot_f64(qv.values(), d))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

/// Hit candidate ordered worst-first so a max-heap keeps the best k.
struct Candidate {
    score: f64,
    id: String,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.score == other.score && self.id == other.id
    }
}
impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // heap max = worst candidate: lower score, then higher id
        other.score.total_cmp(&self.score).then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn select_topk(scored: impl Iterator<Item = (String, f64)>, k: usize) -> Vec<RetrievalHit> {
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
    for (id, score) in scored {
        heap.push(Candidate { score, id });
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut hits: Vec<RetrievalHit> = heap
        .into_iter()
        .map(|c| RetrievalHit { fact_id: c.id, score: c.score, rank: 0 })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.fact_id.cmp(&b.fact_id)));
    for (i, h) in hits.iter_mut().enumerate() {
        h.rank = i + 1;
    }
    hits
}

/// Top-k by single-vector cosine over the frozen index.
pub fn search_topk(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
) -> Result<Vec<RetrievalHit>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    let q = embedder.embed_text(query)?;
    if q.dim() != index.dim {
        return Err(RetrievalError::DimDrift { expected: index.dim, got: q.dim() });
    }
    let scored = (0..index.len()).map(|i| {
        let row = index.fact_rows(i);
        (index.ids[i].clone(), dot_f64(q.values(), row))
    });
    Ok(select_topk(scored, k))
}

/// Top-k by MaxSim over the frozen late-interaction index.
pub fn search_topk_late(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
) -> Result<Vec<RetrievalHit>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    let q = embedder.embed_tokens(query)?;
    if q.dim() != index.dim {
        return Err(RetrievalError::DimDrift { expected: index.dim, got: q.dim() });
    }
    let scored = (0..index.len())
        .map(|i| (index.ids[i].clone(), maxsim_over_rows(&q, index.fact_rows(i), index.dim)));
    Ok(select_topk(scored, k))
}

/// Exhaustive oracle: re-embed every fact, score it directly, and
/// full-sort with the same tie rule. Kept free of the index code path.
pub fn brute_force_topk(
    corpus: &Corpus,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
    mode: IndexMode,
) -> Result<Vec<RetrievalHit>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if corpus.is_empty() {
        return Ok(Vec::new());
    }
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(corpus.len());
    match mode {
        IndexMode::Single => {
            let q = embedder.embed_text(query)?;
            for fact in corpus.iter() {
                let d = embedder.embed_text(&fact.text)?;
                scored.push((fact.id.clone(), q.dot(&d)));
            }
        }
        IndexMode::Late => {
            let q = embedder.embed_tokens(query)?;
            for fact in corpus.iter() {
                let d = embedder.embed_tokens(&fact.text)?;
                scored.push((fact.id.clone(), maxsim_score(&q, &d)?));
            }
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (fact_id, score))| RetrievalHit { fact_id, score, rank: i + 1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Fact;
    use crate::embed::EmbeddingVector;
    use crate::mock::MockEmbedder;

    fn corpus(texts: &[&str]) -> Corpus {
        let mut c = Corpus::new("test");
        for (i, t) in texts.iter().enumerate() {
            c.push(Fact::new(&alloc::format!("f{i:03}"), t, "t").unwrap()).unwrap();
        }
        c
    }

    #[test]
    fn query_variants_assemble() {
        let ctx = VisualContext {
            traditional_caption: Some("a beach scene".into()),
            objects: alloc::vec!["dog".into(), "ball".into()],
            scene_graph: alloc::vec![("dog".into(), "near".into(), "ball".into())],
            ..Default::default()
        };
        assert_eq!(build_query(QueryVariant::Q, "what is blue?", &ctx).unwrap(), "what is blue?");
        assert_eq!(
            build_query(QueryVariant::CQ, "what is blue?", &ctx).unwrap(),
            "a beach scene what is blue?"
        );
        assert_eq!(
            build_query(QueryVariant::OQ, "what is blue?", &ctx).unwrap(),
            "dog, ball what is blue?"
        );
        assert_eq!(
            build_query(QueryVariant::SgQ, "what is blue?", &ctx).unwrap(),
            "dog near ball. what is blue?"
        );
        assert_eq!(
            build_query(QueryVariant::AllQ, "what is blue?", &ctx).unwrap(),
            "a beach scene dog, ball dog near ball. what is blue?"
        );
    }

    #[test]
    fn missing_context_names_the_field() {
        let err = build_query(QueryVariant::CQ, "q", &VisualContext::default()).unwrap_err();
        assert_eq!(err, RetrievalError::MissingContext { field: "traditional_caption" });
    }

    #[test]
    fn index_row_count_matches_corpus() {
        let c = corpus(&["a", "b c", "d e f", "g", "h"]);
        let e = MockEmbedder::new(1, 8);
        let idx = index_corpus(&c, &e, IndexMode::Single, 1).unwrap();
        assert_eq!(idx.len(), 5);
        let late = index_corpus(&c, &e, IndexMode::Late, 1).unwrap();
        assert_eq!(late.len(), 5);
        assert_eq!(*late.offsets().last().unwrap(), 1 + 2 + 3 + 1 + 1);
    }

    #[test]
    fn exact_text_match_ranks_first_with_score_one() {
        let c = corpus(&["the sky is blue", "grass is green", "fire is hot"]);
        let e = MockEmbedder::new(2, 16);
        let idx = index_corpus(&c, &e, IndexMode::Single, 2).unwrap();
        let hits = search_topk(&idx, &e, "grass is green", 1).unwrap();
        assert_eq!(hits[0].fact_id, "f001");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn k_larger_than_corpus_returns_all_ranked() {
        let c = corpus(&["one", "two", "three"]);
        let e = MockEmbedder::new(3, 8);
        let idx = index_corpus(&c, &e, IndexMode::Single, 3).unwrap();
        let hits = search_topk(&idx, &e, "two", 10).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), alloc::vec![1, 2, 3]);
    }

    #[test]
    fn hand_built_2d_ranking_matches_hand_sort() {
        // five 2-D unit vectors scored against q = [1, 0]
        let vecs = [
            [1.0f32, 0.0],
            [0.0, 1.0],
            [0.6, 0.8],
            [0.8, -0.6],
            [-1.0, 0.0],
        ];
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut offsets = alloc::vec![0u32];
        for (i, v) in vecs.iter().enumerate() {
            ids.push(alloc::format!("f{i}"));
            rows.extend_from_slice(v);
            offsets.push(offsets.last().unwrap() + 1);
        }
        let idx = VectorIndex::from_parts(IndexMode::Single, 2, 0, ids, rows, offsets).unwrap();
        let q = EmbeddingVector::unit(alloc::vec![1.0, 0.0]).unwrap();
        let scored =
            (0..idx.len()).map(|i| (idx.ids()[i].clone(), dot_f64(q.values(), idx.fact_rows(i))));
        let hits = select_topk(scored, 5);
        let order: Vec<&str> = hits.iter().map(|h| h.fact_id.as_str()).collect();
        // dots: 1.0, 0.0, 0.6, 0.8, -1.0
        assert_eq!(order, ["f0", "f3", "f2", "f1", "f4"]);
    }

    #[test]
    fn maxsim_hand_example() {
        let q = TokenEmbeddings::new(alloc::vec![
            EmbeddingVector::unit(alloc::vec![1.0, 0.0]).unwrap(),
            EmbeddingVector::unit(alloc::vec![0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let d = TokenEmbeddings::new(alloc::vec![
            EmbeddingVector::unit(alloc::vec![1.0, 0.0]).unwrap(),
            EmbeddingVector::unit(alloc::vec![0.6, 0.8]).unwrap(),
        ])
        .unwrap();
        let s = maxsim_score(&q, &d).unwrap();
        assert!((s - 1.8).abs() < 1e-6);
    }

    #[test]
    fn maxsim_permutation_invariant_in_document() {
        let e = MockEmbedder::new(5, 16);
        let q = e.embed_tokens("what animal plays fetch").unwrap();
        let d1 = e.embed_tokens("dogs chase the ball").unwrap();
        let d2 = e.embed_tokens("ball the chase dogs").unwrap();
        assert_eq!(maxsim_score(&q, &d1).unwrap(), maxsim_score(&q, &d2).unwrap());
    }

    #[test]
    fn maxsim_identical_token_sets_scores_count() {
        let e = MockEmbedder::new(5, 16);
        let q = e.embed_tokens("red green blue").unwrap();
        let s = maxsim_score(&q, &q).unwrap();
        assert!((s - 3.0).abs() < 1e-6);
    }

    #[test]
    fn maxsim_monotone_in_document_tokens() {
        let e = MockEmbedder::new(6, 16);
        let q = e.embed_tokens("sun moon").unwrap();
        let small = e.embed_tokens("star").unwrap();
        let big = e.embed_tokens("star comet").unwrap();
        assert!(maxsim_score(&q, &big).unwrap() >= maxsim_score(&q, &small).unwrap());
    }

    #[test]
    fn duplicated_query_token_adds_its_max_term() {
        let e = MockEmbedder::new(6, 16);
        let d = e.embed_tokens("star comet dust").unwrap();
        let q1 = e.embed_tokens("sun moon").unwrap();
        let q2 = e.embed_tokens("sun moon moon").unwrap();
        let moon = e.embed_tokens("moon").unwrap();
        let moon_max = maxsim_score(&moon, &d).unwrap();
        let s1 = maxsim_score(&q1, &d).unwrap();
        let s2 = maxsim_score(&q2, &d).unwrap();
        assert!((s2 - s1 - moon_max).abs() < 1e-12);
    }

    #[test]
    fn single_token_late_and_single_agree_on_single_token_corpus() {
        let c = corpus(&["apple", "banana", "cherry", "grape"]);
        let e = MockEmbedder::new(9, 16);
        let single = index_corpus(&c, &e, IndexMode::Single, 9).unwrap();
        let late = index_corpus(&c, &e, IndexMode::Late, 9).unwrap();
        let hs = search_topk(&single, &e, "banana", 4).unwrap();
        let hl = search_topk_late(&late, &e, "banana", 4).unwrap();
        let ids_s: Vec<_> = hs.iter().map(|h| &h.fact_id).collect();
        let ids_l: Vec<_> = hl.iter().map(|h| &h.fact_id).collect();
        assert_eq!(ids_s, ids_l);
    }

    #[test]
    fn brute_force_matches_search_both_modes() {
        let texts = [
            "a dog chases a ball",
            "the sky is blue at noon",
            "water freezes into ice",
            "dogs and cats are pets",
            "the ball is round",
            "ice is cold water",
            "the sun heats the ground",
            "cats chase mice",
        ];
        let c = corpus(&texts);
        let e = MockEmbedder::new(13, 16);
        let single = index_corpus(&c, &e, IndexMode::Single, 13).unwrap();
        let late = index_corpus(&c, &e, IndexMode::Late, 13).unwrap();
        for q in ["what chases the ball", "is ice cold", "the blue sky"] {
            for k in [1, 3, 8] {
                let a = search_topk(&single, &e, q, k).unwrap();
                let b = brute_force_topk(&c, &e, q, k, IndexMode::Single).unwrap();
                assert_eq!(a, b, "single mode q={q} k={k}");
                let a = search_topk_late(&late, &e, q, k).unwrap();
                let b = brute_force_topk(&c, &e, q, k, IndexMode::Late).unwrap();
                assert_eq!(a, b, "late mode q={q} k={k}");
            }
        }
    }

    #[test]
    fn scores_invariant_to_insertion_order() {
        let e = MockEmbedder::new(21, 16);
        let c1 = corpus(&["alpha beta", "gamma delta", "epsilon zeta"]);
        let mut c2 = Corpus::new("test");
        for (id, t) in [("f002", "epsilon zeta"), ("f000", "alpha beta"), ("f001", "gamma delta")] {
            c2.push(Fact::new(id, t, "t").unwrap()).unwrap();
        }
        let h1 = brute_force_topk(&c1, &e, "beta gamma", 3, IndexMode::Single).unwrap();
        let h2 = brute_force_topk(&c2, &e, "beta gamma", 3, IndexMode::Single).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn zero_k_and_empty_query_are_errors() {
        let c = corpus(&["a fact"]);
        let e = MockEmbedder::new(1, 8);
        let idx = index_corpus(&c, &e, IndexMode::Single, 1).unwrap();
        assert_eq!(search_topk(&idx, &e, "q", 0), Err(RetrievalError::ZeroK));
        assert_eq!(search_topk(&idx, &e, "  ", 1), Err(RetrievalError::EmptyQuery));
    }

    #[test]
    fn brute_force_on_empty_corpus_is_empty() {
        let c = Corpus::new("empty");
        let e = MockEmbedder::new(1, 8);
        assert!(brute_force_topk(&c, &e, "q", 3, IndexMode::Single).unwrap().is_empty());
    }
}
