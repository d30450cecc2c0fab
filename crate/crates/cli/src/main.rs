//! `factrag` command-line interface: index/retrieve over a fact
//! corpus, prompt assembly, the full answer pipeline, evaluation, and
//! the noise-robustness toy experiments. Outputs are line-oriented
//! JSON unless noted.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use factrag::clients::ClientSet;
use factrag::config::PipelineConfig;
use factrag::io;
use factrag::pipeline::{run_records, StageTiming};
use factrag::snapshot;
use factrag_core::contrastive::{train_projection, ProjectionHead, TrainOptions, Triple};
use factrag_core::integrate::build_reader_input;
use factrag_core::losses::{LossConfig, LossKind};
use factrag_core::metrics::{exact_match, retrieval_report, AggMode, ScoredRecord};
use factrag_core::noise::{ablation_grid, inject_label_noise, AblationConfig, NoiseSpec};
use factrag_core::prompt::{assemble_prompt, PromptKind};
use factrag_core::retrieval::{
    build_query, index_corpus, search_topk, search_topk_late, IndexMode,
};
use factrag_core::tokenize::tokenize;
use factrag_core::toy::{gaussian_blobs, train_toy};

#[derive(Parser)]
#[command(name = "factrag", about = "Fact-augmented VQA pipeline", version)]
struct Cli {
    /// TOML config file; flags override it where they overlap.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a fact corpus and freeze it into a binary index snapshot.
    Index(IndexArgs),
    /// Query an index snapshot, one JSON line of hits per query.
    Retrieve(RetrieveArgs),
    /// Train the retriever projection head on (q, d+, d-) triples.
    FinetuneRetriever(FinetuneArgs),
    /// Assemble explanation prompts for records, one JSON line each.
    BuildPrompt(BuildPromptArgs),
    /// Fuse knowledge with questions into reader inputs.
    Integrate(IntegrateArgs),
    /// Run the full per-record pipeline and emit predictions.
    Answer(AnswerArgs),
    /// Score retrieved/generated texts against gold explanations.
    EvalRetrieval(EvalRetrievalArgs),
    /// Score predictions against gold answers.
    EvalAnswers(EvalAnswersArgs),
    /// Train the toy classifier once under a given loss and noise rate.
    TrainToy(TrainToyArgs),
    /// Flip an exact fraction of labels at random.
    InjectNoise(InjectNoiseArgs),
    /// Run the loss x noise-rate x seed robustness grid.
    Ablate(AblateArgs),
    /// Time pipeline stages in sequential and concurrent modes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    /// Queries, one per line.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// JSONL triples: {"q": ..., "d_plus": fact id, "d_minus": fact id}.
    #[arg(long)]
    triples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Args)]
struct BuildPromptArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    records: PathBuf,
    /// JSONL knowledge per record: {"id": ..., "text": ...}. Records
    /// without an entry get an empty knowledge string.
    #[arg(long)]
    knowledge: Option<PathBuf>,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct AnswerArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Run caption and detection stages on separate threads.
    #[arg(long)]
    concurrent: bool,
    /// Answer once per retrieved fact and take the majority label.
    #[arg(long)]
    vote: bool,
    /// Write JSONL here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "max")]
    agg: String,
    /// Also report mean cosine and thresholded cosine accuracy.
    #[arg(long)]
    cosine: bool,
}

#[derive(Args)]
struct EvalAnswersArgs {
    #[arg(long)]
    records: PathBuf,
    /// JSONL predictions: {"id": ..., "label": ...}.
    #[arg(long)]
    predictions: PathBuf,
}

#[derive(Args)]
struct TrainToyArgs {
    #[arg(long, default_value = "CE")]
    loss: String,
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Mixing weight for the MIXED loss.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct InjectNoiseArgs {
    /// JSON array of integer labels.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, default_value = "CE,SCE,GCE,MIXED", value_delimiter = ',')]
    losses: Vec<String>,
    #[arg(long, default_value = "0.0,0.15,0.3", value_delimiter = ',')]
    rates: Vec<f64>,
    #[arg(long, default_value = "1,2,3,4,5", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        // transport failures exit 2, everything else (validation,
        // IO, contract) exits 1
        let code = if format!("{e:#}").contains("transport error") { 2 } else { 1 };
        std::process::exit(code);
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => {
            let mut cfg = PipelineConfig::default();
            cfg.apply_env_overrides();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn parse_mode(s: &str) -> Result<IndexMode> {
    match s.to_lowercase().as_str() {
        "single" => Ok(IndexMode::Single),
        "late" => Ok(IndexMode::Late),
        other => bail!("unknown index mode {other:?} (expected single or late)"),
    }
}

fn parse_loss(s: &str) -> Result<LossKind> {
    serde_json::from_value(json!(s.to_uppercase()))
        .map_err(|_| anyhow!("unknown loss {s:?} (expected CE, SCE, GCE, or MIXED)"))
}

fn parse_prompt_kind(s: &str) -> Result<PromptKind> {
    let norm = if s.len() == 1 { format!("Type{s}") } else { s.to_string() };
    serde_json::from_value(json!(norm))
        .map_err(|_| anyhow!("unknown prompt kind {s:?} (expected Type0..Type7)"))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Index(args) => cmd_index(args, cfg),
        Command::Retrieve(args) => cmd_retrieve(args, cfg),
        Command::FinetuneRetriever(args) => cmd_finetune(args, cfg),
        Command::BuildPrompt(args) => cmd_build_prompt(args, cfg),
        Command::Integrate(args) => cmd_integrate(args, cfg),
        Command::Answer(args) => cmd_answer(args, cfg),
        Command::EvalRetrieval(args) => cmd_eval_retrieval(args, cfg),
        Command::EvalAnswers(args) => cmd_eval_answers(args),
        Command::TrainToy(args) => cmd_train_toy(args),
        Command::InjectNoise(args) => cmd_inject_noise(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Bench(args) => cmd_bench(args, cfg),
    }
}

fn cmd_index(args: IndexArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(mode) = &args.mode {
        cfg.retrieval.mode = parse_mode(mode)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dim) = args.dim {
        cfg.dim = dim;
    }
    cfg.validate()?;
    let corpus = io::load_corpus(&args.corpus)?;
    let clients = ClientSet::from_config(&cfg);
    let index = index_corpus(&corpus, clients.embedder.as_ref(), cfg.retrieval.mode, cfg.seed)
        .map_err(|e| anyhow!("{e}"))?;
    snapshot::save_index(&index, &args.out)?;
    println!(
        "{}",
        json!({
            "facts": index.len(),
            "dim": index.dim(),
            "mode": match index.mode() { IndexMode::Single => "single", IndexMode::Late => "late" },
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_retrieve(args: RetrieveArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(k) = args.k {
        cfg.retrieval.k = k;
    }
    cfg.validate()?;
    let index = snapshot::load_index(&args.index)?;
    cfg.dim = index.dim();
    cfg.seed = index.seed();
    let clients = ClientSet::from_config(&cfg);
    let embedder = clients.embedder.as_ref();
    let queries = std::fs::read_to_string(&args.queries)
        .with_context(|| format!("read {}", args.queries.display()))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for query in queries.lines().filter(|l| !l.trim().is_empty()) {
        let hits = match index.mode() {
            IndexMode::Single => search_topk(&index, embedder, query, cfg.retrieval.k),
            IndexMode::Late => search_topk_late(&index, embedder, query, cfg.retrieval.k),
        }
        .map_err(|e| anyhow!("query {query:?}: {e}"))?;
        writeln!(out, "{}", serde_json::to_string(&json!({"query": query, "hits": hits}))?)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TripleLine {
    q: String,
    d_plus: String,
    d_minus: String,
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<f64>,
    epoch_losses: Vec<f64>,
}

fn cmd_finetune(args: FinetuneArgs, cfg: PipelineConfig) -> Result<()> {
    let corpus = io::load_corpus(&args.corpus)?;
    let lines: Vec<TripleLine> = io::load_jsonl(&args.triples)?;
    let triples: Vec<Triple> = lines
        .iter()
        .map(|t| {
            Triple::new(&t.q, &t.d_plus, &t.d_minus)
                .ok_or_else(|| anyhow!("triple with identical positive and negative: {}", t.d_plus))
        })
        .collect::<Result<_>>()?;
    let clients = ClientSet::from_config(&cfg);
    let opts = TrainOptions { epochs: args.epochs, lr: args.lr, batch_size: args.batch_size };
    let trained = train_projection(
        &corpus,
        &triples,
        clients.embedder.as_ref(),
        ProjectionHead::identity(cfg.dim),
        opts,
    )
    .map_err(|e| anyhow!("{e}"))?;
    let file = HeadFile {
        out_dim: trained.head.out_dim(),
        in_dim: trained.head.in_dim(),
        weights: trained.head.weights().to_vec(),
        epoch_losses: trained.epoch_losses.clone(),
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&file)?)?;
    println!(
        "{}",
        json!({
            "triples": triples.len(),
            "epochs": args.epochs,
            "first_loss": trained.epoch_losses.first(),
            "last_loss": trained.epoch_losses.last(),
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_build_prompt(args: BuildPromptArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(kind) = &args.kind {
        cfg.prompt.kind = parse_prompt_kind(kind)?;
    }
    let corpus = io::load_corpus(&args.corpus)?;
    let records = io::load_records(&args.records)?;
    let index = snapshot::load_index(&args.index)?;
    let clients = ClientSet::from_config(&cfg);
    let embedder = clients.embedder.as_ref();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for record in &records {
        let mut ctx =
            clients.captioner.caption(&record.image_ref).map_err(|e| anyhow!("caption: {e}"))?;
        let objects = clients
            .detector
            .detect_objects(&record.image_ref)
            .map_err(|e| anyhow!("detect: {e}"))?;
        if !objects.is_empty() {
            ctx.objects = objects;
        }
        let query = build_query(cfg.retrieval.query_variant, &record.question, &ctx)
            .map_err(|e| anyhow!("record {}: {e}", record.id))?;
        let hits = match index.mode() {
            IndexMode::Single => search_topk(&index, embedder, &query, cfg.retrieval.k),
            IndexMode::Late => search_topk_late(&index, embedder, &query, cfg.retrieval.k),
        }
        .map_err(|e| anyhow!("search: {e}"))?;
        let facts: Vec<_> = hits
            .iter()
            .map(|h| corpus.by_id(&h.fact_id).ok_or_else(|| anyhow!("hit {} not in corpus", h.fact_id)))
            .collect::<Result<_>>()?;
        let gold =
            (cfg.prompt.kind == PromptKind::Type0).then_some(record.gold_answer.as_str());
        let prompt =
            assemble_prompt(cfg.prompt.kind, &record.question, &ctx, &facts, gold, &cfg.dataset)
                .map_err(|e| anyhow!("record {}: {e}", record.id))?;
        writeln!(out, "{}", serde_json::to_string(&json!({"id": record.id, "prompt": prompt}))?)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct KnowledgeLine {
    id: String,
    text: String,
}

fn cmd_integrate(args: IntegrateArgs, cfg: PipelineConfig) -> Result<()> {
    let records = io::load_records(&args.records)?;
    let budget = args.budget.unwrap_or(cfg.prompt.token_budget);
    let knowledge: std::collections::HashMap<String, String> = match &args.knowledge {
        Some(path) => io::load_jsonl::<KnowledgeLine>(path)?
            .into_iter()
            .map(|l| (l.id, l.text))
            .collect(),
        None => Default::default(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for record in &records {
        let k = knowledge.get(&record.id).map(String::as_str).unwrap_or("");
        let reader = build_reader_input(k, &record.question, &record.image_ref, budget, tokenize)
            .map_err(|e| anyhow!("record {}: {e}", record.id))?;
        writeln!(
            out,
            "{}",
            serde_json::to_string(&json!({
                "id": record.id,
                "text": reader.text,
                "token_count": reader.tokens.len(),
                "truncated": reader.truncated,
            }))?
        )?;
    }
    Ok(())
}

fn cmd_answer(args: AnswerArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    cfg.validate()?;
    let corpus = io::load_corpus(&args.corpus)?;
    let records = io::load_records(&args.records)?;
    let index = snapshot::load_index(&args.index)?;
    let clients = ClientSet::from_config(&cfg);
    let (outputs, _) =
        run_records(&records, &corpus, &index, &clients, &cfg, args.concurrent, args.vote)?;
    match &args.out {
        Some(path) => io::save_jsonl(&outputs, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for o in &outputs {
                writeln!(out, "{}", serde_json::to_string(o)?)?;
            }
        }
    }
    Ok(())
}

fn cmd_eval_retrieval(args: EvalRetrievalArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(k) = args.k {
        cfg.retrieval.k = k;
    }
    cfg.validate()?;
    let agg = match args.agg.to_lowercase().as_str() {
        "max" => AggMode::Max,
        "mean" => AggMode::Mean,
        other => bail!("unknown aggregation {other:?} (expected max or mean)"),
    };
    let corpus = io::load_corpus(&args.corpus)?;
    let records = io::load_records(&args.records)?;
    let index = snapshot::load_index(&args.index)?;
    let clients = ClientSet::from_config(&cfg);
    let embedder = clients.embedder.as_ref();
    let mut scored = Vec::new();
    for record in &records {
        let Some(gold) = &record.gold_explanation else { continue };
        let hits = match index.mode() {
            IndexMode::Single => search_topk(&index, embedder, &record.question, cfg.retrieval.k),
            IndexMode::Late => {
                search_topk_late(&index, embedder, &record.question, cfg.retrieval.k)
            }
        }
        .map_err(|e| anyhow!("search: {e}"))?;
        let candidates = hits
            .iter()
            .map(|h| {
                corpus
                    .by_id(&h.fact_id)
                    .map(|f| f.text.clone())
                    .ok_or_else(|| anyhow!("hit {} not in corpus", h.fact_id))
            })
            .collect::<Result<_>>()?;
        scored.push(ScoredRecord { gold: gold.clone(), candidates });
    }
    if scored.is_empty() {
        bail!("no records carry a gold_explanation to score against");
    }
    let report = retrieval_report(
        &scored,
        cfg.retrieval.k,
        agg,
        args.cosine.then_some(embedder),
    )
    .map_err(|e| anyhow!("{e}"))?;
    println!("{}", serde_json::to_string(&report)?);
    eprint!("{}", report.to_table());
    Ok(())
}

#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    label: String,
}

fn cmd_eval_answers(args: EvalAnswersArgs) -> Result<()> {
    let records = io::load_records(&args.records)?;
    let predictions: Vec<PredictionLine> = io::load_jsonl(&args.predictions)?;
    let by_id: std::collections::HashMap<&str, &str> =
        predictions.iter().map(|p| (p.id.as_str(), p.label.as_str())).collect();
    let mut correct = 0usize;
    let mut missing = 0usize;
    for record in &records {
        match by_id.get(record.id.as_str()) {
            Some(label) => correct += exact_match(label, &record.gold_answer) as usize,
            None => missing += 1,
        }
    }
    if missing == records.len() {
        bail!("no prediction ids match the record set");
    }
    let accuracy = 100.0 * correct as f64 / records.len() as f64;
    println!(
        "{}",
        json!({
            "records": records.len(),
            "correct": correct,
            "missing": missing,
            "accuracy": accuracy,
        })
    );
    Ok(())
}

fn cmd_train_toy(args: TrainToyArgs) -> Result<()> {
    let kind = parse_loss(&args.loss)?;
    let mut loss_cfg = LossConfig { kind, ..LossConfig::default() };
    if let Some(lambda) = args.lambda {
        loss_cfg.lambda = lambda;
    }
    let grid = AblationConfig::default();
    let train = gaussian_blobs(grid.classes, grid.train_per_class, grid.sigma, args.seed);
    let test =
        gaussian_blobs(grid.classes, grid.test_per_class, grid.sigma, args.seed.wrapping_add(1));
    let spec = NoiseSpec::new(args.noise_rate, args.seed ^ 0x4e6f_6973).map_err(|e| anyhow!("{e}"))?;
    let (noisy, flipped) =
        inject_label_noise(&train.labels, grid.classes, spec).map_err(|e| anyhow!("{e}"))?;
    let mut noisy_train = train.clone();
    noisy_train.labels = noisy;
    let result = train_toy(&noisy_train, &test, &loss_cfg, args.epochs, args.lr, args.seed)
        .map_err(|e| anyhow!("{e}"))?;
    println!(
        "{}",
        json!({
            "loss": kind.to_string(),
            "noise_rate": args.noise_rate,
            "flipped": flipped.len(),
            "seed": args.seed,
            "test_accuracy": result.test_accuracy,
            "final_train_loss": result.train_losses.last(),
        })
    );
    Ok(())
}

fn cmd_inject_noise(args: InjectNoiseArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.labels)
        .with_context(|| format!("read {}", args.labels.display()))?;
    let labels: Vec<usize> = serde_json::from_str(&text).context("labels must be a JSON array")?;
    let spec = NoiseSpec::new(args.rate, args.seed).map_err(|e| anyhow!("{e}"))?;
    let (noisy, flipped) =
        inject_label_noise(&labels, args.classes, spec).map_err(|e| anyhow!("{e}"))?;
    println!("{}", json!({"labels": noisy, "flipped": flipped}))
;
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let kinds: Vec<LossKind> =
        args.losses.iter().map(|s| parse_loss(s)).collect::<Result<_>>()?;
    let mut base = LossConfig::default();
    if let Some(lambda) = args.lambda {
        base.lambda = lambda;
    }
    let rows = ablation_grid(&kinds, &args.rates, &args.seeds, &base, &AblationConfig::default())
        .map_err(|e| anyhow!("{e}"))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for row in &rows {
        writeln!(out, "{}", serde_json::to_string(row)?)?;
    }
    // mean accuracy per (loss, rate) cell on stderr
    for &kind in &kinds {
        for &rate in &args.rates {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.loss_kind == kind.to_string() && r.noise_rate == rate)
                .map(|r| r.test_acc)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            eprintln!("{kind:<6} eta={rate:<5} mean_acc={:.2}", 100.0 * mean);
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs, cfg: PipelineConfig) -> Result<()> {
    let corpus = io::load_corpus(&args.corpus)?;
    let records = io::load_records(&args.records)?;
    let index = snapshot::load_index(&args.index)?;
    let clients = ClientSet::from_config(&cfg);
    for (name, concurrent) in [("sequential", false), ("concurrent", true)] {
        let start = Instant::now();
        let (_, timing) =
            run_records(&records, &corpus, &index, &clients, &cfg, concurrent, false)?;
        let wall = start.elapsed().as_secs_f64();
        println!("{}", json!({"mode": name, "wall_secs": wall, "stages": &timing}));
        print_stage_sum(name, &timing);
    }
    Ok(())
}

fn print_stage_sum(name: &str, t: &StageTiming) {
    let secs = |ms: f64| ms / 1e3;
    println!(
        "{name}: ({:.3} + {:.3} + {:.3} + {:.3} + {:.3} + {:.3}) = {:.3} sec",
        secs(t.caption_ms),
        secs(t.detect_ms),
        secs(t.retrieve_ms),
        secs(t.explain_ms),
        secs(t.integrate_ms),
        secs(t.answer_ms),
        secs(t.stage_sum_ms()),
    );
}
