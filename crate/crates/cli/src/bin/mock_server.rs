//! Serves every capability endpoint from the deterministic mocks, so
//! the HTTP clients can be exercised without any real models. Prints
//! the bound address on the first stdout line.

use std::net::TcpListener;
use std::sync::Arc;

use anyhow::{bail, Result};
use clap::Parser;

use factrag::http::{serve, Request};
use factrag::wire::*;
use factrag_core::client::{Answerer, Captioner, Detector, Embedder, Explainer};
use factrag_core::mock::{MockAnswerer, MockCaptioner, MockDetector, MockEmbedder, MockExplainer};

#[derive(Parser)]
#[command(name = "factrag-mock-server", about = "Deterministic mock model services over HTTP")]
struct Args {
    /// Address to bind; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:0")]
    addr: String,
    /// Seed shared by all mock services.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Embedding dimensionality.
    #[arg(long, default_value_t = 32)]
    dim: usize,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let listener = TcpListener::bind(&args.addr)?;
    println!("{}", listener.local_addr()?);

    let embedder = MockEmbedder::new(args.seed, args.dim);
    let captioner = MockCaptioner::new(args.seed);
    let detector = MockDetector::new(args.seed);
    let explainer = MockExplainer;
    let answerer = MockAnswerer::new(args.seed);

    let handler = Arc::new(move |req: &Request| -> Result<String> {
        if req.method != "POST" {
            bail!("only POST is supported");
        }
        match req.path.as_str() {
            "/embed" => {
                let r: EmbedRequest = serde_json::from_str(&req.body)?;
                let v = embedder.embed_text(&r.text).map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(serde_json::to_string(&EmbedResponse {
                    dim: v.dim(),
                    values: v.values().to_vec(),
                })?)
            }
            "/embed_tokens" => {
                let r: EmbedRequest = serde_json::from_str(&req.body)?;
                let toks = embedder.embed_tokens(&r.text).map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(serde_json::to_string(&EmbedTokensResponse {
                    dim: toks.dim(),
                    vectors: toks.vectors().iter().map(|v| v.values().to_vec()).collect(),
                })?)
            }
            "/caption" => {
                let r: ImageRequest = serde_json::from_str(&req.body)?;
                let ctx = captioner.caption(&r.image_ref).map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(serde_json::to_string(&ctx)?)
            }
            "/detect" => {
                let r: ImageRequest = serde_json::from_str(&req.body)?;
                let objects =
                    detector.detect_objects(&r.image_ref).map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(serde_json::to_string(&DetectResponse { objects })?)
            }
            "/explain" => {
                let r: ExplainRequest = serde_json::from_str(&req.body)?;
                let explanation =
                    explainer.explain(&r.prompt).map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(serde_json::to_string(&ExplainResponse { explanation })?)
            }
            "/answer" => {
                let r: AnswerRequest = serde_json::from_str(&req.body)?;
                let (label, scores) = answerer
                    .answer(&r.text, &r.image_ref, &r.options)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(serde_json::to_string(&AnswerResponse { label, scores })?)
            }
            other => bail!("unknown endpoint {other}"),
        }
    });
    serve(listener, handler)
}
