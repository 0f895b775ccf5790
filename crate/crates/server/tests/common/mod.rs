#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde_json::Value;
use textbook_core::ingest::pdfgen::{paginate, PdfBuilder};
use textbook_core::llm::sse::{SseDecoder, SseEvent};
use textbook_core::llm::{Completion, CompletionRequest, DeltaSink, GatewayError, LlmGateway, MockGateway};
use textbook_core::rag::Answer;
use textbook_server::{router, AppState, ServerConfig};

pub struct TestServer {
    pub base: String,
    pub client: reqwest::Client,
    pub dir: tempfile::TempDir,
}

pub async fn spawn(config: impl FnOnce(&std::path::Path) -> ServerConfig) -> TestServer {
    spawn_with(config, None).await
}

pub async fn spawn_with(
    config: impl FnOnce(&std::path::Path) -> ServerConfig,
    gateway: Option<Arc<dyn LlmGateway>>,
) -> TestServer {
    let dir = tempfile::tempdir().unwrap();
    let config = config(dir.path());
    let state = match gateway {
        Some(g) => AppState::with_gateway(g, config).unwrap(),
        None => AppState::new(config).unwrap(),
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(state))).await.unwrap();
    });
    TestServer { base, client: reqwest::Client::new(), dir }
}

pub async fn default_server() -> TestServer {
    spawn(ServerConfig::for_tests).await
}

/// Three pages of short sentences, one section per page.
pub fn three_page_pdf() -> Vec<u8> {
    PdfBuilder::new("Fixture")
        .page(["Photosynthesis converts light into chemical energy.", "Plants store it as sugar."])
        .page(["Mitochondria release energy from sugar.", "Cells use it to do work."])
        .page(["Enzymes speed up reactions.", "They are not consumed."])
        .build()
}

pub fn long_pdf(pages: usize, seed_words: &[&str]) -> Vec<u8> {
    let mut text = String::new();
    let mut i = 0usize;
    while text.len() < pages * 3000 {
        let w = seed_words[i % seed_words.len()];
        text.push_str(&format!("{w}{} ", i % 97));
        if i % 11 == 10 {
            text.push_str("Then. ");
        }
        i += 1;
    }
    let mut builder = PdfBuilder::new("Long fixture");
    for lines in paginate(&text, 90, 34).into_iter().take(pages) {
        builder = builder.page(lines);
    }
    builder.build()
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn upload(&self, pdf: Vec<u8>) -> Value {
        let res = self
            .client
            .post(self.url("/documents"))
            .header("content-type", "application/pdf")
            .body(pdf)
            .send()
            .await
            .unwrap();
        assert_eq!(res.status(), 201);
        res.json().await.unwrap()
    }

    pub async fn session(&self, learner: &str, doc_id: &str) -> String {
        let res = self
            .client
            .post(self.url("/sessions"))
            .json(&serde_json::json!({ "learner_id": learner, "doc_id": doc_id }))
            .send()
            .await
            .unwrap();
        assert_eq!(res.status(), 201);
        res.json::<Value>().await.unwrap()["session_id"].as_str().unwrap().to_string()
    }

    /// Posts and collects the SSE response: status, raw body and decoded events.
    pub async fn sse(&self, path: &str, body: Value) -> (u16, String, Vec<SseEvent>) {
        let res = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        let status = res.status().as_u16();
        let raw = res.text().await.unwrap();
        let mut decoder = SseDecoder::new();
        let mut events = decoder.push(raw.as_bytes());
        events.extend(decoder.finish());
        (status, raw, events)
    }

    pub async fn chat(&self, session: &str, query: &str) -> Streamed {
        let (status, raw, events) = self
            .sse(&format!("/sessions/{session}/chat"), serde_json::json!({ "query": query }))
            .await;
        assert_eq!(status, 200, "{raw}");
        Streamed::new(raw, events)
    }
}

pub struct Streamed {
    pub raw: String,
    pub deltas: String,
    pub delta_count: usize,
    pub answer: Option<Answer>,
    pub error: Option<Value>,
}

impl Streamed {
    pub fn new(raw: String, events: Vec<SseEvent>) -> Self {
        let mut deltas = String::new();
        let mut delta_count = 0;
        let mut answer = None;
        let mut error = None;
        for e in events {
            match e.event.as_deref() {
                Some("delta") => {
                    let v: Value = serde_json::from_str(&e.data).unwrap();
                    deltas.push_str(v["text"].as_str().unwrap());
                    delta_count += 1;
                }
                Some("answer") => answer = Some(serde_json::from_str(&e.data).unwrap()),
                Some("error") => error = Some(serde_json::from_str(&e.data).unwrap()),
                other => panic!("unexpected event {other:?}"),
            }
        }
        Self { raw, deltas, delta_count, answer, error }
    }

    pub fn answer(&self) -> &Answer {
        self.answer.as_ref().unwrap_or_else(|| panic!("no answer event in {}", self.raw))
    }
}

/// Mock gateway that remembers every request it served.
#[derive(Default)]
pub struct Recording {
    inner: MockGateway,
    pub requests: Mutex<Vec<CompletionRequest>>,
}

#[async_trait]
impl LlmGateway for Recording {
    async fn complete(&self, req: &CompletionRequest, sink: &mut DeltaSink<'_>) -> Result<Completion, GatewayError> {
        self.requests.lock().unwrap().push(req.clone());
        self.inner.complete(req, sink).await
    }
}

pub struct Down;

#[async_trait]
impl LlmGateway for Down {
    async fn complete(&self, _: &CompletionRequest, _: &mut DeltaSink<'_>) -> Result<Completion, GatewayError> {
        Err(GatewayError::ProviderUnreachable("connection refused".into()))
    }
}

/// Seeded vocabulary of random lowercase words.
pub fn vocabulary(seed: u64, size: usize) -> Vec<String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| {
            let len = rng.random_range(3..=9);
            (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
        })
        .collect()
}

/// Prose of full-stopped sentences over `vocab`, wrapped onto `pages` pages.
pub fn prose_pdf(seed: u64, vocab: &[String], pages: usize) -> Vec<u8> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut builder = PdfBuilder::new("Prose fixture");
    for _ in 0..pages {
        let mut text = String::new();
        for _ in 0..40 {
            let n = rng.random_range(6..=14);
            let words: Vec<&str> = (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect();
            text.push_str(&words.join(" "));
            text.push_str(". ");
        }
        builder = builder.page(textbook_core::ingest::pdfgen::wrap_words(&text, 90));
    }
    builder.build()
}
