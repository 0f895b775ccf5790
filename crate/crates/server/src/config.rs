use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use textbook_core::ingest::{DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE};
use textbook_core::llm::GatewayConfig;
use textbook_core::quiz::QuizConfig;
use textbook_core::rag::{RagConfig, RefSummaryMode};

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 50 * 1024 * 1024;

/// Command-line flags; every flag can also be set through its environment variable.
#[derive(Debug, Clone, Parser)]
#[command(name = "textbook-server", version, about = "Serve course PDFs with retrieval-grounded chat and Leitner quizzes")]
pub struct Cli {
    #[arg(long, env = "PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "BIND_ADDR", default_value = "0.0.0.0")]
    pub bind: String,
    #[arg(long, env = "DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,
    /// Seeds every generated id and quiz draw, making runs reproducible.
    #[arg(long, env = "RNG_SEED")]
    pub rng_seed: Option<u64>,
    #[arg(long, env = "MAX_UPLOAD_BYTES", default_value_t = DEFAULT_MAX_UPLOAD_BYTES)]
    pub max_upload_bytes: usize,
    #[arg(long, env = "CHUNK_SIZE", default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: usize,
    #[arg(long, env = "CHUNK_OVERLAP", default_value_t = DEFAULT_CHUNK_OVERLAP)]
    pub chunk_overlap: usize,
    #[arg(long, env = "PROMPT_BUDGET", default_value_t = 6000)]
    pub prompt_budget: usize,
    #[arg(long, env = "MAX_OUTPUT_TOKENS", default_value_t = 512)]
    pub max_output_tokens: u32,
    /// `first_sentence` or `llm`.
    #[arg(long, env = "REF_SUMMARY", default_value = "first_sentence")]
    pub ref_summary: String,
    /// Pause before an ingest is published; used to exercise crash recovery.
    #[arg(long, env = "INGEST_STAGE_DELAY_MS", default_value_t = 0, hide = true)]
    pub ingest_stage_delay_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub rng_seed: Option<u64>,
    pub max_upload_bytes: usize,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub ingest_stage_delay: Duration,
    pub gateway: GatewayConfig,
    pub rag: RagConfig,
    pub quiz: QuizConfig,
}

impl ServerConfig {
    /// Defaults with the mock gateway, rooted at `data_dir`.
    pub fn for_tests(data_dir: &std::path::Path) -> Self {
        Self {
            data_dir: data_dir.to_path_buf(),
            rng_seed: Some(7),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            chunk_size: DEFAULT_CHUNK_SIZE,
            chunk_overlap: DEFAULT_CHUNK_OVERLAP,
            ingest_stage_delay: Duration::ZERO,
            gateway: GatewayConfig { mock: true, ..GatewayConfig::default() },
            rag: RagConfig::default(),
            quiz: QuizConfig::default(),
        }
    }
}

impl From<&Cli> for ServerConfig {
    fn from(cli: &Cli) -> Self {
        Self {
            data_dir: cli.data_dir.clone(),
            rng_seed: cli.rng_seed,
            max_upload_bytes: cli.max_upload_bytes,
            chunk_size: cli.chunk_size,
            chunk_overlap: cli.chunk_overlap,
            ingest_stage_delay: Duration::from_millis(cli.ingest_stage_delay_ms),
            gateway: GatewayConfig::from_env(),
            rag: RagConfig {
                prompt_budget: cli.prompt_budget,
                max_output_tokens: cli.max_output_tokens,
                ref_summary: RefSummaryMode::from_env_value(Some(&cli.ref_summary)),
                ..RagConfig::default()
            },
            quiz: QuizConfig::default(),
        }
    }
}
