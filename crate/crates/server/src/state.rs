use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use textbook_core::document::IndexedDocument;
use textbook_core::llm::LlmGateway;
use textbook_core::rag::Orchestrator;

use crate::config::ServerConfig;
use crate::error::{ApiError, ApiResult};
use crate::ids::IdGen;
use crate::storage::{Storage, StorageError};

/// One async mutex per key; holders of the same key run one at a time.
#[derive(Debug, Default)]
pub struct KeyedLocks {
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl KeyedLocks {
    pub async fn lock(&self, key: &str) -> tokio::sync::OwnedMutexGuard<()> {
        let lock = {
            let mut map = self.locks.lock().expect("lock table poisoned");
            map.entry(key.to_string()).or_default().clone()
        };
        lock.lock_owned().await
    }
}

pub struct AppState {
    pub config: ServerConfig,
    pub storage: Storage,
    pub ids: IdGen,
    pub gateway: Arc<dyn LlmGateway>,
    pub orchestrator: Orchestrator,
    pub locks: KeyedLocks,
    documents: RwLock<HashMap<String, Arc<IndexedDocument>>>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    pub fn new(config: ServerConfig) -> Result<Self, StorageError> {
        Self::with_gateway(config.gateway.build(), config)
    }

    pub fn with_gateway(gateway: Arc<dyn LlmGateway>, config: ServerConfig) -> Result<Self, StorageError> {
        let storage = Storage::open(&config.data_dir)?;
        Ok(Self {
            ids: IdGen::new(config.rng_seed),
            orchestrator: Orchestrator::new(gateway.clone(), config.rag.clone()),
            gateway,
            storage,
            locks: KeyedLocks::default(),
            documents: RwLock::default(),
            config,
        })
    }

    /// Loads a published document, caching it in memory.
    pub fn document(&self, doc_id: &str) -> ApiResult<Arc<IndexedDocument>> {
        if let Some(doc) = self.documents.read().expect("document cache poisoned").get(doc_id) {
            return Ok(doc.clone());
        }
        let doc = self
            .storage
            .load_document(doc_id)?
            .ok_or_else(|| ApiError::not_found(format_args!("document {doc_id}")))?;
        let doc = Arc::new(doc);
        self.documents
            .write()
            .expect("document cache poisoned")
            .insert(doc_id.to_string(), doc.clone());
        Ok(doc)
    }

    pub fn cache_document(&self, doc: IndexedDocument) {
        self.documents
            .write()
            .expect("document cache poisoned")
            .insert(doc.document.doc_id.clone(), Arc::new(doc));
    }
}
