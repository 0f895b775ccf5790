//! On-disk layout under the data directory.
//!
//! ```text
//! docs/<doc_id>/{manifest.json, pages.jsonl, chunks.jsonl, index.json}
//! sessions/<session_id>.jsonl          header line, then one message per line
//! quiz/<learner_id>/<doc_id>/<section>.json   section label percent-encoded
//! profiles/<learner_id>.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place. A
//! document is assembled in `docs/.staging-<doc_id>` and published by renaming
//! the whole directory, so a listed document is always complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use percent_encoding::{percent_decode_str, utf8_percent_encode, NON_ALPHANUMERIC};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use textbook_core::document::{Chunk, ExtractedDocument, IndexedDocument, PageText, SectionRange};
use textbook_core::llm::ChatMessage;
use textbook_core::quiz::SectionQuizState;
use textbook_core::rag::LearnerProfile;
use textbook_core::retrieval::IndexStats;

const STAGING_PREFIX: &str = ".staging-";

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("storage I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt record in {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub doc_id: String,
    pub title: String,
    pub pages: u32,
    pub sections: Vec<SectionRange>,
    pub chunk_count: usize,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub learner_id: String,
    pub doc_id: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    #[serde(flatten)]
    pub header: SessionHeader,
    pub history: Vec<ChatMessage>,
}

/// Ids that may appear as path components: 1 to 128 ASCII letters, digits,
/// `-` or `_`.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn encode_section(label: &str) -> String {
    utf8_percent_encode(label, NON_ALPHANUMERIC).to_string()
}

pub fn decode_section(file_stem: &str) -> String {
    percent_decode_str(file_stem).decode_utf8_lossy().into_owned()
}

#[derive(Debug, Clone)]
pub struct Storage {
    root: PathBuf,
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> StorageError {
    StorageError::Corrupt { path: path.to_path_buf(), message: e.to_string() }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StorageError> {
    let dir = path.parent().expect("storage paths have parents");
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("storage records serialize");
    bytes.push(b'\n');
    bytes
}

fn jsonl_bytes<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, &item).expect("storage records serialize");
        bytes.push(b'\n');
    }
    bytes
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, StorageError> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| corrupt(path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn read_lines(path: &Path) -> Result<Option<Vec<String>>, StorageError> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(Some(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn parse_lines<T: DeserializeOwned>(path: &Path, lines: &[String]) -> Result<Vec<T>, StorageError> {
    lines.iter().map(|l| serde_json::from_str(l).map_err(|e| corrupt(path, e))).collect()
}

impl Storage {
    /// Creates the layout under `root` and removes staging directories left
    /// behind by an interrupted ingest.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let storage = Self { root: root.into() };
        for dir in ["docs", "sessions", "quiz", "profiles"] {
            std::fs::create_dir_all(storage.root.join(dir))?;
        }
        for entry in std::fs::read_dir(storage.docs_dir())? {
            let entry = entry?;
            if entry.file_name().to_string_lossy().starts_with(STAGING_PREFIX) {
                tracing::warn!(path = %entry.path().display(), "removing interrupted ingest");
                std::fs::remove_dir_all(entry.path())?;
            }
        }
        Ok(storage)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn docs_dir(&self) -> PathBuf {
        self.root.join("docs")
    }

    fn doc_dir(&self, doc_id: &str) -> PathBuf {
        self.docs_dir().join(doc_id)
    }

    pub fn staging_dir(&self, doc_id: &str) -> PathBuf {
        self.docs_dir().join(format!("{STAGING_PREFIX}{doc_id}"))
    }

    /// Writes the document into its staging directory. Call
    /// [`Storage::publish_document`] to make it visible.
    pub fn stage_document(&self, doc: &IndexedDocument, manifest: &Manifest) -> Result<(), StorageError> {
        let dir = self.staging_dir(&manifest.doc_id);
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("pages.jsonl"), &jsonl_bytes(&doc.document.pages))?;
        write_atomic(&dir.join("chunks.jsonl"), &jsonl_bytes(&doc.chunks))?;
        write_atomic(&dir.join("index.json"), &json_bytes(&doc.index))?;
        write_atomic(&dir.join("manifest.json"), &json_bytes(manifest))?;
        Ok(())
    }

    pub fn publish_document(&self, doc_id: &str) -> Result<(), StorageError> {
        std::fs::rename(self.staging_dir(doc_id), self.doc_dir(doc_id))?;
        if let Ok(dir) = std::fs::File::open(self.docs_dir()) {
            let _ = dir.sync_all();
        }
        Ok(())
    }

    pub fn discard_staging(&self, doc_id: &str) {
        let _ = std::fs::remove_dir_all(self.staging_dir(doc_id));
    }

    /// Manifests of every published document, oldest first.
    pub fn list_documents(&self) -> Result<Vec<Manifest>, StorageError> {
        let mut manifests = Vec::new();
        for entry in std::fs::read_dir(self.docs_dir())? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') {
                continue;
            }
            if let Some(m) = self.manifest(&name)? {
                manifests.push(m);
            }
        }
        manifests.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.doc_id.cmp(&b.doc_id)));
        Ok(manifests)
    }

    pub fn manifest(&self, doc_id: &str) -> Result<Option<Manifest>, StorageError> {
        if !is_safe_id(doc_id) {
            return Ok(None);
        }
        read_json(&self.doc_dir(doc_id).join("manifest.json"))
    }

    pub fn load_document(&self, doc_id: &str) -> Result<Option<IndexedDocument>, StorageError> {
        let Some(manifest) = self.manifest(doc_id)? else {
            return Ok(None);
        };
        let dir = self.doc_dir(doc_id);
        let pages_path = dir.join("pages.jsonl");
        let chunks_path = dir.join("chunks.jsonl");
        let pages: Vec<PageText> = parse_lines(&pages_path, &read_lines(&pages_path)?.unwrap_or_default())?;
        let chunks: Vec<Chunk> = parse_lines(&chunks_path, &read_lines(&chunks_path)?.unwrap_or_default())?;
        let index: IndexStats = read_json(&dir.join("index.json"))?.ok_or_else(|| corrupt(&dir, "index.json missing"))?;
        Ok(Some(IndexedDocument {
            document: ExtractedDocument {
                doc_id: manifest.doc_id,
                title: manifest.title,
                pages,
                created_at: manifest.created_at,
                section_map: manifest.sections,
            },
            chunks,
            index,
        }))
    }

    fn session_path(&self, session_id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{session_id}.jsonl"))
    }

    pub fn save_session(&self, session: &Session) -> Result<(), StorageError> {
        let mut bytes = jsonl_bytes([&session.header]);
        bytes.extend(jsonl_bytes(&session.history));
        write_atomic(&self.session_path(&session.header.session_id), &bytes)
    }

    pub fn load_session(&self, session_id: &str) -> Result<Option<Session>, StorageError> {
        if !is_safe_id(session_id) {
            return Ok(None);
        }
        let path = self.session_path(session_id);
        let Some(lines) = read_lines(&path)? else {
            return Ok(None);
        };
        let (first, rest) = lines.split_first().ok_or_else(|| corrupt(&path, "empty session file"))?;
        let header = serde_json::from_str(first).map_err(|e| corrupt(&path, e))?;
        Ok(Some(Session { header, history: parse_lines(&path, rest)? }))
    }

    fn quiz_path(&self, learner_id: &str, doc_id: &str, section: &str) -> PathBuf {
        self.root
            .join("quiz")
            .join(learner_id)
            .join(doc_id)
            .join(format!("{}.json", encode_section(section)))
    }

    pub fn load_quiz(&self, learner_id: &str, doc_id: &str, section: &str) -> Result<Option<SectionQuizState>, StorageError> {
        read_json(&self.quiz_path(learner_id, doc_id, section))
    }

    pub fn save_quiz(&self, learner_id: &str, state: &SectionQuizState) -> Result<(), StorageError> {
        write_atomic(&self.quiz_path(learner_id, &state.doc_id, &state.section_label), &json_bytes(state))
    }

    /// Finds the (doc_id, section) whose quiz state holds `card_id`.
    pub fn find_card(&self, learner_id: &str, card_id: &str) -> Result<Option<(String, String)>, StorageError> {
        let learner_dir = self.root.join("quiz").join(learner_id);
        let Ok(docs) = std::fs::read_dir(&learner_dir) else {
            return Ok(None);
        };
        let mut doc_dirs: Vec<PathBuf> = docs.filter_map(|e| e.ok().map(|e| e.path())).collect();
        doc_dirs.sort();
        for doc_dir in doc_dirs {
            let Ok(files) = std::fs::read_dir(&doc_dir) else { continue };
            let mut files: Vec<PathBuf> = files.filter_map(|e| e.ok().map(|e| e.path())).collect();
            files.sort();
            for file in files {
                if file.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let Some(state) = read_json::<SectionQuizState>(&file)? else { continue };
                if state.card(card_id).is_some() {
                    return Ok(Some((state.doc_id, state.section_label)));
                }
            }
        }
        Ok(None)
    }

    fn profile_path(&self, learner_id: &str) -> PathBuf {
        self.root.join("profiles").join(format!("{learner_id}.json"))
    }

    pub fn load_profile(&self, learner_id: &str) -> Result<Option<LearnerProfile>, StorageError> {
        read_json(&self.profile_path(learner_id))
    }

    pub fn save_profile(&self, profile: &LearnerProfile) -> Result<(), StorageError> {
        write_atomic(&self.profile_path(&profile.learner_id), &json_bytes(profile))
    }
}
