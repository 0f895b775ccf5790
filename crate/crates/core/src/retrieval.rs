//! Tokenization and BM25 retrieval over a document's chunks.
//!
//! ```text
//! score(q, c) = Σ_{t ∈ q} idf(t) · tf(t, c) · (k1 + 1)
//!                         / (tf(t, c) + k1 · (1 − b + b · |c| / avgdl))
//! idf(t)      = ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5))
//! ```
//!
//! The sum runs over query tokens in order, so a repeated query term counts
//! once per occurrence. Results are ordered by descending score with ties
//! broken by ascending chunk id; zero-score chunks are never returned.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::document::{Chunk, ChunkId};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased token text.
    pub text: String,
    /// Character interval in the source text.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

/// Splits text into lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = pos;
            }
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                span: start..pos,
            });
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            span: start..pos,
        });
    }
    TokenStream { tokens }
}

/// Per-chunk term statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTerms {
    pub chunk_id: ChunkId,
    /// Token count of the chunk.
    pub length: usize,
    pub terms: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub doc_count: usize,
    pub avg_doc_len: f64,
    pub doc_freq: BTreeMap<String, u32>,
    pub term_freq: Vec<ChunkTerms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: ChunkId,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("cannot build an index over zero chunks")]
    EmptyCorpus,
    #[error("document has not been indexed")]
    IndexNotBuilt,
}

pub fn build_index(chunks: &[Chunk]) -> Result<IndexStats, RetrievalError> {
    if chunks.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
    let mut term_freq = Vec::with_capacity(chunks.len());
    let mut total_len = 0usize;
    for chunk in chunks {
        let tokens = tokenize(&chunk.text);
        let mut terms: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens.tokens {
            *terms.entry(token.text).or_default() += 1;
        }
        for term in terms.keys() {
            *doc_freq.entry(term.clone()).or_default() += 1;
        }
        let length = terms.values().map(|&n| n as usize).sum();
        total_len += length;
        term_freq.push(ChunkTerms {
            chunk_id: chunk.chunk_id,
            length,
            terms,
        });
    }
    Ok(IndexStats {
        doc_count: chunks.len(),
        avg_doc_len: total_len as f64 / chunks.len() as f64,
        doc_freq,
        term_freq,
    })
}

impl IndexStats {
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = f64::from(self.doc_freq.get(term).copied().unwrap_or(0));
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn score_chunk(&self, chunk: &ChunkTerms, query: &[(&str, f64)]) -> f64 {
        // An all-punctuation corpus has avg_doc_len 0; every length is 0 there too.
        let rel_len = if self.avg_doc_len > 0.0 {
            chunk.length as f64 / self.avg_doc_len
        } else {
            1.0
        };
        let norm = K1 * (1.0 - B + B * rel_len);
        query
            .iter()
            .map(|&(term, idf)| {
                let tf = f64::from(chunk.terms.get(term).copied().unwrap_or(0));
                if tf == 0.0 {
                    0.0
                } else {
                    idf * tf * (K1 + 1.0) / (tf + norm)
                }
            })
            .sum()
    }

    /// Top-`k` chunks for `query`.
    pub fn search(&self, query: &str, k: usize) -> Vec<ScoredChunk> {
        let tokens = tokenize(query);
        let query: Vec<(&str, f64)> = tokens.texts().map(|t| (t, self.idf(t))).collect();
        if query.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut scored: Vec<(ChunkId, f64)> = self
            .term_freq
            .iter()
            .map(|c| (c.chunk_id, self.score_chunk(c, &query)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            other => other,
        });
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (chunk_id, score))| ScoredChunk {
                chunk_id,
                score,
                rank: i + 1,
            })
            .collect()
    }
}

/// Free-function form of [`IndexStats::search`] for callers holding an optional index.
pub fn search(index: Option<&IndexStats>, query: &str, k: usize) -> Result<Vec<ScoredChunk>, RetrievalError> {
    index
        .map(|idx| idx.search(query, k))
        .ok_or(RetrievalError::IndexNotBuilt)
}
