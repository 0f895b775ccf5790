//! Locating reference excerpts inside an extracted document.
//!
//! Matching first tries an exact substring search over case-folded,
//! whitespace-collapsed text. When that fails it slides a window of the
//! needle's token count across the document tokens and keeps the window with
//! the highest multiset Jaccard similarity, accepting it at or above `tau`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::document::ExtractedDocument;
use crate::retrieval::tokenize;

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Exact,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub page: u32,
    pub start: usize,
    pub end: usize,
    pub confidence: f64,
    pub method: MatchMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateResult {
    pub spans: Vec<HighlightSpan>,
    pub located: bool,
}

impl LocateResult {
    fn not_found() -> Self {
        Self {
            spans: Vec::new(),
            located: false,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LocateError {
    #[error("needle contains no tokens")]
    EmptyNeedle,
}

/// Case-folds, collapses whitespace runs to one space and trims. The returned
/// map sends each normalized char index to the char offset in `text` it came
/// from; a collapsed space maps to the first char of its whitespace run.
pub fn normalize(text: &str) -> (String, Vec<usize>) {
    let mut out = String::with_capacity(text.len());
    let mut map = Vec::with_capacity(text.len());
    let mut pending_space: Option<usize> = None;
    for (offset, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !map.is_empty() && pending_space.is_none() {
                pending_space = Some(offset);
            }
            continue;
        }
        if let Some(ws) = pending_space.take() {
            out.push(' ');
            map.push(ws);
        }
        for folded in c.to_lowercase() {
            out.push(folded);
            map.push(offset);
        }
    }
    (out, map)
}

/// Normalized text of a whole document. `None` marks the space standing in for
/// a page break.
struct NormalizedDocument {
    text: String,
    origins: Vec<Option<(u32, usize)>>,
}

fn normalize_document(doc: &ExtractedDocument) -> NormalizedDocument {
    let mut text = String::new();
    let mut origins = Vec::new();
    for page in &doc.pages {
        let (norm, map) = normalize(&page.text);
        if norm.is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push(' ');
            origins.push(None);
        }
        text.push_str(&norm);
        origins.extend(map.into_iter().map(|off| Some((page.page_number, off))));
    }
    NormalizedDocument { text, origins }
}

/// Groups original positions by page into one span per page.
fn spans_from_positions(
    positions: impl Iterator<Item = (u32, usize, usize)>,
    confidence: f64,
    method: MatchMethod,
) -> Vec<HighlightSpan> {
    let mut spans: Vec<HighlightSpan> = Vec::new();
    for (page, start, end) in positions {
        match spans.last_mut() {
            Some(last) if last.page == page => {
                last.start = last.start.min(start);
                last.end = last.end.max(end);
            }
            _ => spans.push(HighlightSpan {
                page,
                start,
                end,
                confidence,
                method,
            }),
        }
    }
    spans.sort_by_key(|s| (s.page, s.start));
    spans
}

pub fn locate(doc: &ExtractedDocument, needle: &str, tau: f64) -> Result<LocateResult, LocateError> {
    let needle_tokens = tokenize(needle);
    if needle_tokens.is_empty() {
        return Err(LocateError::EmptyNeedle);
    }
    if let Some(result) = locate_exact(doc, needle) {
        return Ok(result);
    }
    Ok(locate_fuzzy(doc, needle_tokens.texts().collect(), tau))
}

fn locate_exact(doc: &ExtractedDocument, needle: &str) -> Option<LocateResult> {
    let (norm_needle, _) = normalize(needle);
    let haystack = normalize_document(doc);
    let byte_pos = haystack.text.find(&norm_needle)?;
    let start = haystack.text[..byte_pos].chars().count();
    let len = norm_needle.chars().count();
    let positions = haystack.origins[start..start + len]
        .iter()
        .flatten()
        .map(|&(page, off)| (page, off, off + 1));
    let spans = spans_from_positions(positions, 1.0, MatchMethod::Exact);
    Some(LocateResult {
        located: !spans.is_empty(),
        spans,
    })
}

fn locate_fuzzy(doc: &ExtractedDocument, needle: Vec<&str>, tau: f64) -> LocateResult {
    struct DocToken {
        id: usize,
        page: u32,
        start: usize,
        end: usize,
    }

    let mut vocab: HashMap<String, usize> = HashMap::new();
    let mut intern = |t: &str| {
        let next = vocab.len();
        *vocab.entry(t.to_string()).or_insert(next)
    };
    let needle_ids: Vec<usize> = needle.iter().map(|t| intern(t)).collect();
    let doc_tokens: Vec<DocToken> = doc
        .pages
        .iter()
        .flat_map(|page| {
            tokenize(&page.text)
                .tokens
                .into_iter()
                .map(move |t| (page.page_number, t))
        })
        .map(|(page, t)| DocToken {
            id: intern(&t.text),
            page,
            start: t.span.start,
            end: t.span.end,
        })
        .collect();
    if doc_tokens.is_empty() {
        return LocateResult::not_found();
    }

    let mut needle_counts = vec![0i64; vocab.len()];
    for &id in &needle_ids {
        needle_counts[id] += 1;
    }
    let width = needle_ids.len().min(doc_tokens.len());
    let mut window_counts = vec![0i64; vocab.len()];
    let mut intersection = 0i64;
    let add = |id: usize, window: &mut [i64], inter: &mut i64| {
        if window[id] < needle_counts[id] {
            *inter += 1;
        }
        window[id] += 1;
    };
    let remove = |id: usize, window: &mut [i64], inter: &mut i64| {
        window[id] -= 1;
        if window[id] < needle_counts[id] {
            *inter -= 1;
        }
    };

    for tok in &doc_tokens[..width] {
        add(tok.id, &mut window_counts, &mut intersection);
    }
    let total = (width + needle_ids.len()) as i64;
    let jaccard = |inter: i64| inter as f64 / (total - inter) as f64;
    let mut best = (jaccard(intersection), 0usize);
    for start in 1..=doc_tokens.len() - width {
        remove(doc_tokens[start - 1].id, &mut window_counts, &mut intersection);
        add(doc_tokens[start + width - 1].id, &mut window_counts, &mut intersection);
        let score = jaccard(intersection);
        if score > best.0 {
            best = (score, start);
        }
    }

    let (score, start) = best;
    if score < tau || score <= 0.0 {
        return LocateResult::not_found();
    }
    let positions = doc_tokens[start..start + width]
        .iter()
        .map(|t| (t.page, t.start, t.end));
    let spans = spans_from_positions(positions, score, MatchMethod::Fuzzy);
    LocateResult { located: true, spans }
}
