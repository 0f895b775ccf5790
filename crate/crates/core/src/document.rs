//! Extracted documents and the character coordinate system every span refers to.
//!
//! Offsets count Unicode scalar values, never bytes. A document's *global* text
//! is its page texts joined with a single `'\n'`; the joining newline sits
//! between pages and belongs to neither page's coordinate space.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::retrieval::IndexStats;

/// Text of a single PDF page in reading order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageText {
    pub page_number: u32,
    pub text: String,
    pub char_count: usize,
}

impl PageText {
    pub fn new(page_number: u32, text: String) -> Self {
        let char_count = text.chars().count();
        Self {
            page_number,
            text,
            char_count,
        }
    }
}

/// A labelled reading section covering an inclusive page interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionRange {
    pub label: String,
    pub first_page: u32,
    pub last_page: u32,
}

impl SectionRange {
    pub fn contains_page(&self, page: u32) -> bool {
        (self.first_page..=self.last_page).contains(&page)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedDocument {
    pub doc_id: String,
    pub title: String,
    pub pages: Vec<PageText>,
    pub created_at: DateTime<Utc>,
    pub section_map: Vec<SectionRange>,
}

/// A half-open interval over a document, expressed in per-page coordinates.
///
/// `end_offset` is exclusive. A position equal to a page's `char_count` denotes
/// the page break that follows it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DocSpan {
    pub start_page: u32,
    pub start_offset: usize,
    pub end_page: u32,
    pub end_offset: usize,
}

impl DocSpan {
    pub fn single_page(page: u32, start: usize, end: usize) -> Self {
        Self {
            start_page: page,
            start_offset: start,
            end_page: page,
            end_offset: end,
        }
    }

    pub fn pages(&self) -> std::ops::RangeInclusive<u32> {
        self.start_page..=self.end_page
    }
}

impl ExtractedDocument {
    pub fn page(&self, page_number: u32) -> Option<&PageText> {
        let idx = page_number.checked_sub(1)? as usize;
        self.pages.get(idx)
    }

    /// Length of the global text, page separators included.
    pub fn total_chars(&self) -> usize {
        let content: usize = self.pages.iter().map(|p| p.char_count).sum();
        content + self.pages.len().saturating_sub(1)
    }

    pub fn full_text(&self) -> String {
        let mut out = String::new();
        for (i, page) in self.pages.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&page.text);
        }
        out
    }

    /// Global offset at which each page starts.
    pub fn page_bases(&self) -> Vec<usize> {
        let mut bases = Vec::with_capacity(self.pages.len());
        let mut next = 0;
        for page in &self.pages {
            bases.push(next);
            next += page.char_count + 1;
        }
        bases
    }

    /// Converts a global position to per-page coordinates. Positions that fall
    /// on a page break resolve to the end of the earlier page.
    pub fn to_page_position(&self, global: usize) -> Option<(u32, usize)> {
        let mut base = 0;
        for page in &self.pages {
            if global <= base + page.char_count {
                return Some((page.page_number, global - base));
            }
            base += page.char_count + 1;
        }
        None
    }

    pub fn to_global(&self, page_number: u32, offset: usize) -> Option<usize> {
        let page = self.page(page_number)?;
        if offset > page.char_count {
            return None;
        }
        let base: usize = self.pages[..(page_number - 1) as usize]
            .iter()
            .map(|p| p.char_count + 1)
            .sum();
        Some(base + offset)
    }

    pub fn span_from_global(&self, start: usize, end: usize) -> Option<DocSpan> {
        let (start_page, start_offset) = self.to_page_position(start)?;
        let (end_page, end_offset) = self.to_page_position(end)?;
        Some(DocSpan {
            start_page,
            start_offset,
            end_page,
            end_offset,
        })
    }

    pub fn span_to_global(&self, span: &DocSpan) -> Option<(usize, usize)> {
        let start = self.to_global(span.start_page, span.start_offset)?;
        let end = self.to_global(span.end_page, span.end_offset)?;
        (start <= end).then_some((start, end))
    }

    /// Text covered by `span`, with page breaks rendered as `'\n'`.
    pub fn slice(&self, span: &DocSpan) -> Option<String> {
        let (start, end) = self.span_to_global(span)?;
        let full = self.full_text();
        Some(full.chars().skip(start).take(end - start).collect())
    }

    pub fn section(&self, label: &str) -> Option<&SectionRange> {
        self.section_map.iter().find(|s| s.label == label)
    }
}

/// Chunk identifier, ordered numerically and rendered as `c<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkId(pub u32);

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid chunk id {0:?}")]
pub struct ParseChunkIdError(pub String);

impl FromStr for ChunkId {
    type Err = ParseChunkIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('c')
            .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|rest| rest.parse().ok())
            .map(ChunkId)
            .ok_or_else(|| ParseChunkIdError(s.to_string()))
    }
}

impl Serialize for ChunkId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChunkId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: ChunkId,
    pub doc_id: String,
    pub span: DocSpan,
    pub text: String,
    pub token_count: usize,
}

impl PartialOrd for Chunk {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Chunk {
    fn cmp(&self, other: &Self) -> Ordering {
        self.chunk_id.cmp(&other.chunk_id)
    }
}

/// A document together with its chunks and retrieval index.
#[derive(Debug, Clone)]
pub struct IndexedDocument {
    pub document: ExtractedDocument,
    pub chunks: Vec<Chunk>,
    pub index: IndexStats,
}

impl IndexedDocument {
    pub fn chunk(&self, id: ChunkId) -> Option<&Chunk> {
        self.chunks
            .binary_search_by(|c| c.chunk_id.cmp(&id))
            .ok()
            .map(|i| &self.chunks[i])
    }

    /// Chunks touching any page of the section.
    pub fn section_chunks(&self, section: &SectionRange) -> Vec<&Chunk> {
        self.chunks
            .iter()
            .filter(|c| c.span.start_page <= section.last_page && c.span.end_page >= section.first_page)
            .collect()
    }
}
