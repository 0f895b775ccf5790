//! Turning uploaded PDFs into documents and retrieval chunks.

mod chunk;
mod extract;
pub mod pdfgen;

pub use chunk::{chunk, DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE};
pub use extract::{extract, extract_with, ExtractOptions};

use crate::document::{ExtractedDocument, IndexedDocument};
use crate::retrieval::build_index;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed PDF: {0}")]
    MalformedPdf(String),
    #[error("the PDF has no extractable text layer")]
    NoTextLayer,
    #[error("document has no text to chunk")]
    EmptyDocument,
    #[error("chunk overlap {overlap} must be smaller than chunk size {size}")]
    InvalidChunking { size: usize, overlap: usize },
}

/// Chunks and indexes an extracted document.
pub fn index_document(
    document: ExtractedDocument,
    chunk_size: usize,
    chunk_overlap: usize,
) -> Result<IndexedDocument, IngestError> {
    let chunks = chunk(&document, chunk_size, chunk_overlap)?;
    let index = build_index(&chunks).map_err(|_| IngestError::EmptyDocument)?;
    Ok(IndexedDocument { document, chunks, index })
}
