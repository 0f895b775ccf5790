use super::IngestError;
use crate::document::{Chunk, ChunkId, ExtractedDocument};
use crate::retrieval::tokenize;

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_CHUNK_OVERLAP: usize = 200;

/// Slices the document's global text into fixed windows of `size` characters
/// starting every `size - overlap` characters. The last window stops at the end
/// of the text.
pub fn chunk(doc: &ExtractedDocument, size: usize, overlap: usize) -> Result<Vec<Chunk>, IngestError> {
    if size == 0 || overlap >= size {
        return Err(IngestError::InvalidChunking { size, overlap });
    }
    let text = doc.full_text();
    // Byte offset of every char boundary, including the end of the text.
    let boundaries: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let total = boundaries.len() - 1;
    if doc.pages.iter().all(|p| p.char_count == 0) {
        return Err(IngestError::EmptyDocument);
    }

    let stride = size - overlap;
    let mut chunks = Vec::with_capacity(total / stride + 1);
    let mut start = 0;
    loop {
        let end = (start + size).min(total);
        let slice = &text[boundaries[start]..boundaries[end]];
        let span = doc
            .span_from_global(start, end)
            .expect("chunk bounds lie within the document");
        chunks.push(Chunk {
            chunk_id: ChunkId(chunks.len() as u32),
            doc_id: doc.doc_id.clone(),
            span,
            text: slice.to_string(),
            token_count: tokenize(slice).len(),
        });
        if end == total {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}
