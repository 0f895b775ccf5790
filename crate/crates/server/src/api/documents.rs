use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::Json;
use chrono::Utc;
use textbook_core::document::PageText;
use textbook_core::ingest::{extract_with, index_document, ExtractOptions, IngestError};

use crate::error::{ApiError, ApiResult};
use crate::state::SharedState;
use crate::storage::Manifest;

struct Upload {
    bytes: Bytes,
    file_name: Option<String>,
}

async fn read_upload(state: &SharedState, req: Request) -> ApiResult<Upload> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if !is_multipart {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        return Ok(Upload { bytes, file_name: None });
    }
    let mut multipart = Multipart::from_request(req, state)
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?
    {
        if field.file_name().is_none() && field.name() != Some("file") {
            continue;
        }
        let file_name = field.file_name().map(str::to_string);
        let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        return Ok(Upload { bytes, file_name });
    }
    Err(ApiError::bad_request("multipart body has no file field"))
}

fn title_from_file_name(name: &str) -> String {
    let stem = name.rsplit(['/', '\\']).next().unwrap_or(name);
    stem.strip_suffix(".pdf").or_else(|| stem.strip_suffix(".PDF")).unwrap_or(stem).to_string()
}

/// `POST /documents`: extract, chunk, index, then publish atomically.
pub async fn upload(State(state): State<SharedState>, req: Request) -> ApiResult<(StatusCode, Json<Manifest>)> {
    let upload = read_upload(&state, req).await?;
    if upload.bytes.is_empty() {
        return Err(ApiError::bad_request("empty upload"));
    }
    let doc_id = state.ids.next();
    let options = ExtractOptions {
        doc_id: Some(doc_id.clone()),
        fallback_title: upload.file_name.as_deref().map(title_from_file_name),
    };
    let (chunk_size, chunk_overlap) = (state.config.chunk_size, state.config.chunk_overlap);
    let indexed = tokio::task::spawn_blocking(move || {
        let document = extract_with(&upload.bytes, &options)?;
        index_document(document, chunk_size, chunk_overlap)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| match e {
        IngestError::InvalidChunking { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        other => ApiError::bad_request(other.to_string()),
    })?;

    let manifest = Manifest {
        doc_id: doc_id.clone(),
        title: indexed.document.title.clone(),
        pages: indexed.document.pages.len() as u32,
        sections: indexed.document.section_map.clone(),
        chunk_count: indexed.chunks.len(),
        chunk_size,
        chunk_overlap,
        created_at: Utc::now(),
    };
    let storage = state.storage.clone();
    let delay = state.config.ingest_stage_delay;
    let staged = {
        let manifest = manifest.clone();
        let indexed = indexed.clone();
        tokio::task::spawn_blocking(move || storage.stage_document(&indexed, &manifest))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    };
    if let Err(e) = staged {
        state.storage.discard_staging(&doc_id);
        return Err(e.into());
    }
    if !delay.is_zero() {
        tokio::time::sleep(delay).await;
    }
    if let Err(e) = state.storage.publish_document(&doc_id) {
        state.storage.discard_staging(&doc_id);
        return Err(e.into());
    }
    state.cache_document(indexed);
    tracing::info!(doc_id = %doc_id, pages = manifest.pages, chunks = manifest.chunk_count, "document ingested");
    Ok((StatusCode::CREATED, Json(manifest)))
}

pub async fn list(State(state): State<SharedState>) -> ApiResult<Json<Vec<Manifest>>> {
    Ok(Json(state.storage.list_documents()?))
}

pub async fn get(State(state): State<SharedState>, Path(doc_id): Path<String>) -> ApiResult<Json<Manifest>> {
    state
        .storage
        .manifest(&doc_id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format_args!("document {doc_id}")))
}

pub async fn page(State(state): State<SharedState>, Path((doc_id, n)): Path<(String, u32)>) -> ApiResult<Json<PageText>> {
    let doc = state.document(&doc_id)?;
    doc.document
        .page(n)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format_args!("page {n} of document {doc_id}")))
}
