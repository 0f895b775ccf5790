use std::convert::Infallible;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, Sse};
use axum::Json;
use chrono::Utc;
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::mpsc;
use textbook_core::document::{DocSpan, IndexedDocument};
use textbook_core::llm::{ChatMessage, FinishReason};
use textbook_core::rag::{ActionKind, AgentAction, Answer, LearnerProfile};

use crate::error::{ApiError, ApiResult};
use crate::state::SharedState;
use crate::storage::{is_safe_id, Session, SessionHeader};

pub type EventStream = Sse<Box<dyn Stream<Item = Result<Event, Infallible>> + Send + Unpin>>;

fn event_stream(rx: mpsc::UnboundedReceiver<Event>) -> EventStream {
    let stream = stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok(e), rx)) });
    Sse::new(Box::new(Box::pin(stream)))
}

fn delta_event(text: &str) -> Event {
    Event::default().event("delta").data(json!({ "text": text }).to_string())
}

/// `answer` for a completed reply, `error` when the gateway failed.
fn final_event(answer: &Answer) -> Event {
    if answer.finish_reason == FinishReason::Error {
        let message = answer.error.clone().unwrap_or_else(|| "language model failure".into());
        Event::default()
            .event("error")
            .data(json!({ "status": 502, "error": message, "answer_id": answer.answer_id }).to_string())
    } else {
        Event::default()
            .event("answer")
            .data(serde_json::to_string(answer).expect("answers serialize"))
    }
}

fn internal_error_event(message: &str) -> Event {
    Event::default()
        .event("error")
        .data(json!({ "status": 500, "error": message }).to_string())
}

fn profile_for(state: &SharedState, learner_id: Option<&str>) -> LearnerProfile {
    let Some(id) = learner_id else {
        return LearnerProfile::anonymous();
    };
    match state.storage.load_profile(id) {
        Ok(Some(p)) => p,
        Ok(None) => LearnerProfile { learner_id: id.to_string(), ..LearnerProfile::default() },
        Err(e) => {
            tracing::warn!(error = %e, learner_id = id, "unreadable profile, answering without it");
            LearnerProfile { learner_id: id.to_string(), ..LearnerProfile::default() }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub learner_id: String,
    pub doc_id: String,
}

pub async fn create_session(
    State(state): State<SharedState>,
    Json(body): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    if !is_safe_id(&body.learner_id) {
        return Err(ApiError::bad_request("learner_id must be 1-128 letters, digits, '-' or '_'"));
    }
    if state.storage.manifest(&body.doc_id)?.is_none() {
        return Err(ApiError::not_found(format_args!("document {}", body.doc_id)));
    }
    let session = Session {
        header: SessionHeader {
            session_id: state.ids.next(),
            learner_id: body.learner_id,
            doc_id: body.doc_id,
            created_at: Utc::now(),
        },
        history: Vec::new(),
    };
    state.storage.save_session(&session)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": session.header.session_id }))))
}

pub async fn get_session(State(state): State<SharedState>, Path(session_id): Path<String>) -> ApiResult<Json<Session>> {
    state
        .storage
        .load_session(&session_id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format_args!("session {session_id}")))
}

#[derive(Debug, Deserialize)]
pub struct ChatBody {
    pub query: String,
}

/// `POST /sessions/{id}/chat`: streams `delta` events, then `answer` (or
/// `error`), and appends the exchange to the session history.
pub async fn chat(
    State(state): State<SharedState>,
    Path(session_id): Path<String>,
    Json(body): Json<ChatBody>,
) -> ApiResult<EventStream> {
    if body.query.trim().is_empty() {
        return Err(ApiError::bad_request("query must not be empty"));
    }
    let session = state
        .storage
        .load_session(&session_id)?
        .ok_or_else(|| ApiError::not_found(format_args!("session {session_id}")))?;
    let doc = state.document(&session.header.doc_id)?;

    let (tx, rx) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        let _guard = state.locks.lock(&format!("session:{session_id}")).await;
        let mut session = match state.storage.load_session(&session_id) {
            Ok(Some(s)) => s,
            Ok(None) => {
                let _ = tx.send(internal_error_event("session disappeared"));
                return;
            }
            Err(e) => {
                let _ = tx.send(internal_error_event(&e.to_string()));
                return;
            }
        };
        let profile = profile_for(&state, Some(&session.header.learner_id));
        let action = AgentAction::chat(body.query.clone());
        let sink_tx = tx.clone();
        let result = state
            .orchestrator
            .answer(&action, &doc, &profile, &session.history, state.ids.next(), &mut |s: &str| {
                let _ = sink_tx.send(delta_event(s));
            })
            .await;
        match result {
            Ok(answer) => {
                if answer.finish_reason != FinishReason::Error {
                    session.history.push(ChatMessage::user(body.query));
                    session.history.push(ChatMessage::assistant(answer.text.clone()));
                    if let Err(e) = state.storage.save_session(&session) {
                        let _ = tx.send(internal_error_event(&e.to_string()));
                        return;
                    }
                }
                let _ = tx.send(final_event(&answer));
            }
            Err(e) => {
                let _ = tx.send(internal_error_event(&e.to_string()));
            }
        }
    });
    Ok(event_stream(rx))
}

/// Selection on a single page, or a full span whose pages must coincide.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum SelectionBody {
    Page { page: u32, start: usize, end: usize },
    Span(DocSpan),
}

#[derive(Debug, Deserialize)]
pub struct ActionBody {
    pub kind: ActionKind,
    #[serde(default)]
    pub selection: Option<SelectionBody>,
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub learner_id: Option<String>,
}

/// Checks that a selection lies on one page and covers non-blank text.
pub fn resolve_selection(doc: &IndexedDocument, selection: SelectionBody) -> ApiResult<DocSpan> {
    let span = match selection {
        SelectionBody::Page { page, start, end } => DocSpan::single_page(page, start, end),
        SelectionBody::Span(span) => span,
    };
    if span.start_page != span.end_page {
        return Err(ApiError::bad_request("selections must stay on one page"));
    }
    let page = doc
        .document
        .page(span.start_page)
        .ok_or_else(|| ApiError::bad_request(format!("page {} is out of range", span.start_page)))?;
    if span.start_offset >= span.end_offset || span.end_offset > page.char_count {
        return Err(ApiError::bad_request("selection is empty or outside the page"));
    }
    let text = doc.document.slice(&span).unwrap_or_default();
    if text.trim().is_empty() {
        return Err(ApiError::bad_request("selection covers no text"));
    }
    Ok(span)
}

/// `POST /documents/{id}/actions`: summarize, explain or quiz a selection.
/// The passage is always sliced from the stored document.
pub async fn action(
    State(state): State<SharedState>,
    Path(doc_id): Path<String>,
    Json(body): Json<ActionBody>,
) -> ApiResult<EventStream> {
    let doc = state.document(&doc_id)?;
    if body.kind == ActionKind::Chat {
        return Err(ApiError::bad_request("chat goes through /sessions/{id}/chat"));
    }
    if let Some(id) = &body.learner_id {
        if !is_safe_id(id) {
            return Err(ApiError::bad_request("learner_id must be 1-128 letters, digits, '-' or '_'"));
        }
    }
    let selection = match body.selection {
        Some(sel) => Some(resolve_selection(&doc, sel)?),
        None if body.kind == ActionKind::QuizGenerate => None,
        None => return Err(ApiError::bad_request("this action needs a selection")),
    };
    let action = AgentAction { kind: body.kind, selection, query: body.query };

    let (tx, rx) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        let profile = profile_for(&state, body.learner_id.as_deref());
        let sink_tx = tx.clone();
        let result = state
            .orchestrator
            .answer(&action, &doc, &profile, &[], state.ids.next(), &mut |s: &str| {
                let _ = sink_tx.send(delta_event(s));
            })
            .await;
        let _ = tx.send(match result {
            Ok(answer) => final_event(&answer),
            Err(e) => internal_error_event(&e.to_string()),
        });
    });
    Ok(event_stream(rx))
}
