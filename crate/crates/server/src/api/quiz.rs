use axum::extract::{Path, State};
use axum::Json;
use serde::{Deserialize, Serialize};
use textbook_core::quiz::{AnswerResult, LastResult, QuizCard, QuizError, SectionQuizState};

use crate::error::{ApiError, ApiResult};
use crate::state::SharedState;
use crate::storage::is_safe_id;

fn check_learner(id: &str) -> ApiResult<()> {
    if is_safe_id(id) {
        Ok(())
    } else {
        Err(ApiError::bad_request("learner_id must be 1-128 letters, digits, '-' or '_'"))
    }
}

fn lock_key(learner_id: &str, doc_id: &str, section: &str) -> String {
    format!("quiz:{learner_id}:{doc_id}:{section}")
}

#[derive(Debug, Deserialize)]
pub struct NextBody {
    pub learner_id: String,
    pub section: String,
}

/// A card as shown before the learner answers: no answer key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardView {
    pub card_id: String,
    pub doc_id: String,
    pub section_label: String,
    pub question: String,
    #[serde(rename = "box")]
    pub box_number: u8,
    pub last_result: LastResult,
    pub seen_count: u32,
    pub created_ordinal: u64,
    pub generated: bool,
}

impl CardView {
    fn new(card: QuizCard, generated: bool) -> Self {
        Self {
            card_id: card.card_id,
            doc_id: card.doc_id,
            section_label: card.section_label,
            question: card.question,
            box_number: card.box_number,
            last_result: card.last_result,
            seen_count: card.seen_count,
            created_ordinal: card.created_ordinal,
            generated,
        }
    }
}

/// `POST /documents/{id}/quiz/next`
pub async fn next(
    State(state): State<SharedState>,
    Path(doc_id): Path<String>,
    Json(body): Json<NextBody>,
) -> ApiResult<Json<CardView>> {
    check_learner(&body.learner_id)?;
    let doc = state.document(&doc_id)?;
    let section = doc
        .document
        .section(&body.section)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format_args!("section {:?}", body.section)))?;
    let key = lock_key(&body.learner_id, &doc_id, &section.label);
    let _guard = state.locks.lock(&key).await;

    let mut quiz = match state.storage.load_quiz(&body.learner_id, &doc_id, &section.label)? {
        Some(q) => q,
        None => SectionQuizState::new(doc_id.clone(), section.label.clone(), state.ids.section_seed(&key), state.config.quiz.clone())
            .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?,
    };
    let chunks = doc.section_chunks(&section);
    let ids = &state.ids;
    let result = quiz.next_card(&chunks, state.gateway.as_ref(), &mut || ids.next()).await;
    // The draw counter advanced even on failure; keep it so retries draw afresh.
    state.storage.save_quiz(&body.learner_id, &quiz)?;
    match result {
        Ok(next) => Ok(Json(CardView::new(next.card, next.generated))),
        Err(QuizError::GenerationFailed(msg)) => Err(ApiError::bad_gateway(format!("quiz generation failed: {msg}"))),
        Err(QuizError::EmptySection) => Err(ApiError::bad_request("section has no text to quiz on")),
        Err(e) => Err(ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

#[derive(Debug, Deserialize)]
pub struct AnswerBody {
    pub learner_id: String,
    pub result: AnswerResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerReply {
    #[serde(rename = "box")]
    pub box_number: u8,
    pub answer_key: String,
}

/// `POST /quiz/{card_id}/answer`: records a self-reported result and reveals the key.
pub async fn answer(
    State(state): State<SharedState>,
    Path(card_id): Path<String>,
    Json(body): Json<AnswerBody>,
) -> ApiResult<Json<AnswerReply>> {
    check_learner(&body.learner_id)?;
    let not_found = || ApiError::not_found(format_args!("card {card_id}"));
    let (doc_id, section) = state.storage.find_card(&body.learner_id, &card_id)?.ok_or_else(not_found)?;
    let _guard = state.locks.lock(&lock_key(&body.learner_id, &doc_id, &section)).await;
    let mut quiz = state
        .storage
        .load_quiz(&body.learner_id, &doc_id, &section)?
        .ok_or_else(not_found)?;
    let card = quiz.record_answer(&card_id, body.result).map_err(|_| not_found())?;
    state.storage.save_quiz(&body.learner_id, &quiz)?;
    Ok(Json(AnswerReply { box_number: card.box_number, answer_key: card.answer_key }))
}
