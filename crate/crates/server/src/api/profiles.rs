use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use textbook_core::rag::LearnerProfile;

use crate::error::{ApiError, ApiResult};
use crate::state::SharedState;
use crate::storage::is_safe_id;

pub const MAX_INTERESTS: usize = 20;
pub const MAX_INTEREST_CHARS: usize = 64;

#[derive(Debug, Deserialize)]
pub struct ProfileBody {
    pub interests: Vec<String>,
    #[serde(default)]
    pub display_name: Option<String>,
}

pub fn validate_interests(interests: &[String]) -> Result<(), String> {
    if interests.len() > MAX_INTERESTS {
        return Err(format!("at most {MAX_INTERESTS} interests are allowed"));
    }
    for interest in interests {
        if interest.trim().is_empty() {
            return Err("interests must not be blank".into());
        }
        if interest.chars().count() > MAX_INTEREST_CHARS {
            return Err(format!("interests are limited to {MAX_INTEREST_CHARS} characters"));
        }
    }
    Ok(())
}

/// `PUT /profiles/{learner_id}`
pub async fn put(
    State(state): State<SharedState>,
    Path(learner_id): Path<String>,
    Json(body): Json<ProfileBody>,
) -> ApiResult<StatusCode> {
    if !is_safe_id(&learner_id) {
        return Err(ApiError::bad_request("learner_id must be 1-128 letters, digits, '-' or '_'"));
    }
    validate_interests(&body.interests).map_err(ApiError::bad_request)?;
    let profile = LearnerProfile {
        learner_id,
        interests: body.interests.iter().map(|s| s.trim().to_string()).collect(),
        display_name: body.display_name,
    };
    state.storage.save_profile(&profile)?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn get(State(state): State<SharedState>, Path(learner_id): Path<String>) -> ApiResult<Json<LearnerProfile>> {
    if !is_safe_id(&learner_id) {
        return Err(ApiError::not_found(format_args!("profile {learner_id}")));
    }
    state
        .storage
        .load_profile(&learner_id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format_args!("profile {learner_id}")))
}
