//! HTTP routes. JSON bodies use snake_case; errors are `{"error": <message>}`.

pub mod chat;
pub mod documents;
pub mod profiles;
pub mod quiz;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post, put};
use axum::Router;

use crate::state::SharedState;

pub fn router(state: SharedState) -> Router {
    let upload_limit = state.config.max_upload_bytes;
    Router::new()
        .route(
            "/documents",
            post(documents::upload)
                .layer(DefaultBodyLimit::max(upload_limit))
                .get(documents::list),
        )
        .route("/documents/{id}", get(documents::get))
        .route("/documents/{id}/pages/{n}", get(documents::page))
        .route("/documents/{id}/actions", post(chat::action))
        .route("/documents/{id}/quiz/next", post(quiz::next))
        .route("/sessions", post(chat::create_session))
        .route("/sessions/{id}", get(chat::get_session))
        .route("/sessions/{id}/chat", post(chat::chat))
        .route("/quiz/{card_id}/answer", post(quiz::answer))
        .route("/profiles/{learner_id}", put(profiles::put).get(profiles::get))
        .route("/health", get(|| async { "ok" }))
        .with_state(state)
}
