//! Core library of a self-hosted reading assistant: PDF ingestion, lexical
//! retrieval, reference location, a model gateway, retrieval-augmented
//! answering and a Leitner quiz engine.

pub mod document;
pub mod ingest;
pub mod llm;
pub mod locator;
pub mod prompt;
pub mod quiz;
pub mod rag;
pub mod retrieval;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/locator.md")]
    mod locator {}
    #[doc = include_str!("../../../book/src/gateway.md")]
    mod gateway {}
    #[doc = include_str!("../../../book/src/rag.md")]
    mod rag {}
    #[doc = include_str!("../../../book/src/quiz.md")]
    mod quiz {}
}
