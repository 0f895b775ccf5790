//! Retrieval-augmented answering: prompt assembly, streamed completion,
//! reference extraction and in-document highlighting.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::document::{Chunk, ChunkId, DocSpan, IndexedDocument};
use crate::llm::{
    count_tokens, ChatMessage, CompletionDelta, CompletionRequest, FinishReason, LlmGateway, Role, DEFAULT_TEMPERATURE,
};
use crate::locator::{locate, HighlightSpan, DEFAULT_TAU};
use crate::prompt;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub learner_id: String,
    #[serde(default)]
    pub interests: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl LearnerProfile {
    pub fn anonymous() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Chat,
    Summarize,
    Explain,
    QuizGenerate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub kind: ActionKind,
    #[serde(default)]
    pub selection: Option<DocSpan>,
    #[serde(default)]
    pub query: Option<String>,
}

impl AgentAction {
    pub fn chat(query: impl Into<String>) -> Self {
        Self { kind: ActionKind::Chat, selection: None, query: Some(query.into()) }
    }

    pub fn summarize(selection: DocSpan) -> Self {
        Self { kind: ActionKind::Summarize, selection: Some(selection), query: None }
    }

    pub fn explain(selection: DocSpan) -> Self {
        Self { kind: ActionKind::Explain, selection: Some(selection), query: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub chunk_id: ChunkId,
    pub verbatim: String,
    pub summary: String,
    pub score: f64,
    pub spans: Vec<HighlightSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub answer_id: String,
    pub text: String,
    pub references: Vec<Reference>,
    pub finish_reason: FinishReason,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefSummaryMode {
    /// First sentence of the source chunk.
    #[default]
    FirstSentence,
    /// A separate non-streamed one-sentence completion per reference.
    Llm,
}

impl RefSummaryMode {
    pub fn from_env_value(v: Option<&str>) -> Self {
        match v.map(str::trim) {
            Some(s) if s.eq_ignore_ascii_case("llm") => RefSummaryMode::Llm,
            _ => RefSummaryMode::FirstSentence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagConfig {
    /// Token budget for the whole prompt, measured with [`count_tokens`].
    pub prompt_budget: usize,
    pub history_window: usize,
    pub max_output_tokens: u32,
    pub temperature: f32,
    pub retrieve_k: usize,
    pub fallback_references: usize,
    pub verbatim_clip: usize,
    pub quiz_pairs: usize,
    pub tau: f64,
    pub ref_summary: RefSummaryMode,
}

impl Default for RagConfig {
    fn default() -> Self {
        Self {
            prompt_budget: 6000,
            history_window: 10,
            max_output_tokens: 512,
            temperature: DEFAULT_TEMPERATURE,
            retrieve_k: 5,
            fallback_references: 3,
            verbatim_clip: 400,
            quiz_pairs: 3,
            tau: DEFAULT_TAU,
            ref_summary: RefSummaryMode::FirstSentence,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RagError {
    #[error("this action needs a text selection")]
    SelectionMissing,
    #[error("chat needs a query")]
    QueryMissing,
    #[error("selection does not resolve to text in the document")]
    InvalidSelection,
    #[error("document is not indexed")]
    NotIndexed,
}

fn system_message(profile: &LearnerProfile) -> String {
    let mut system = format!("{}\n{}", prompt::PERSONA, prompt::GROUNDING);
    let interests: Vec<&str> = profile
        .interests
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if !interests.is_empty() {
        system.push('\n');
        system.push_str(prompt::PERSONALIZATION_PREFIX);
        system.push_str(&interests.join(", "));
    }
    system
}

fn prompt_tokens(messages: &[ChatMessage]) -> usize {
    let joined: Vec<&str> = messages.iter().map(|m| m.content.as_str()).collect();
    count_tokens(&joined.join("\n"))
}

/// Builds the completion request for an action.
///
/// Context blocks go at the end of the system message in rank order. Blocks
/// are added while the whole prompt stays within `config.prompt_budget`; the
/// first block that would overflow it and every lower-ranked block are dropped.
pub fn assemble_prompt(
    action: &AgentAction,
    selection_text: Option<&str>,
    retrieved: &[(&Chunk, f64)],
    profile: &LearnerProfile,
    history: &[ChatMessage],
    config: &RagConfig,
) -> Result<CompletionRequest, RagError> {
    let selection = || {
        selection_text
            .filter(|s| !s.trim().is_empty())
            .ok_or(RagError::SelectionMissing)
    };
    let mut tail: Vec<ChatMessage> = Vec::new();
    match action.kind {
        ActionKind::Chat => {
            let query = action
                .query
                .as_deref()
                .filter(|q| !q.trim().is_empty())
                .ok_or(RagError::QueryMissing)?;
            let dialogue: Vec<&ChatMessage> = history.iter().filter(|m| m.role != Role::System).collect();
            let skip = dialogue.len().saturating_sub(config.history_window);
            tail.extend(dialogue[skip..].iter().map(|m| (*m).clone()));
            tail.push(ChatMessage::user(query));
        }
        ActionKind::Summarize => {
            tail.push(ChatMessage::user(format!("{}\n{}", prompt::SUMMARIZE_PREAMBLE, selection()?)));
        }
        ActionKind::Explain => {
            tail.push(ChatMessage::user(format!("{}\n{}", prompt::EXPLAIN_PREAMBLE, selection()?)));
        }
        ActionKind::QuizGenerate => {
            let scope = selection_text
                .or(action.query.as_deref())
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.split_whitespace().take(12).collect::<Vec<_>>().join(" "))
                .unwrap_or_else(|| "the provided context".to_string());
            tail.push(ChatMessage::user(prompt::quiz_instruction(config.quiz_pairs, &scope, &[])));
        }
    }

    let mut system = system_message(profile);
    for (included, (chunk, _)) in retrieved.iter().enumerate() {
        let header = if included == 0 {
            format!("\n\n{}\n", prompt::CONTEXT_HEADER)
        } else {
            "\n\n".to_string()
        };
        let candidate = format!("{system}{header}{}", prompt::render_block(chunk.chunk_id, &chunk.text));
        let mut messages = vec![ChatMessage::system(candidate.clone())];
        messages.extend(tail.iter().cloned());
        if prompt_tokens(&messages) > config.prompt_budget {
            break;
        }
        system = candidate;
    }

    let mut messages = vec![ChatMessage::system(system)];
    messages.extend(tail);
    Ok(CompletionRequest {
        messages,
        max_output_tokens: config.max_output_tokens,
        temperature: config.temperature,
        stream: true,
    })
}

/// Holds back a trailing `REFS:` line (and trailing whitespace) while a reply
/// streams, so the visible fragments never include the trailer.
#[derive(Debug, Default)]
pub struct TrailerFilter {
    text: String,
    emitted: usize,
}

/// Byte index where a possible trailer (or trailing whitespace) begins.
fn trailer_cut(text: &str) -> usize {
    let line_start = text.rfind('\n').map(|i| i + 1).unwrap_or(0);
    let last_line = text[line_start..].trim_start();
    let maybe_trailer = last_line.starts_with(prompt::TRAILER_PREFIX) || prompt::TRAILER_PREFIX.starts_with(last_line);
    let keep_to = if maybe_trailer { line_start } else { text.len() };
    text[..keep_to].trim_end().len()
}

impl TrailerFilter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a raw fragment and returns the text now safe to show.
    pub fn push(&mut self, fragment: &str) -> String {
        self.text.push_str(fragment);
        let cut = trailer_cut(&self.text).max(self.emitted);
        let out = self.text[self.emitted..cut].to_string();
        self.emitted = cut;
        out
    }

    /// Ends the stream: returns the remaining visible text, the full visible
    /// answer and the trailer's ids if one was present.
    pub fn finish(self) -> (String, String, Option<Vec<String>>) {
        let cut = trailer_cut(&self.text).max(self.emitted);
        let tail = self.text[cut..].trim();
        let (visible_end, refs) = if let Some(ids) = tail.strip_prefix(prompt::TRAILER_PREFIX) {
            let ids = ids
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            (cut, Some(ids))
        } else if tail.is_empty() {
            (cut, None)
        } else {
            (self.text.trim_end().len(), None)
        };
        let rest = self.text[self.emitted..visible_end.max(self.emitted)].to_string();
        let visible = self.text[..visible_end.max(self.emitted)].to_string();
        (rest, visible, refs)
    }
}

/// Clips `text` to at most `max_chars` characters, ending at a token boundary.
pub fn clip_at_token_boundary(text: &str, max_chars: usize) -> &str {
    if text.chars().count() <= max_chars {
        return text;
    }
    let tokens = crate::retrieval::tokenize(text);
    let end_char = tokens
        .tokens
        .iter()
        .map(|t| t.span.end)
        .take_while(|&end| end <= max_chars)
        .last()
        .unwrap_or(0);
    let end_byte = text.char_indices().nth(end_char).map(|(i, _)| i).unwrap_or(text.len());
    &text[..end_byte]
}

pub struct Orchestrator {
    gateway: Arc<dyn LlmGateway>,
    config: RagConfig,
}

impl Orchestrator {
    pub fn new(gateway: Arc<dyn LlmGateway>, config: RagConfig) -> Self {
        Self { gateway, config }
    }

    pub fn config(&self) -> &RagConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Arc<dyn LlmGateway> {
        &self.gateway
    }

    /// Answers an action against an indexed document, streaming visible text
    /// through `sink`. Gateway failures produce an answer with finish reason
    /// `error` and no references.
    pub async fn answer(
        &self,
        action: &AgentAction,
        doc: &IndexedDocument,
        profile: &LearnerProfile,
        history: &[ChatMessage],
        answer_id: String,
        sink: &mut (dyn FnMut(&str) + Send),
    ) -> Result<Answer, RagError> {
        let selection_text = match (action.kind, action.selection) {
            (ActionKind::Summarize | ActionKind::Explain, None) => return Err(RagError::SelectionMissing),
            (_, Some(span)) => Some(doc.document.slice(&span).ok_or(RagError::InvalidSelection)?),
            (_, None) => None,
        };
        let query = match action.kind {
            ActionKind::Chat => action
                .query
                .clone()
                .filter(|q| !q.trim().is_empty())
                .ok_or(RagError::QueryMissing)?,
            _ => selection_text.clone().or_else(|| action.query.clone()).unwrap_or_default(),
        };

        let hits = doc.index.search(&query, self.config.retrieve_k);
        let retrieved: Vec<(&Chunk, f64)> = hits
            .iter()
            .map(|h| doc.chunk(h.chunk_id).map(|c| (c, h.score)).ok_or(RagError::NotIndexed))
            .collect::<Result<_, _>>()?;

        if retrieved.is_empty() && action.kind == ActionKind::Chat {
            sink(prompt::NO_CONTEXT_ANSWER);
            return Ok(Answer {
                answer_id,
                text: prompt::NO_CONTEXT_ANSWER.to_string(),
                references: Vec::new(),
                finish_reason: FinishReason::Stop,
                created_at: Utc::now(),
                error: None,
            });
        }

        let request = assemble_prompt(action, selection_text.as_deref(), &retrieved, profile, history, &self.config)?;
        let included: Vec<ChunkId> = prompt::parse_context_blocks(&request.messages[0].content)
            .iter()
            .filter_map(|b| b.id.parse().ok())
            .collect();

        let mut filter = TrailerFilter::new();
        let outcome = {
            let mut on_delta = |d: &CompletionDelta| {
                let visible = filter.push(&d.text_fragment);
                if !visible.is_empty() {
                    sink(&visible);
                }
            };
            self.gateway.complete(&request, &mut on_delta).await
        };
        let completion = match outcome {
            Ok(c) => c,
            Err(e) => {
                return Ok(Answer {
                    answer_id,
                    text: String::new(),
                    references: Vec::new(),
                    finish_reason: FinishReason::Error,
                    created_at: Utc::now(),
                    error: Some(e.to_string()),
                })
            }
        };
        let (rest, text, trailer) = filter.finish();
        if !rest.is_empty() {
            sink(&rest);
        }

        let cited: Vec<ChunkId> = {
            let mut ids: Vec<ChunkId> = Vec::new();
            for raw in trailer.unwrap_or_default() {
                if let Ok(id) = raw.parse::<ChunkId>() {
                    if included.contains(&id) && !ids.contains(&id) {
                        ids.push(id);
                    }
                }
            }
            ids
        };
        let chosen: Vec<(&Chunk, f64)> = if cited.is_empty() {
            retrieved.iter().take(self.config.fallback_references).copied().collect()
        } else {
            cited
                .iter()
                .filter_map(|id| retrieved.iter().find(|(c, _)| c.chunk_id == *id).copied())
                .collect()
        };

        let mut references = Vec::with_capacity(chosen.len());
        for (chunk, score) in chosen {
            references.push(self.reference(doc, chunk, score).await);
        }

        Ok(Answer {
            answer_id,
            text,
            references,
            finish_reason: completion.finish_reason,
            created_at: Utc::now(),
            error: None,
        })
    }

    async fn reference(&self, doc: &IndexedDocument, chunk: &Chunk, score: f64) -> Reference {
        let verbatim = clip_at_token_boundary(&chunk.text, self.config.verbatim_clip).to_string();
        let summary = match self.config.ref_summary {
            RefSummaryMode::FirstSentence => prompt::first_sentence(&chunk.text),
            RefSummaryMode::Llm => self.llm_summary(&chunk.text).await,
        };
        let spans = locate(&doc.document, &verbatim, self.config.tau)
            .map(|r| r.spans)
            .unwrap_or_default();
        Reference { chunk_id: chunk.chunk_id, verbatim, summary, score, spans }
    }

    async fn llm_summary(&self, text: &str) -> String {
        let request = CompletionRequest {
            messages: vec![ChatMessage::user(format!("{} {}", prompt::ONE_SENTENCE_PREAMBLE, text))],
            max_output_tokens: 80,
            temperature: self.config.temperature,
            stream: false,
        };
        match self.gateway.complete(&request, &mut |_: &CompletionDelta| {}).await {
            Ok(c) if !c.text.trim().is_empty() => c.text.trim().to_string(),
            _ => prompt::first_sentence(text),
        }
    }
}
