use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;

use super::{Completion, CompletionDelta, CompletionRequest, DeltaSink, FinishReason, GatewayError, LlmGateway, Role};
use crate::prompt::{self, ContextBlock};

const ANSWER_WORDS: usize = 20;
const QUESTION_WORDS: usize = 8;

/// Scripted, deterministic stand-in for a language model.
///
/// Behaviour is selected from the last user message:
///
/// | directive / prompt shape             | reply |
/// |--------------------------------------|-------|
/// | `MOCK:ECHO <x>`                      | `<x>` |
/// | `MOCK:HISTORY`                       | `HISTORY <n>`, n = chat turns before the last user message |
/// | `MOCK:SUMMARY`, or a summarize request | first sentence of every context block, in order |
/// | `MOCK:QUIZ n`, or a quiz instruction | n `Q:`/`A:` pairs built from context blocks |
/// | one-sentence summary request         | first sentence of the passage |
/// | explain request                      | `EXPLAIN: <passage>` |
/// | anything else                        | `ANSWER: ` + first 20 words of the first block, then a `REFS:` trailer naming the first two blocks |
///
/// Replies stream one word (with its trailing whitespace) per delta and are
/// cut at `max_output_tokens` words with finish reason `length`.
#[derive(Debug, Default)]
pub struct MockGateway {
    calls: AtomicUsize,
}

impl MockGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of `complete` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Reply text for a request, before truncation.
    pub fn script(req: &CompletionRequest) -> String {
        let last = req.last_user_message().unwrap_or_default();
        let blocks: Vec<ContextBlock> = req
            .messages
            .iter()
            .flat_map(|m| prompt::parse_context_blocks(&m.content))
            .collect();

        if let Some(pos) = last.find("MOCK:ECHO") {
            let rest = &last[pos + "MOCK:ECHO".len()..];
            return rest.strip_prefix(' ').unwrap_or(rest).to_string();
        }
        if last.contains("MOCK:HISTORY") {
            let last_user = req.messages.iter().rposition(|m| m.role == Role::User).unwrap_or(0);
            let turns = req.messages[..last_user].iter().filter(|m| m.role != Role::System).count();
            return format!("HISTORY {turns}");
        }
        if last.contains("MOCK:SUMMARY") || last.trim_start().starts_with(prompt::SUMMARIZE_PREAMBLE) {
            return blocks
                .iter()
                .map(|b| prompt::first_sentence(&b.text))
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
        }
        let quiz_count = last
            .find("MOCK:QUIZ")
            .and_then(|pos| last[pos + "MOCK:QUIZ".len()..].split_whitespace().next()?.parse().ok())
            .or_else(|| prompt::parse_quiz_instruction(last));
        if let Some(n) = quiz_count {
            return quiz_reply(&blocks, n, &prompt::parse_already_asked(last));
        }
        if let Some(passage) = last.trim_start().strip_prefix(prompt::ONE_SENTENCE_PREAMBLE) {
            return prompt::first_sentence(passage);
        }
        if let Some(passage) = last.trim_start().strip_prefix(prompt::EXPLAIN_PREAMBLE) {
            return format!("EXPLAIN: {}", passage.trim());
        }
        match blocks.first() {
            Some(first) => {
                let words: Vec<&str> = first.text.split_whitespace().take(ANSWER_WORDS).collect();
                let ids: Vec<&str> = blocks.iter().take(2).map(|b| b.id.as_str()).collect();
                format!("ANSWER: {}\n{} {}", words.join(" "), prompt::TRAILER_PREFIX, ids.join(","))
            }
            None => "ANSWER:".to_string(),
        }
    }
}

fn quiz_reply(blocks: &[ContextBlock], n: usize, already_asked: &[String]) -> String {
    let fold = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let mut seen: HashSet<String> = already_asked.iter().map(|q| fold(q)).collect();
    let words: Vec<Vec<&str>> = blocks.iter().map(|b| b.text.split_whitespace().collect()).collect();
    let windows = words.iter().map(|w| w.len().div_ceil(QUESTION_WORDS)).max().unwrap_or(0);

    let mut pairs = Vec::new();
    'outer: for window in 0..windows {
        for (block, block_words) in blocks.iter().zip(&words) {
            if pairs.len() == n {
                break 'outer;
            }
            let start = window * QUESTION_WORDS;
            if start >= block_words.len() {
                continue;
            }
            let question = block_words[start..(start + QUESTION_WORDS).min(block_words.len())].join(" ");
            if seen.insert(fold(&question)) {
                pairs.push(format!("Q: {question}\nA: {}", prompt::first_sentence(&block.text)));
            }
        }
    }
    pairs.join("\n\n")
}

/// Splits text into word pieces, each keeping its trailing whitespace.
fn word_pieces(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut in_space = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_space = true;
        } else if in_space {
            if !text[start..i].trim().is_empty() {
                pieces.push(&text[start..i]);
                start = i;
            }
            in_space = false;
        }
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }
    pieces
}

#[async_trait]
impl LlmGateway for MockGateway {
    async fn complete(&self, req: &CompletionRequest, sink: &mut DeltaSink<'_>) -> Result<Completion, GatewayError> {
        req.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let reply = Self::script(req);
        let pieces = word_pieces(&reply);
        let limit = req.max_output_tokens as usize;
        let (kept, reason) = if pieces.len() > limit {
            (&pieces[..limit], FinishReason::Length)
        } else {
            (&pieces[..], FinishReason::Stop)
        };
        let mut text = String::new();
        for piece in kept {
            sink(&CompletionDelta::fragment(*piece));
            text.push_str(piece);
        }
        sink(&CompletionDelta::last("", reason));
        Ok(Completion { text, finish_reason: reason })
    }
}
