//! Prompt text conventions shared by the orchestrator, the quiz generator and
//! the scripted mock.

use crate::document::ChunkId;

pub const PERSONA: &str = "You are a teaching assistant embedded in this textbook. \
Students read the textbook alongside you and ask about what they are reading.";
pub const GROUNDING: &str = "Answer only from the provided context. \
End your reply with a final line `REFS: <id,...>` listing the ids of the context blocks you used.";
pub const PERSONALIZATION_PREFIX: &str = "When explaining concepts, use analogies drawn from: ";
pub const CONTEXT_HEADER: &str = "Context:";
pub const SUMMARIZE_PREAMBLE: &str = "Summarize the following passage concisely:";
pub const EXPLAIN_PREAMBLE: &str = "Explain the following passage in simpler terms:";
pub const ONE_SENTENCE_PREAMBLE: &str = "Summarize in one sentence:";
pub const QUIZ_PREAMBLE: &str = "Generate exactly";
pub const ASKED_HEADER: &str = "Questions already asked (do not repeat them):";
pub const TRAILER_PREFIX: &str = "REFS:";
pub const NO_CONTEXT_ANSWER: &str = "I couldn't find this in the reading.";

const BLOCK_OPEN: &str = "[[chunk:";

/// `[[chunk:<id>]]\n<text>`
pub fn render_block(id: ChunkId, text: &str) -> String {
    format!("{BLOCK_OPEN}{id}]]\n{text}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextBlock {
    pub id: String,
    pub text: String,
}

/// Finds every context block in `content`. A block runs until the blank line
/// that precedes the next block marker, or to the end of the content.
pub fn parse_context_blocks(content: &str) -> Vec<ContextBlock> {
    let mut blocks = Vec::new();
    let mut rest = content;
    while let Some(pos) = rest.find(BLOCK_OPEN) {
        let after = &rest[pos + BLOCK_OPEN.len()..];
        let Some(close) = after.find("]]") else { break };
        let id = after[..close].to_string();
        let body = after[close + 2..].strip_prefix('\n').unwrap_or(&after[close + 2..]);
        let end = body.find(&format!("\n\n{BLOCK_OPEN}")).unwrap_or(body.len());
        blocks.push(ContextBlock {
            id,
            text: body[..end].to_string(),
        });
        rest = &body[end..];
    }
    blocks
}

/// First sentence of `text` with whitespace collapsed. A sentence ends at `.`,
/// `!` or `?` followed by whitespace or the end of the text.
pub fn first_sentence(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut chars = collapsed.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                None => return collapsed,
                Some((_, next)) if next.is_whitespace() => return collapsed[..i + c.len_utf8()].to_string(),
                _ => {}
            }
        }
    }
    collapsed
}

pub fn quiz_instruction(m: usize, section_label: &str, already_asked: &[&str]) -> String {
    let mut out = format!(
        "{QUIZ_PREAMBLE} {m} quiz question and answer pairs about the reading section \"{section_label}\". \
Write each pair as two lines:\nQ: <question>\nA: <answer>\nSeparate pairs with a blank line and write nothing else."
    );
    if !already_asked.is_empty() {
        out.push_str("\n\n");
        out.push_str(ASKED_HEADER);
        for q in already_asked {
            out.push_str("\n- ");
            out.push_str(q);
        }
    }
    out
}

/// Parses the count from a quiz instruction.
pub fn parse_quiz_instruction(content: &str) -> Option<usize> {
    let rest = content.trim_start().strip_prefix(QUIZ_PREAMBLE)?;
    rest.split_whitespace().next()?.parse().ok()
}

pub fn parse_already_asked(content: &str) -> Vec<String> {
    let Some(pos) = content.find(ASKED_HEADER) else {
        return Vec::new();
    };
    content[pos + ASKED_HEADER.len()..]
        .lines()
        .filter_map(|l| l.strip_prefix("- "))
        .map(str::to_string)
        .collect()
}
