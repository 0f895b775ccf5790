//! Per-section quiz cards on a Leitner schedule.
//!
//! Each draw either generates a novel card (probability `p_novel`, which
//! decays linearly with the number of generated cards) or reviews an existing
//! card picked with probability proportional to its box weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::document::Chunk;
use crate::llm::{count_tokens, ChatMessage, CompletionDelta, CompletionRequest, LlmGateway, DEFAULT_TEMPERATURE};
use crate::prompt;

/// Token budget for the section context sent with a generation request.
pub const GENERATION_CONTEXT_BUDGET: usize = 6000;
const OUTPUT_TOKENS_PER_PAIR: u32 = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizConfig {
    pub p0: f64,
    pub delta: f64,
    pub boxes: u8,
    pub box_weights: Vec<f64>,
}

impl Default for QuizConfig {
    fn default() -> Self {
        Self { p0: 1.0, delta: 0.1, boxes: 5, box_weights: vec![16.0, 8.0, 4.0, 2.0, 1.0] }
    }
}

impl QuizConfig {
    pub fn validate(&self) -> Result<(), QuizError> {
        let bad = |why: &str| Err(QuizError::InvalidConfig(why.to_string()));
        if !(0.0..=1.0).contains(&self.p0) {
            return bad("p0 must lie in [0, 1]");
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return bad("delta must be positive");
        }
        if self.boxes < 2 {
            return bad("at least two boxes are required");
        }
        if self.box_weights.len() != self.boxes as usize {
            return bad("one weight per box is required");
        }
        if self.box_weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return bad("box weights must be positive");
        }
        if self.box_weights.windows(2).any(|w| w[1] >= w[0]) {
            return bad("box weights must be strictly decreasing");
        }
        Ok(())
    }

    /// Generation count at which `p_novel` reaches zero: `ceil(p0 / delta)`.
    pub fn generation_cutoff(&self) -> u32 {
        (self.p0 / self.delta - 1e-9).ceil().max(0.0) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastResult {
    None,
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerResult {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizCard {
    pub card_id: String,
    pub doc_id: String,
    pub section_label: String,
    pub question: String,
    pub answer_key: String,
    #[serde(rename = "box")]
    pub box_number: u8,
    pub last_result: LastResult,
    pub seen_count: u32,
    pub created_ordinal: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionQuizState {
    pub doc_id: String,
    pub section_label: String,
    pub cards: Vec<QuizCard>,
    pub generated_count: u32,
    pub rng_seed: u64,
    /// Draws taken so far; draw `i` uses RNG stream `i`.
    pub draw_count: u64,
    pub config: QuizConfig,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum QuizError {
    #[error("invalid quiz configuration: {0}")]
    InvalidConfig(String),
    #[error("quiz generation failed: {0}")]
    GenerationFailed(String),
    #[error("unknown card {0}")]
    UnknownCard(String),
    #[error("section has no text to quiz on")]
    EmptySection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NextCard {
    pub card: QuizCard,
    pub generated: bool,
}

/// Case-folded, whitespace-collapsed question text used for duplicate checks.
pub fn normalize_question(q: &str) -> String {
    q.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Parses `Q: <question>\nA: <answer>` pairs separated by blank lines. A block
/// that is not exactly one non-empty `Q:` line followed by one non-empty `A:`
/// line is dropped.
pub fn parse_quiz_pairs(text: &str) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut flush = |block: &mut Vec<&str>| {
        if let [q, a] = block.as_slice() {
            let q = q.strip_prefix("Q:").map(str::trim);
            let a = a.strip_prefix("A:").map(str::trim);
            if let (Some(q), Some(a)) = (q, a) {
                if !q.is_empty() && !a.is_empty() {
                    pairs.push((q.to_string(), a.to_string()));
                }
            }
        }
        block.clear();
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            flush(&mut block);
        } else {
            block.push(line);
        }
    }
    flush(&mut block);
    pairs
}

impl SectionQuizState {
    pub fn new(doc_id: impl Into<String>, section_label: impl Into<String>, rng_seed: u64, config: QuizConfig) -> Result<Self, QuizError> {
        config.validate()?;
        Ok(Self {
            doc_id: doc_id.into(),
            section_label: section_label.into(),
            cards: Vec::new(),
            generated_count: 0,
            rng_seed,
            draw_count: 0,
            config,
        })
    }

    /// `max(0, p0 - n * delta)`, or 1 when there are no cards to review.
    pub fn p_novel(&self) -> f64 {
        if self.cards.is_empty() {
            return 1.0;
        }
        if self.generated_count >= self.config.generation_cutoff() {
            return 0.0;
        }
        (self.config.p0 - self.generated_count as f64 * self.config.delta).clamp(0.0, 1.0)
    }

    pub fn card(&self, card_id: &str) -> Option<&QuizCard> {
        self.cards.iter().find(|c| c.card_id == card_id)
    }

    fn next_ordinal(&self) -> u64 {
        self.cards.iter().map(|c| c.created_ordinal + 1).max().unwrap_or(0)
    }

    /// Two uniforms in [0, 1) for the next draw: the novelty test and the
    /// review pick.
    fn draw(&mut self) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.draw_count);
        self.draw_count += 1;
        (rng.random::<f64>(), rng.random::<f64>())
    }

    /// Index of the card selected by `v` in [0, 1). Cards are ordered by box,
    /// then least seen, then oldest; each occupies a share of [0, 1)
    /// proportional to its box weight.
    pub fn pick_review(&self, v: f64) -> Option<usize> {
        let mut order: Vec<usize> = (0..self.cards.len()).collect();
        order.sort_by_key(|&i| {
            let c = &self.cards[i];
            (c.box_number, c.seen_count, c.created_ordinal)
        });
        let weight = |i: usize| self.config.box_weights[self.cards[i].box_number as usize - 1];
        let total: f64 = order.iter().map(|&i| weight(i)).sum();
        let mut target = v * total;
        for &i in &order {
            let w = weight(i);
            if target < w {
                return Some(i);
            }
            target -= w;
        }
        order.last().copied()
    }

    pub fn record_answer(&mut self, card_id: &str, result: AnswerResult) -> Result<QuizCard, QuizError> {
        let boxes = self.config.boxes;
        let card = self
            .cards
            .iter_mut()
            .find(|c| c.card_id == card_id)
            .ok_or_else(|| QuizError::UnknownCard(card_id.to_string()))?;
        match result {
            AnswerResult::Incorrect => {
                card.box_number = 1;
                card.last_result = LastResult::Incorrect;
            }
            AnswerResult::Correct => {
                card.box_number = (card.box_number + 1).min(boxes);
                card.last_result = LastResult::Correct;
            }
        }
        card.seen_count += 1;
        Ok(card.clone())
    }

    /// Asks the gateway for `m` new pairs about the section and adds the ones
    /// that parse and are not duplicates. `new_id` supplies card ids.
    pub async fn generate_cards(
        &mut self,
        m: usize,
        section_chunks: &[&Chunk],
        gateway: &dyn LlmGateway,
        new_id: &mut (dyn FnMut() -> String + Send),
    ) -> Result<Vec<QuizCard>, QuizError> {
        if section_chunks.is_empty() || m == 0 {
            return Err(QuizError::EmptySection);
        }
        let asked: Vec<&str> = self.cards.iter().map(|c| c.question.as_str()).collect();
        let user = prompt::quiz_instruction(m, &self.section_label, &asked);
        let mut system = format!("{}\n\n{}", prompt::PERSONA, prompt::CONTEXT_HEADER);
        let fixed = count_tokens(&user);
        for (i, chunk) in section_chunks.iter().enumerate() {
            let candidate = format!("{system}{}{}", if i == 0 { "\n" } else { "\n\n" }, prompt::render_block(chunk.chunk_id, &chunk.text));
            if i > 0 && count_tokens(&candidate) + fixed > GENERATION_CONTEXT_BUDGET {
                break;
            }
            system = candidate;
        }
        let request = CompletionRequest {
            messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
            max_output_tokens: OUTPUT_TOKENS_PER_PAIR * m as u32,
            temperature: DEFAULT_TEMPERATURE,
            stream: false,
        };
        let completion = gateway
            .complete(&request, &mut |_: &CompletionDelta| {})
            .await
            .map_err(|e| QuizError::GenerationFailed(e.to_string()))?;
        let pairs = parse_quiz_pairs(&completion.text);
        if pairs.is_empty() {
            return Err(QuizError::GenerationFailed("no question/answer pairs in the reply".into()));
        }

        let mut known: Vec<String> = self.cards.iter().map(|c| normalize_question(&c.question)).collect();
        let mut accepted = Vec::new();
        for (question, answer_key) in pairs.into_iter().take(m) {
            let norm = normalize_question(&question);
            if known.contains(&norm) {
                continue;
            }
            known.push(norm);
            let card = QuizCard {
                card_id: new_id(),
                doc_id: self.doc_id.clone(),
                section_label: self.section_label.clone(),
                question,
                answer_key,
                box_number: 1,
                last_result: LastResult::None,
                seen_count: 0,
                created_ordinal: self.next_ordinal(),
            };
            self.cards.push(card.clone());
            self.generated_count += 1;
            accepted.push(card);
        }
        Ok(accepted)
    }

    /// Serves the next card. A generation attempt that fails or yields only
    /// duplicates falls back to review when the pool is non-empty.
    pub async fn next_card(
        &mut self,
        section_chunks: &[&Chunk],
        gateway: &dyn LlmGateway,
        new_id: &mut (dyn FnMut() -> String + Send),
    ) -> Result<NextCard, QuizError> {
        let p = self.p_novel();
        let (u, v) = self.draw();
        if u < p {
            match self.generate_cards(1, section_chunks, gateway, new_id).await {
                Ok(mut cards) if !cards.is_empty() => {
                    return Ok(NextCard { card: cards.remove(0), generated: true });
                }
                Ok(_) if self.cards.is_empty() => {
                    return Err(QuizError::GenerationFailed("generation produced only duplicates".into()))
                }
                Err(e) if self.cards.is_empty() => return Err(e),
                _ => {}
            }
        }
        let idx = self.pick_review(v).expect("pool is non-empty here");
        Ok(NextCard { card: self.cards[idx].clone(), generated: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{ChunkId, DocSpan};
    use crate::llm::MockGateway;

    fn card(id: &str, box_number: u8, ordinal: u64) -> QuizCard {
        QuizCard {
            card_id: id.into(),
            doc_id: "d".into(),
            section_label: "S".into(),
            question: format!("question {id}"),
            answer_key: "a".into(),
            box_number,
            last_result: LastResult::None,
            seen_count: 0,
            created_ordinal: ordinal,
        }
    }

    fn chunk(id: u32, text: &str) -> Chunk {
        Chunk {
            chunk_id: ChunkId(id),
            doc_id: "d".into(),
            span: DocSpan::single_page(1, 0, text.chars().count()),
            text: text.into(),
            token_count: 0,
        }
    }

    fn counter() -> impl FnMut() -> String + Send {
        let mut n = 0;
        move || {
            n += 1;
            format!("card-{n}")
        }
    }

    #[test]
    fn config_validation() {
        assert!(QuizConfig::default().validate().is_ok());
        let c = QuizConfig { box_weights: vec![16.0, 8.0, 8.0, 2.0, 1.0], ..QuizConfig::default() };
        assert!(c.validate().is_err());
        let c = QuizConfig { delta: 0.0, ..QuizConfig::default() };
        assert!(c.validate().is_err());
        let c = QuizConfig { boxes: 1, box_weights: vec![1.0], ..QuizConfig::default() };
        assert!(c.validate().is_err());
        let c = QuizConfig { p0: 1.5, ..QuizConfig::default() };
        assert!(c.validate().is_err());
        assert_eq!(QuizConfig::default().generation_cutoff(), 10);
        assert_eq!(QuizConfig { delta: 0.3, ..QuizConfig::default() }.generation_cutoff(), 4);
    }

    #[test]
    fn p_novel_examples() {
        let mut s = SectionQuizState::new("d", "S", 1, QuizConfig::default()).unwrap();
        assert_eq!(s.p_novel(), 1.0);
        s.cards.push(card("a", 1, 0));
        s.generated_count = 4;
        assert!((s.p_novel() - 0.6).abs() < 1e-12);
        s.generated_count = 10;
        assert_eq!(s.p_novel(), 0.0);
        s.generated_count = 13;
        assert_eq!(s.p_novel(), 0.0);
    }

    #[test]
    fn leitner_transitions() {
        let mut s = SectionQuizState::new("d", "S", 1, QuizConfig::default()).unwrap();
        s.cards = vec![card("a", 3, 0), card("b", 5, 1)];
        assert_eq!(s.record_answer("a", AnswerResult::Incorrect).unwrap().box_number, 1);
        let b = s.record_answer("b", AnswerResult::Correct).unwrap();
        assert_eq!((b.box_number, b.seen_count, b.last_result), (5, 1, LastResult::Correct));
        assert_eq!(s.record_answer("a", AnswerResult::Correct).unwrap().box_number, 2);
        assert_eq!(s.record_answer("zz", AnswerResult::Correct), Err(QuizError::UnknownCard("zz".into())));
    }

    #[test]
    fn review_pick_follows_sorted_weights() {
        let mut s = SectionQuizState::new("d", "S", 1, QuizConfig::default()).unwrap();
        s.cards = vec![card("five", 5, 0), card("one", 1, 1)];
        // sorted order: one (16), five (1)
        assert_eq!(s.pick_review(0.0), Some(1));
        assert_eq!(s.pick_review(15.9 / 17.0), Some(1));
        assert_eq!(s.pick_review(16.1 / 17.0), Some(0));
        s.cards.clear();
        assert_eq!(s.pick_review(0.5), None);
    }

    #[test]
    fn strict_pair_parsing() {
        let text = "Q: one?\nA: 1\n\nQ: two?\nA: 2\n\nQ: three?\nA: 3\n\nQ: broken with no answer\n\nA: orphan";
        let pairs = parse_quiz_pairs(text);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[2], ("three?".to_string(), "3".to_string()));
        assert!(parse_quiz_pairs("Q: x\nA: y\nextra").is_empty());
        assert!(parse_quiz_pairs("Q: \nA: y").is_empty());
    }

    #[test]
    fn mock_generation_and_dedup() {
        let gw = MockGateway::new();
        let mut ids = counter();
        let a = chunk(0, "alpha beta gamma delta epsilon zeta eta theta iota kappa. More words.");
        let b = chunk(1, "one two three four five six seven eight nine.");
        let mut s = SectionQuizState::new("d", "S", 7, QuizConfig::default()).unwrap();
        let cards = futures::executor::block_on(s.generate_cards(2, &[&a, &b], &gw, &mut ids)).unwrap();
        assert_eq!(cards.len(), 2);
        assert_eq!(cards[0].question, "alpha beta gamma delta epsilon zeta eta theta");
        assert_eq!(cards[1].question, "one two three four five six seven eight");
        assert_eq!(s.generated_count, 2);
        assert!(cards.iter().all(|c| c.box_number == 1 && c.last_result == LastResult::None));
        assert_eq!(cards[1].created_ordinal, 1);
    }

    #[test]
    fn empty_pool_always_generates() {
        let gw = MockGateway::new();
        let mut ids = counter();
        let a = chunk(0, "alpha beta gamma delta epsilon zeta eta theta iota kappa.");
        let mut s = SectionQuizState::new("d", "S", 3, QuizConfig::default()).unwrap();
        let next = futures::executor::block_on(s.next_card(&[&a], &gw, &mut ids)).unwrap();
        assert!(next.generated);
        assert_eq!(next.card.box_number, 1);
        assert_eq!(gw.calls(), 1);
    }
}
