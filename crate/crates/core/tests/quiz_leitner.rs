mod common;

use proptest::prelude::*;
use textbook_core::document::{Chunk, ChunkId, DocSpan};
use textbook_core::llm::MockGateway;
use textbook_core::quiz::{AnswerResult, LastResult, QuizCard, QuizConfig, SectionQuizState};

fn card(id: usize, box_number: u8) -> QuizCard {
    QuizCard {
        card_id: format!("k{id}"),
        doc_id: "d".into(),
        section_label: "S".into(),
        question: format!("question {id}"),
        answer_key: "answer".into(),
        box_number,
        last_result: LastResult::None,
        seen_count: 0,
        created_ordinal: id as u64,
    }
}

fn saturated(cards: Vec<QuizCard>, seed: u64) -> SectionQuizState {
    let mut s = SectionQuizState::new("d", "S", seed, QuizConfig::default()).unwrap();
    s.generated_count = cards.len() as u32 + 10;
    s.cards = cards;
    assert_eq!(s.p_novel(), 0.0);
    s
}

fn ids() -> impl FnMut() -> String + Send {
    let mut n = 0;
    move || {
        n += 1;
        format!("new{n}")
    }
}

fn frequencies(state: &mut SectionQuizState, draws: usize) -> Vec<f64> {
    let gw = MockGateway::new();
    let mut next_id = ids();
    let mut counts = vec![0usize; state.cards.len()];
    for _ in 0..draws {
        let next = futures::executor::block_on(state.next_card(&[], &gw, &mut next_id)).unwrap();
        assert!(!next.generated);
        counts[state.cards.iter().position(|c| c.card_id == next.card.card_id).unwrap()] += 1;
    }
    assert_eq!(gw.calls(), 0);
    counts.into_iter().map(|c| c as f64 / draws as f64).collect()
}

#[test]
fn box_one_card_drawn_sixteen_times_in_seventeen() {
    let mut s = saturated(vec![card(0, 1), card(1, 5)], 2024);
    let f = frequencies(&mut s, 10_000);
    assert!((f[0] - 16.0 / 17.0).abs() <= 0.02, "{f:?}");
}

#[test]
fn frequencies_follow_box_weights() {
    let boxes = [1, 1, 2, 3, 4, 5, 5, 2];
    let mut s = saturated(boxes.iter().enumerate().map(|(i, &b)| card(i, b)).collect(), 99);
    let weights = [16.0, 8.0, 4.0, 2.0, 1.0];
    let total: f64 = boxes.iter().map(|&b| weights[b as usize - 1]).sum();
    let f = frequencies(&mut s, 10_000);
    for (i, &b) in boxes.iter().enumerate() {
        assert!((f[i] - weights[b as usize - 1] / total).abs() <= 0.02, "card {i}: {f:?}");
    }
    let min_box1 = boxes.iter().zip(&f).filter(|(b, _)| **b == 1).map(|(_, f)| *f).fold(1.0, f64::min);
    let max_box5 = boxes.iter().zip(&f).filter(|(b, _)| **b == 5).map(|(_, f)| *f).fold(0.0, f64::max);
    assert!(min_box1 > max_box5);
}

fn section_chunks() -> Vec<Chunk> {
    let mut rng = common::rng(8);
    let vocab = common::vocabulary(&mut rng, 500);
    (0..4)
        .map(|i| {
            let text = common::prose(&mut rng, &vocab, 120);
            Chunk {
                chunk_id: ChunkId(i),
                doc_id: "d".into(),
                span: DocSpan::single_page(1, 0, text.chars().count()),
                text,
                token_count: 120,
            }
        })
        .collect()
}

#[test]
fn generation_stops_after_ten_cards() {
    let chunks = section_chunks();
    let refs: Vec<&Chunk> = chunks.iter().collect();
    let gw = MockGateway::new();
    let mut next_id = ids();
    let mut s = SectionQuizState::new("d", "S", 77, QuizConfig::default()).unwrap();
    let mut calls_at_cutoff = None;
    for draw in 0..2000 {
        futures::executor::block_on(s.next_card(&refs, &gw, &mut next_id)).unwrap();
        if s.generated_count == 10 && calls_at_cutoff.is_none() {
            calls_at_cutoff = Some((draw, gw.calls()));
        }
    }
    assert_eq!(calls_at_cutoff.map(|c| c.1), Some(10));
    assert_eq!(gw.calls(), 10);
    assert_eq!(s.cards.len(), 10);
    assert_eq!(s.p_novel(), 0.0);
}

#[test]
fn perfect_learner_reaches_last_box_in_four_passes() {
    let mut s = saturated((0..7).map(|i| card(i, 1)).collect(), 1);
    for _ in 0..4 {
        let ids: Vec<String> = s.cards.iter().map(|c| c.card_id.clone()).collect();
        for id in ids {
            s.record_answer(&id, AnswerResult::Correct).unwrap();
        }
    }
    assert!(s.cards.iter().all(|c| c.box_number == 5));
}

#[test]
fn seeded_sequences_repeat() {
    let chunks = section_chunks();
    let refs: Vec<&Chunk> = chunks.iter().collect();
    let run = || {
        let gw = MockGateway::new();
        let mut next_id = ids();
        let mut s = SectionQuizState::new("d", "S", 5, QuizConfig::default()).unwrap();
        (0..40)
            .map(|i| {
                let card = futures::executor::block_on(s.next_card(&refs, &gw, &mut next_id)).unwrap().card;
                let result = if i % 3 == 0 { AnswerResult::Incorrect } else { AnswerResult::Correct };
                s.record_answer(&card.card_id, result).unwrap();
                card.card_id
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn boxes_stay_in_bounds(answers in proptest::collection::vec((0usize..4, any::<bool>()), 0..200)) {
        let mut s = saturated((0..4).map(|i| card(i, 1)).collect(), 3);
        for (i, correct) in answers {
            let result = if correct { AnswerResult::Correct } else { AnswerResult::Incorrect };
            let c = s.record_answer(&format!("k{i}"), result).unwrap();
            prop_assert!((1..=5).contains(&c.box_number));
            if !correct {
                prop_assert_eq!(c.box_number, 1);
            }
        }
    }

    #[test]
    fn p_novel_is_linear_with_floor(n in 0u32..40, p0 in 0.0f64..=1.0, delta in 0.01f64..1.0) {
        let config = QuizConfig { p0, delta, ..QuizConfig::default() };
        let mut s = SectionQuizState::new("d", "S", 0, config).unwrap();
        s.cards.push(card(0, 1));
        s.generated_count = n;
        let p = s.p_novel();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - (p0 - n as f64 * delta).max(0.0)).abs() < 1e-9);
    }
}
