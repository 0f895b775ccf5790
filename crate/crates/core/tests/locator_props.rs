mod common;

use proptest::prelude::*;
use rand::Rng;
use textbook_core::locator::{locate, normalize, MatchMethod};
use textbook_core::retrieval::tokenize;

/// A verbatim excerpt of `len` tokens starting at token `first` of `page_text`,
/// with its char range.
fn excerpt(page_text: &str, first: usize, len: usize) -> (String, usize, usize) {
    let tokens = tokenize(page_text).tokens;
    let start = tokens[first].span.start;
    let end = tokens[first + len - 1].span.end;
    (page_text.chars().skip(start).take(end - start).collect(), start, end)
}

#[test]
fn verbatim_excerpts_are_found_exactly() {
    let mut rng = common::rng(21);
    let vocab = common::vocabulary(&mut rng, 3000);
    let doc = common::document(common::paged_prose(&mut rng, &vocab, 8, 350));
    for _ in 0..100 {
        let page = rng.random_range(0..doc.pages.len());
        let text = &doc.pages[page].text;
        let count = tokenize(text).len();
        let len = rng.random_range(5..=40);
        let first = rng.random_range(0..=count - len);
        let (needle, start, end) = excerpt(text, first, len);
        let found = locate(&doc, &needle, 0.5).unwrap();
        assert!(found.located);
        assert_eq!(found.spans.len(), 1);
        let span = &found.spans[0];
        assert_eq!((span.page, span.start, span.end), (page as u32 + 1, start, end));
        assert_eq!(span.method, MatchMethod::Exact);
        assert_eq!(span.confidence, 1.0);
    }
}

#[test]
fn corrupted_excerpts_land_on_the_right_page() {
    let mut rng = common::rng(22);
    let vocab = common::vocabulary(&mut rng, 3000);
    let doc = common::document(common::paged_prose(&mut rng, &vocab, 8, 350));
    let mut hits = 0;
    for _ in 0..100 {
        let page = rng.random_range(0..doc.pages.len());
        let text = &doc.pages[page].text;
        let count = tokenize(text).len();
        let len = rng.random_range(5..=40);
        let first = rng.random_range(0..=count - len);
        let (needle, _, _) = excerpt(text, first, len);
        let mut words: Vec<String> = needle.split_whitespace().map(str::to_string).collect();
        let corrupt = (words.len() as f64 * 0.1).ceil() as usize;
        for _ in 0..corrupt {
            let i = rng.random_range(0..words.len());
            words[i] = "qqxzv".into();
        }
        let found = locate(&doc, &words.join(" "), 0.5).unwrap();
        if found.located && found.spans.iter().any(|s| s.page == page as u32 + 1) {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_spans_round_trip_through_normalize(seed in any::<u64>(), first in 0usize..200, len in 1usize..30) {
        let mut rng = common::rng(seed);
        let vocab = common::vocabulary(&mut rng, 50);
        let doc = common::document(common::paged_prose(&mut rng, &vocab, 2, 120));
        let text = &doc.pages[0].text;
        let count = tokenize(text).len();
        let len = len.min(count);
        let first = first % (count - len + 1);
        let (needle, _, _) = excerpt(text, first, len);
        let found = locate(&doc, &needle, 0.5).unwrap();
        prop_assert!(found.located);
        let located: String = found
            .spans
            .iter()
            .map(|s| doc.pages[s.page as usize - 1].text.chars().skip(s.start).take(s.end - s.start).collect::<String>())
            .collect::<Vec<_>>()
            .join(" ");
        for s in &found.spans {
            prop_assert_eq!(s.method, MatchMethod::Exact);
        }
        prop_assert_eq!(normalize(&located).0, normalize(&needle).0);
    }
}
