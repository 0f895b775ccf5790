#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random lowercase words of 3 to 9 letters.
pub fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    (0..size)
        .map(|_| {
            let len = rng.random_range(3..=9);
            (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
        })
        .collect()
}

/// Sentences of 6 to 14 vocabulary words, capitalised and full-stopped.
pub fn prose(rng: &mut ChaCha8Rng, vocab: &[String], words: usize) -> String {
    let mut out = String::new();
    let mut left = words;
    while left > 0 {
        let n = rng.random_range(6..=14).min(left);
        left -= n;
        let sentence: Vec<&str> = (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect();
        let mut s = sentence.join(" ");
        s[..1].make_ascii_uppercase();
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&s);
        out.push('.');
    }
    out
}

pub fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn document(pages: Vec<String>) -> textbook_core::document::ExtractedDocument {
    use textbook_core::document::{ExtractedDocument, PageText, SectionRange};
    let n = pages.len() as u32;
    ExtractedDocument {
        doc_id: "doc".into(),
        title: "Synthetic".into(),
        pages: pages.into_iter().enumerate().map(|(i, t)| PageText::new(i as u32 + 1, t)).collect(),
        created_at: chrono::DateTime::UNIX_EPOCH,
        section_map: (1..=n)
            .map(|p| SectionRange { label: format!("Page {p}"), first_page: p, last_page: p })
            .collect(),
    }
}

/// Pages of prose wrapped at 70 columns.
pub fn paged_prose(rng: &mut ChaCha8Rng, vocab: &[String], pages: usize, words_per_page: usize) -> Vec<String> {
    (0..pages)
        .map(|_| textbook_core::ingest::pdfgen::wrap_words(&prose(rng, vocab, words_per_page), 70).join("\n"))
        .collect()
}
