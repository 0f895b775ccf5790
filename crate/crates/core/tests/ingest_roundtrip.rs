mod common;

use textbook_core::ingest::pdfgen::{paginate, PdfBuilder};
use textbook_core::ingest::{extract, index_document};

#[test]
fn generated_pdf_round_trips_and_chunks_cover_text() {
    let mut rng = common::rng(11);
    let vocab = common::vocabulary(&mut rng, 400);
    let source = common::prose(&mut rng, &vocab, 9000);
    let pages = paginate(&source, 90, 50);
    assert!(pages.len() >= 10);
    let pages = &pages[..10];
    let mut builder = PdfBuilder::new("Round trip");
    for lines in pages {
        builder = builder.page(lines.clone());
    }
    let expected: String = pages.iter().flatten().cloned().collect::<Vec<_>>().join(" ");

    let doc = extract(&builder.build()).unwrap();
    assert_eq!(doc.pages.len(), 10);
    assert_eq!(doc.title, "Round trip");
    assert_eq!(common::collapse(&doc.full_text()), common::collapse(&expected));
    for (page, lines) in doc.pages.iter().zip(pages) {
        assert_eq!(common::collapse(&page.text), common::collapse(&lines.join(" ")));
    }

    let indexed = index_document(doc, 1000, 200).unwrap();
    let full: Vec<char> = indexed.document.full_text().chars().collect();
    let mut covered_to = 0;
    for (i, chunk) in indexed.chunks.iter().enumerate() {
        let (start, end) = indexed.document.span_to_global(&chunk.span).unwrap();
        assert_eq!(start, i * 800);
        assert_eq!(chunk.text, full[start..end].iter().collect::<String>());
        assert!(start <= covered_to);
        covered_to = end;
    }
    assert_eq!(covered_to, full.len());
}
