//! Minimal PDF writer for generated fixtures.
//!
//! Pages are typeset one `Tj` per line in Helvetica with WinAnsi encoding.
//! Characters outside Latin-1 are written as `?`.

use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Bookmark, Document, Object, ObjectId, Stream};

const PAGE_WIDTH: i64 = 612;
const PAGE_HEIGHT: i64 = 792;
const FONT_SIZE: i64 = 10;
const LEADING: i64 = 13;
const LEFT_MARGIN: i64 = 56;
const TOP: i64 = 760;

#[derive(Debug, Clone, Default)]
pub struct PdfBuilder {
    title: String,
    pages: Vec<Vec<String>>,
    bookmarks: Vec<(String, u32)>,
}

impl PdfBuilder {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn page<I, S>(mut self, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.pages.push(lines.into_iter().map(Into::into).collect());
        self
    }

    /// Adds a top-level bookmark pointing at a 1-based page number.
    pub fn bookmark(mut self, title: impl Into<String>, page: u32) -> Self {
        self.bookmarks.push((title.into(), page));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let contents: Vec<Vec<u8>> = self.pages.iter().map(|lines| page_content(lines)).collect();
        assemble(&self.title, contents, &self.bookmarks)
    }

    /// A single-page PDF with a caller-supplied content stream using font `/F1`.
    pub fn from_raw_content(content: Vec<u8>) -> Vec<u8> {
        assemble("", vec![content], &[])
    }
}

/// Wraps `text` into lines of at most `width` characters, breaking at spaces.
/// Words longer than `width` stay whole.
pub fn wrap_words(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut line = String::new();
    for word in text.split_whitespace() {
        if !line.is_empty() && line.chars().count() + 1 + word.chars().count() > width {
            lines.push(std::mem::take(&mut line));
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(word);
    }
    if !line.is_empty() {
        lines.push(line);
    }
    lines
}

/// Lays `text` out over pages of `lines_per_page` wrapped lines.
pub fn paginate(text: &str, width: usize, lines_per_page: usize) -> Vec<Vec<String>> {
    wrap_words(text, width)
        .chunks(lines_per_page.max(1))
        .map(<[String]>::to_vec)
        .collect()
}

fn latin1_bytes(s: &str) -> Vec<u8> {
    s.chars()
        .map(|c| u8::try_from(u32::from(c)).unwrap_or(b'?'))
        .collect()
}

fn page_content(lines: &[String]) -> Vec<u8> {
    let mut ops = vec![
        Operation::new("BT", vec![]),
        Operation::new("Tf", vec!["F1".into(), FONT_SIZE.into()]),
        Operation::new("TL", vec![LEADING.into()]),
        Operation::new("Td", vec![LEFT_MARGIN.into(), TOP.into()]),
    ];
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            ops.push(Operation::new("T*", vec![]));
        }
        ops.push(Operation::new("Tj", vec![Object::string_literal(latin1_bytes(line))]));
    }
    ops.push(Operation::new("ET", vec![]));
    Content { operations: ops }.encode().unwrap_or_default()
}

fn assemble(title: &str, contents: Vec<Vec<u8>>, bookmarks: &[(String, u32)]) -> Vec<u8> {
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font_id = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica",
        "Encoding" => "WinAnsiEncoding",
    });
    let resources_id = doc.add_object(dictionary! {
        "Font" => dictionary! { "F1" => font_id },
    });

    let mut page_ids: Vec<ObjectId> = Vec::with_capacity(contents.len());
    for content in contents {
        let content_id = doc.add_object(Stream::new(dictionary! {}, content));
        let page_id = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "Contents" => content_id,
        });
        page_ids.push(page_id);
    }
    let pages = dictionary! {
        "Type" => "Pages",
        "Kids" => page_ids.iter().map(|&id| Object::Reference(id)).collect::<Vec<_>>(),
        "Count" => page_ids.len() as i64,
        "Resources" => resources_id,
        "MediaBox" => vec![0.into(), 0.into(), PAGE_WIDTH.into(), PAGE_HEIGHT.into()],
    };
    doc.objects.insert(pages_id, Object::Dictionary(pages));

    for (label, page) in bookmarks {
        if let Some(&page_id) = page.checked_sub(1).and_then(|i| page_ids.get(i as usize)) {
            doc.add_bookmark(Bookmark::new(label.clone(), [0.0, 0.0, 0.0], 0, page_id), None);
        }
    }
    let outline_id = doc.build_outline();

    let mut catalog = dictionary! {
        "Type" => "Catalog",
        "Pages" => pages_id,
    };
    if let Some(id) = outline_id {
        catalog.set("Outlines", id);
    }
    let catalog_id = doc.add_object(catalog);
    doc.trailer.set("Root", catalog_id);
    if !title.is_empty() {
        let info_id = doc.add_object(dictionary! {
            "Title" => Object::string_literal(latin1_bytes(title)),
        });
        doc.trailer.set("Info", info_id);
    }
    doc.compress();

    let mut out = Vec::new();
    doc.save_to(&mut out).expect("writing to a Vec cannot fail");
    out
}
