//! PDF text-layer extraction.
//!
//! `lopdf` parses the file structure, fonts and content streams. Layout is
//! recovered here by following the text and graphics matrices: a text run whose
//! baseline moves vertically starts a new line, and a horizontal gap wider than
//! a fraction of the font size becomes a space.

use std::collections::BTreeMap;

use chrono::Utc;
use lopdf::content::Content;
use lopdf::{Dictionary, Document, Encoding, Object};

use super::IngestError;
use crate::document::{ExtractedDocument, PageText, SectionRange};

/// Horizontal gap, in units of font size, that separates two words.
const WORD_GAP: f64 = 0.15;
/// Vertical baseline shift, in units of font size, that starts a new line.
const LINE_SHIFT: f64 = 0.4;
/// Glyph width assumed when the font carries no width table.
const DEFAULT_GLYPH_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    /// Identifier to assign; a random UUID when absent.
    pub doc_id: Option<String>,
    /// Title used when the PDF's info dictionary has none.
    pub fallback_title: Option<String>,
}

/// Extracts per-page text from a PDF with a freshly generated document id.
pub fn extract(pdf_bytes: &[u8]) -> Result<ExtractedDocument, IngestError> {
    extract_with(pdf_bytes, &ExtractOptions::default())
}

pub fn extract_with(pdf_bytes: &[u8], options: &ExtractOptions) -> Result<ExtractedDocument, IngestError> {
    if pdf_bytes.is_empty() {
        return Err(IngestError::MalformedPdf("empty input".into()));
    }
    let doc = Document::load_mem(pdf_bytes).map_err(|e| IngestError::MalformedPdf(e.to_string()))?;
    let page_ids = doc.get_pages();
    if page_ids.is_empty() {
        return Err(IngestError::MalformedPdf("document has no pages".into()));
    }

    let mut pages = Vec::with_capacity(page_ids.len());
    for (ordinal, (_, page_id)) in page_ids.iter().enumerate() {
        let text = extract_page(&doc, *page_id)?;
        pages.push(PageText::new(ordinal as u32 + 1, text));
    }
    if pages.iter().all(|p| p.char_count == 0) {
        return Err(IngestError::NoTextLayer);
    }

    let section_map = outline_sections(&doc, pages.len() as u32).unwrap_or_else(|| per_page_sections(pages.len() as u32));
    let title = info_title(&doc)
        .or_else(|| options.fallback_title.clone())
        .unwrap_or_else(|| "Untitled document".to_string());

    Ok(ExtractedDocument {
        doc_id: options
            .doc_id
            .clone()
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string()),
        title,
        pages,
        created_at: Utc::now(),
        section_map,
    })
}

fn info_title(doc: &Document) -> Option<String> {
    let info = doc.trailer.get(b"Info").ok()?;
    let info = match info {
        Object::Reference(id) => doc.get_dictionary(*id).ok()?,
        Object::Dictionary(d) => d,
        _ => return None,
    };
    let title = lopdf::decode_text_string(info.get(b"Title").ok()?).ok()?;
    let title = title.trim();
    (!title.is_empty()).then(|| title.to_string())
}

pub(crate) fn per_page_sections(page_count: u32) -> Vec<SectionRange> {
    (1..=page_count)
        .map(|n| SectionRange {
            label: format!("Page {n}"),
            first_page: n,
            last_page: n,
        })
        .collect()
}

/// One section per top-level bookmark, each running until the next bookmark.
fn outline_sections(doc: &Document, page_count: u32) -> Option<Vec<SectionRange>> {
    let toc = doc.get_toc().ok()?;
    let mut starts: Vec<(u32, String)> = toc
        .toc
        .iter()
        .filter(|entry| entry.level == 1)
        .filter_map(|entry| {
            let page = u32::try_from(entry.page).ok()?;
            (1..=page_count).contains(&page).then(|| (page, entry.title.trim().to_string()))
        })
        .collect();
    // Stable sort keeps bookmark order for entries sharing a start page.
    starts.sort_by_key(|(page, _)| *page);
    starts.dedup_by_key(|(page, _)| *page);
    if starts.is_empty() {
        return None;
    }
    if starts[0].0 > 1 {
        starts.insert(0, (1, "Front matter".to_string()));
    }

    let mut sections = Vec::with_capacity(starts.len());
    for (i, (first, title)) in starts.iter().enumerate() {
        let last = starts.get(i + 1).map(|(next, _)| next - 1).unwrap_or(page_count);
        let mut label = if title.is_empty() { format!("Section {}", i + 1) } else { title.clone() };
        if sections.iter().any(|s: &SectionRange| s.label == label) {
            label = format!("{label} ({first})");
        }
        sections.push(SectionRange {
            label,
            first_page: *first,
            last_page: last,
        });
    }
    Some(sections)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Matrix([f64; 6]);

impl Matrix {
    const IDENTITY: Matrix = Matrix([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);

    fn translate(tx: f64, ty: f64) -> Matrix {
        Matrix([1.0, 0.0, 0.0, 1.0, tx, ty])
    }

    /// `self × other` in PDF row-vector convention.
    fn then(&self, other: &Matrix) -> Matrix {
        let [a, b, c, d, e, f] = self.0;
        let [a2, b2, c2, d2, e2, f2] = other.0;
        Matrix([
            a * a2 + b * c2,
            a * b2 + b * d2,
            c * a2 + d * c2,
            c * b2 + d * d2,
            e * a2 + f * c2 + e2,
            e * b2 + f * d2 + f2,
        ])
    }

    fn origin(&self) -> (f64, f64) {
        (self.0[4], self.0[5])
    }

    fn vertical_scale(&self) -> f64 {
        self.0[2].hypot(self.0[3])
    }
}

struct PageFont<'a> {
    encoding: Option<Encoding<'a>>,
    widths: Option<(i64, Vec<f64>)>,
    two_byte: bool,
}

impl PageFont<'_> {
    fn decode(&self, bytes: &[u8]) -> String {
        match &self.encoding {
            Some(enc) => Document::decode_text(enc, bytes).unwrap_or_else(|_| latin1(bytes)),
            None => latin1(bytes),
        }
    }

    /// Advance in thousandths of text space units, plus the number of space glyphs.
    fn advance(&self, bytes: &[u8], decoded: &str) -> (f64, usize) {
        let spaces = if self.two_byte {
            0
        } else {
            bytes.iter().filter(|&&b| b == b' ').count()
        };
        match (&self.widths, self.two_byte) {
            (Some((first, widths)), false) => {
                let total = bytes
                    .iter()
                    .map(|&b| {
                        usize::try_from(i64::from(b) - first)
                            .ok()
                            .and_then(|i| widths.get(i).copied())
                            .unwrap_or(DEFAULT_GLYPH_WIDTH * 1000.0)
                    })
                    .sum();
                (total, spaces)
            }
            _ => (decoded.chars().count() as f64 * DEFAULT_GLYPH_WIDTH * 1000.0, spaces),
        }
    }
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn number(obj: &Object) -> Option<f64> {
    match obj {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(f64::from(*r)),
        _ => None,
    }
}

fn load_fonts<'a>(doc: &'a Document, page_id: lopdf::ObjectId) -> BTreeMap<Vec<u8>, PageFont<'a>> {
    let Ok(fonts) = doc.get_page_fonts(page_id) else {
        return BTreeMap::new();
    };
    fonts
        .into_iter()
        .map(|(name, dict)| {
            let two_byte = matches!(dict.get(b"Subtype").and_then(|s| s.as_name()), Ok(b"Type0"));
            let font = PageFont {
                encoding: dict.get_font_encoding(doc).ok(),
                widths: simple_widths(doc, dict),
                two_byte,
            };
            (name, font)
        })
        .collect()
}

fn simple_widths(doc: &Document, dict: &Dictionary) -> Option<(i64, Vec<f64>)> {
    let first = dict.get(b"FirstChar").ok()?.as_i64().ok()?;
    let widths = match dict.get(b"Widths").ok()? {
        Object::Reference(id) => doc.get_object(*id).ok()?,
        other => other,
    };
    let widths = widths.as_array().ok()?.iter().filter_map(number).collect();
    Some((first, widths))
}

struct TextState {
    ctm: Matrix,
    stack: Vec<Matrix>,
    tm: Matrix,
    tlm: Matrix,
    font: Option<Vec<u8>>,
    size: f64,
    leading: f64,
    char_spacing: f64,
    word_spacing: f64,
    h_scale: f64,
    rise: f64,
}

impl Default for TextState {
    fn default() -> Self {
        Self {
            ctm: Matrix::IDENTITY,
            stack: Vec::new(),
            tm: Matrix::IDENTITY,
            tlm: Matrix::IDENTITY,
            font: None,
            size: 12.0,
            leading: 0.0,
            char_spacing: 0.0,
            word_spacing: 0.0,
            h_scale: 1.0,
            rise: 0.0,
        }
    }
}

impl TextState {
    fn next_line(&mut self, tx: f64, ty: f64) {
        self.tlm = Matrix::translate(tx, ty).then(&self.tlm);
        self.tm = self.tlm;
    }

    fn user_matrix(&self) -> Matrix {
        Matrix::translate(0.0, self.rise).then(&self.tm).then(&self.ctm)
    }
}

/// Accumulates glyph runs into lines.
#[derive(Default)]
struct LineBuilder {
    lines: Vec<String>,
    current: String,
    /// Baseline y and the x where the previous run ended, in user space.
    cursor: Option<(f64, f64)>,
}

impl LineBuilder {
    fn push_run(&mut self, text: &str, start: (f64, f64), end_x: f64, font_size: f64) {
        if text.is_empty() {
            return;
        }
        let size = font_size.abs().max(1.0);
        if let Some((line_y, prev_end)) = self.cursor {
            if (start.1 - line_y).abs() > LINE_SHIFT * size {
                self.break_line();
            } else {
                let gap = start.0 - prev_end;
                if (gap > WORD_GAP * size || gap < -size) && !self.current.ends_with(char::is_whitespace) {
                    self.current.push(' ');
                }
            }
        }
        self.current.push_str(text);
        let line_y = match self.cursor {
            Some((y, _)) if (start.1 - y).abs() <= LINE_SHIFT * size => y,
            _ => start.1,
        };
        self.cursor = Some((line_y, end_x));
    }

    fn break_line(&mut self) {
        self.lines.push(std::mem::take(&mut self.current));
    }

    fn finish(mut self) -> String {
        self.break_line();
        let lines: Vec<String> = self
            .lines
            .iter()
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|l| !l.is_empty())
            .collect();
        lines.join("\n")
    }
}

fn extract_page(doc: &Document, page_id: lopdf::ObjectId) -> Result<String, IngestError> {
    let fonts = load_fonts(doc, page_id);
    let data = doc
        .get_page_content(page_id);
    let content = Content::decode(&data).map_err(|e| IngestError::MalformedPdf(format!("content stream: {e}")))?;

    let mut st = TextState::default();
    let mut out = LineBuilder::default();

    let show = |st: &mut TextState, out: &mut LineBuilder, bytes: &[u8]| {
        let font = st.font.as_ref().and_then(|name| fonts.get(name));
        let text = match font {
            Some(f) => f.decode(bytes),
            None => latin1(bytes),
        };
        let (width, spaces) = match font {
            Some(f) => f.advance(bytes, &text),
            None => (text.chars().count() as f64 * DEFAULT_GLYPH_WIDTH * 1000.0, 0),
        };
        let glyphs = text.chars().count() as f64;
        let tx = (width / 1000.0 * st.size + st.char_spacing * glyphs + st.word_spacing * spaces as f64) * st.h_scale;
        let m = st.user_matrix();
        let start = m.origin();
        let size = st.size * m.vertical_scale();
        st.tm = Matrix::translate(tx, 0.0).then(&st.tm);
        let end_x = st.user_matrix().origin().0;
        out.push_run(&text, start, end_x, size);
    };

    for op in &content.operations {
        let nums: Vec<f64> = op.operands.iter().filter_map(number).collect();
        match op.operator.as_str() {
            "q" => st.stack.push(st.ctm),
            "Q" => {
                if let Some(m) = st.stack.pop() {
                    st.ctm = m;
                }
            }
            "cm" if nums.len() == 6 => {
                let m = Matrix([nums[0], nums[1], nums[2], nums[3], nums[4], nums[5]]);
                st.ctm = m.then(&st.ctm);
            }
            "BT" => {
                st.tm = Matrix::IDENTITY;
                st.tlm = Matrix::IDENTITY;
            }
            "Tf" => {
                st.font = op.operands.first().and_then(|o| o.as_name().ok()).map(<[u8]>::to_vec);
                if let Some(size) = op.operands.get(1).and_then(number) {
                    st.size = size;
                }
            }
            "TL" if !nums.is_empty() => st.leading = nums[0],
            "Tc" if !nums.is_empty() => st.char_spacing = nums[0],
            "Tw" if !nums.is_empty() => st.word_spacing = nums[0],
            "Tz" if !nums.is_empty() => st.h_scale = nums[0] / 100.0,
            "Ts" if !nums.is_empty() => st.rise = nums[0],
            "Td" if nums.len() == 2 => st.next_line(nums[0], nums[1]),
            "TD" if nums.len() == 2 => {
                st.leading = -nums[1];
                st.next_line(nums[0], nums[1]);
            }
            "Tm" if nums.len() == 6 => {
                st.tlm = Matrix([nums[0], nums[1], nums[2], nums[3], nums[4], nums[5]]);
                st.tm = st.tlm;
            }
            "T*" => st.next_line(0.0, -st.leading),
            "Tj" => {
                if let Some(Object::String(bytes, _)) = op.operands.first() {
                    show(&mut st, &mut out, bytes);
                }
            }
            "'" => {
                st.next_line(0.0, -st.leading);
                if let Some(Object::String(bytes, _)) = op.operands.first() {
                    show(&mut st, &mut out, bytes);
                }
            }
            "\"" => {
                if nums.len() >= 2 {
                    st.word_spacing = nums[0];
                    st.char_spacing = nums[1];
                }
                st.next_line(0.0, -st.leading);
                if let Some(Object::String(bytes, _)) = op.operands.get(2) {
                    show(&mut st, &mut out, bytes);
                }
            }
            "TJ" => {
                let Some(Object::Array(items)) = op.operands.first() else {
                    continue;
                };
                for item in items {
                    match item {
                        Object::String(bytes, _) => show(&mut st, &mut out, bytes),
                        other => {
                            if let Some(adj) = number(other) {
                                let tx = -adj / 1000.0 * st.size * st.h_scale;
                                st.tm = Matrix::translate(tx, 0.0).then(&st.tm);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(out.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::pdfgen::PdfBuilder;

    #[test]
    fn empty_input_is_malformed() {
        assert!(matches!(extract(b""), Err(IngestError::MalformedPdf(_))));
        assert!(matches!(extract(b"%PDF-1.4 garbage"), Err(IngestError::MalformedPdf(_))));
    }

    #[test]
    fn second_page_holds_its_line() {
        let pdf = PdfBuilder::new("Three pages")
            .page(["First page"])
            .page(["Hello world"])
            .page(["Third"])
            .build();
        let doc = extract(&pdf).unwrap();
        assert_eq!(doc.pages.len(), 3);
        assert_eq!(doc.pages[1].text, "Hello world");
        assert_eq!(doc.pages[1].char_count, 11);
        assert_eq!(doc.title, "Three pages");
        let labels: Vec<_> = doc.section_map.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["Page 1", "Page 2", "Page 3"]);
    }

    #[test]
    fn blank_pdf_has_no_text_layer() {
        let pdf = PdfBuilder::new("").page(Vec::<String>::new()).build();
        assert!(matches!(extract(&pdf), Err(IngestError::NoTextLayer)));
    }

    #[test]
    fn bookmarks_define_sections() {
        let pdf = PdfBuilder::new("Outlined")
            .page(["intro"])
            .page(["more intro"])
            .page(["chapter two"])
            .page(["chapter two cont"])
            .bookmark("Introduction", 1)
            .bookmark("Chapter 2", 3)
            .build();
        let doc = extract(&pdf).unwrap();
        assert_eq!(
            doc.section_map,
            vec![
                SectionRange { label: "Introduction".into(), first_page: 1, last_page: 2 },
                SectionRange { label: "Chapter 2".into(), first_page: 3, last_page: 4 },
            ]
        );
    }

    #[test]
    fn lines_are_joined_with_single_newlines() {
        let pdf = PdfBuilder::new("x").page(["alpha   beta", "", "gamma"]).build();
        let doc = extract(&pdf).unwrap();
        assert_eq!(doc.pages[0].text, "alpha beta\ngamma");
    }

    #[test]
    fn kerned_runs_and_positioned_fragments() {
        // Hand-written content stream exercising TJ spacing and same-line Td moves.
        let content = b"BT /F1 10 Tf 72 700 Td [(Ker) -30 (ned) -400 (words)] TJ 200 0 Td (far) Tj ET \
BT /F1 10 Tf 12 TL 72 680 Td (next) Tj (line) ' ET";
        let pdf = PdfBuilder::from_raw_content(content.to_vec());
        let doc = extract(&pdf).unwrap();
        assert_eq!(doc.pages[0].text, "Kerned words far\nnext\nline");
    }

    #[test]
    fn extraction_is_deterministic() {
        let pdf = PdfBuilder::new("d").page(["one two", "three"]).page(["four"]).build();
        let a = extract(&pdf).unwrap();
        let b = extract(&pdf).unwrap();
        assert_eq!(a.pages, b.pages);
        assert_eq!(a.section_map, b.section_map);
        assert_ne!(a.doc_id, b.doc_id);
    }
}
