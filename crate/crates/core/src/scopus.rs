//! Scopus CSV export with a `References` column.
//!
//! Every row is one citing publication. The `References` cell holds the cited
//! references separated by `"; "` outside of parentheses; each piece is parsed
//! best-effort with [`parse_scopus_cr`].

use std::borrow::Cow;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::convert;
use crate::key::family_name;
use crate::model::{
    is_valid_rpy, CitedReference, Dataset, DatasetBuilder, Field, Origin, SourceFile,
};
use crate::wos::decode_text;

pub const REFERENCES: &str = "References";

/// Columns always present in written files, in this order.
pub const MIN_COLUMNS: [&str; 8] = [
    "Authors",
    "Title",
    "Year",
    "Source title",
    "Volume",
    "Page start",
    "DOI",
    REFERENCES,
];

#[derive(Debug, Error)]
pub enum ScopusError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("unreadable CSV header: {0}")]
    Header(#[from] csv::Error),
}

/// A row that could not be read; the row is skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ScopusImport {
    pub dataset: Dataset,
    pub row_errors: Vec<RowError>,
}

/// One data row keyed by column header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopusRow {
    pub cells: Vec<(String, String)>,
}

impl ScopusRow {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.cells
            .iter()
            .find(|(h, _)| header_matches(h, column))
            .map(|(_, v)| v.as_str())
    }
}

fn header_matches(header: &str, column: &str) -> bool {
    header.trim().eq_ignore_ascii_case(column.trim())
}

/// Parses a Scopus CSV export.
pub fn parse_scopus_csv(name: &str, bytes: &[u8]) -> Result<ScopusImport, ScopusError> {
    let text = decode_text(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let ref_col = headers
        .iter()
        .position(|h| header_matches(h, REFERENCES))
        .ok_or_else(|| ScopusError::MissingColumn(REFERENCES.to_string()))?;
    let year_col = headers.iter().position(|h| header_matches(h, "Year"));

    let mut builder = DatasetBuilder::new(Origin::Scopus);
    let mut row_errors = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{name}: row {row} skipped: {e}");
                row_errors.push(RowError {
                    row,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if record.len() > headers.len() {
            log::debug!(
                "{name}: row {row} has {} cells for {} columns; extra cells ignored",
                record.len(),
                headers.len()
            );
        }
        let cell = |i: usize| record.get(i).unwrap_or("");
        let mut fields = Vec::with_capacity(headers.len());
        for (i, h) in headers.iter().enumerate() {
            if i == ref_col {
                fields.push(Field::new(h.clone(), Vec::new()));
            } else {
                fields.push(Field::single(h.clone(), cell(i)));
            }
        }
        let refs = split_references(cell(ref_col))
            .into_iter()
            .map(parse_scopus_cr)
            .collect();
        let pub_year = year_col.and_then(|i| cell(i).trim().parse().ok());
        builder.push_publication(Origin::Scopus, fields, pub_year, refs);
    }
    builder.add_source(SourceFile::new(name, Origin::Scopus, bytes.to_vec()));
    Ok(ScopusImport {
        dataset: builder.finish(),
        row_errors,
    })
}

/// Splits a `References` cell on `"; "` outside parentheses. Blank pieces are
/// dropped; pieces are trimmed.
pub fn split_references(cell: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let bytes = cell.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b';' if depth == 0 && bytes.get(i + 1) == Some(&b' ') && i >= start => {
                out.push(&cell[start..i]);
                start = i + 2;
            }
            _ => {}
        }
    }
    if start <= cell.len() {
        out.push(&cell[start..]);
    }
    out.into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([0-9]{4})\)").unwrap());
static SURNAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\p{L}[\p{L}\p{M}'’\-. ]*$").unwrap());
static INITIALS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\p{Lu}\.(?:[ \-]*\p{Lu}\.)*$").unwrap());
static PAGE_AFTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[\s,(])pp?\.\s*([A-Za-z]?[0-9][0-9A-Za-z]*)").unwrap());
static PAGE_BEFORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9]+)\s?pp?\.").unwrap());
static PAGE_SEGMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^pp?\.").unwrap());
static DOI: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bdoi:?\s*(10\.[^\s,;]+)").unwrap());
static VOLUME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]+[A-Za-z]?)(?:\s*\([^)]*\))?$").unwrap());

/// Finds the first `(dddd)` whose value is an accepted year.
fn find_year(text: &str) -> Option<(i32, usize, usize)> {
    YEAR.captures_iter(text).find_map(|c| {
        let m = c.get(0)?;
        let y: i32 = c[1].parse().ok()?;
        is_valid_rpy(y).then_some((y, m.start(), m.end()))
    })
}

/// Reads leading `Surname, I.` pairs. Returns the names and the byte offset
/// just past the last one consumed.
fn leading_authors(text: &str) -> (Vec<String>, usize) {
    let mut authors = Vec::new();
    let mut consumed = 0;
    let mut pos = 0;
    loop {
        let rest = &text[pos..];
        let Some(c1) = rest.find(',') else { break };
        let surname = rest[..c1].trim();
        let after = &rest[c1 + 1..];
        let c2 = after.find(',').unwrap_or(after.len());
        let initials = after[..c2].trim();
        if !SURNAME.is_match(surname) || !INITIALS.is_match(initials) {
            break;
        }
        authors.push(format!("{surname}, {initials}"));
        pos += c1 + 1 + c2;
        consumed = pos;
        // "et al." trailing the list belongs to the author segment
        let tail = &text[pos..];
        if let Some(stripped) = tail.strip_prefix(',') {
            if stripped.trim_start().starts_with("et al.") {
                let skip = stripped.find("et al.").unwrap_or(0) + "et al.".len();
                pos += 1 + skip;
                consumed = pos;
                break;
            }
        }
        if pos >= text.len() {
            break;
        }
        pos += 1; // skip the separating comma
    }
    (authors, consumed)
}

fn find_page(text: &str) -> Option<String> {
    let after = PAGE_AFTER
        .captures(text)
        .map(|c| (c.get(0).unwrap().start(), c[1].to_string()));
    let before = PAGE_BEFORE
        .captures(text)
        .map(|c| (c.get(0).unwrap().start(), c[1].to_string()));
    match (after, before) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a.1 } else { b.1 }),
        (a, b) => a.or(b).map(|x| x.1),
    }
}

fn is_marker_segment(seg: &str) -> bool {
    PAGE_SEGMENT.is_match(seg) || seg.to_ascii_lowercase().starts_with("doi")
}

/// Best-effort parse of one Scopus reference string.
///
/// The year is the first `(dddd)` in the string. Text before it is an author
/// list (`Surname, I.` pairs) followed by the title; text after it yields the
/// source (first non-empty comma segment), a volume directly following the
/// source, and the page next to `p.`/`pp.`. Text that fits none of these
/// stays in `raw` only. Never fails.
pub fn parse_scopus_cr(text: &str) -> CitedReference {
    let mut cr = CitedReference::raw_only(text, Origin::Scopus);
    let body = text.trim();
    let year = find_year(body);
    let prefix = match year {
        Some((_, start, _)) => &body[..start],
        None => body,
    };

    let (authors, consumed) = leading_authors(prefix);
    cr.authors = authors;

    let tail = match year {
        Some((y, _, end)) => {
            cr.rpy = Some(y);
            let title = prefix[consumed..]
                .trim_start_matches(|c: char| c == ',' || c.is_whitespace())
                .trim_end_matches(|c: char| c == ',' || c.is_whitespace());
            if !title.is_empty() {
                cr.title = Some(title.to_string());
            }

            let suffix = &body[end..];
            let mut segments = suffix.split(',').map(str::trim);
            let mut source_found = false;
            for seg in segments.by_ref() {
                if seg.is_empty() {
                    continue;
                }
                if !is_marker_segment(seg) {
                    cr.source = Some(seg.to_string());
                    source_found = true;
                }
                break;
            }
            if source_found {
                if let Some(next) = segments.next() {
                    if let Some(c) = VOLUME.captures(next) {
                        cr.volume = Some(c[1].to_string());
                    }
                }
            }
            suffix
        }
        None => &body[consumed..],
    };

    cr.page = find_page(tail);
    cr.doi = DOI
        .captures(body)
        .map(|c| c[1].trim_end_matches(['.', ')', ']']).to_lowercase());
    cr
}

/// Converts a WoS `SURNAME IN` name into the Scopus `SURNAME, I.N.` shape.
fn scopus_author(name: &str) -> String {
    let name = name.trim();
    if name.contains(',') {
        return name.to_string();
    }
    let family = family_name(name);
    let given = name[family.len()..].trim();
    if given.is_empty() {
        return family.to_string();
    }
    let initials: String = given
        .chars()
        .filter(|c| c.is_alphabetic())
        .map(|c| format!("{c}."))
        .collect();
    format!("{family}, {initials}")
}

fn sanitize(s: &str) -> String {
    s.replace("; ", ", ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders a reference in the Scopus grammar:
/// `Authors, Title (Year) Source, Volume, pp. Page, DOI: doi`.
pub fn render_scopus_cr(cr: &CitedReference) -> String {
    let mut head: Vec<String> = cr
        .authors
        .iter()
        .map(|a| sanitize(&scopus_author(a)))
        .collect();
    let title = cr.title.as_deref().map(sanitize).filter(|t| !t.is_empty());
    let mut out = String::new();
    let mut tail: Vec<String> = Vec::new();
    let source = cr
        .source
        .as_deref()
        .map(|s| sanitize(&s.replace(',', " ")))
        .filter(|s| !s.is_empty());
    let volume = cr
        .volume
        .as_deref()
        .map(|v| v.trim().trim_start_matches('V').to_string())
        .filter(|v| VOLUME.is_match(v));
    let page = cr
        .page
        .as_deref()
        .map(|p| {
            let p = p.trim();
            p.strip_prefix('P')
                .filter(|rest| !rest.is_empty())
                .unwrap_or(p)
                .to_string()
        })
        .filter(|p| !p.is_empty() && !p.contains([',', ';']));

    match cr.rpy {
        Some(y) => {
            match (head.is_empty(), &title) {
                (_, Some(t)) => {
                    head.push(t.clone());
                    out.push_str(&head.join(", "));
                    out.push(' ');
                }
                (false, None) => {
                    out.push_str(&head.join(", "));
                    out.push_str(", ");
                }
                (true, None) => {}
            }
            out.push_str(&format!("({y})"));
            if let Some(s) = &source {
                out.push(' ');
                out.push_str(s);
                if let Some(v) = &volume {
                    out.push_str(", ");
                    out.push_str(v);
                }
            }
        }
        None => {
            if let Some(t) = &title {
                head.push(t.clone());
            }
            out.push_str(&head.join(", "));
            if let Some(s) = &source {
                tail.push(s.clone());
            }
            if let Some(v) = &volume {
                tail.push(v.clone());
            }
        }
    }
    if let Some(p) = page {
        tail.push(format!("pp. {p}"));
    }
    if let Some(d) = cr.doi.as_deref().filter(|d| !d.trim().is_empty()) {
        tail.push(format!("DOI: {}", d.trim()));
    }
    for t in tail {
        if !out.is_empty() {
            out.push_str(", ");
        }
        out.push_str(&t);
    }
    if out.is_empty() {
        sanitize(&cr.raw)
    } else {
        out
    }
}

fn reference_string(cr: &CitedReference) -> Cow<'_, str> {
    if cr.origin == Origin::Scopus && parse_scopus_cr(&cr.raw).same_fields(cr) {
        Cow::Borrowed(cr.raw.as_str())
    } else {
        Cow::Owned(render_scopus_cr(cr))
    }
}

/// Output column order: columns of Scopus-origin records as first seen, then
/// any missing minimum column.
fn output_columns(ds: &Dataset) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for p in ds
        .publications
        .iter()
        .filter(|p| p.origin == Origin::Scopus)
    {
        for f in &p.fields {
            if !cols.iter().any(|c| header_matches(c, &f.tag)) {
                cols.push(f.tag.clone());
            }
        }
    }
    for m in MIN_COLUMNS {
        if !cols.iter().any(|c| header_matches(c, m)) {
            cols.push(m.to_string());
        }
    }
    cols
}

/// Serializes a dataset as a Scopus CSV export.
pub fn write_scopus_csv(ds: &Dataset) -> String {
    let columns = output_columns(ds);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(&columns).expect("in-memory write");
    for p in &ds.publications {
        let converted;
        let fields = match p.origin {
            Origin::Scopus => &p.fields,
            Origin::Wos => {
                converted = convert::wos_fields_to_scopus(p);
                &converted
            }
        };
        let references = p
            .cr_ids
            .iter()
            .filter_map(|id| ds.crs.get(id))
            .map(reference_string)
            .collect::<Vec<_>>()
            .join("; ");
        let positional =
            fields.len() == columns.len() && fields.iter().zip(&columns).all(|(f, c)| &f.tag == c);
        let row: Vec<&str> = columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if header_matches(c, REFERENCES) {
                    return references.as_str();
                }
                let field = if positional {
                    Some(&fields[i])
                } else {
                    fields.iter().find(|f| header_matches(&f.tag, c))
                };
                field
                    .and_then(|f| f.values.first())
                    .map(String::as_str)
                    .unwrap_or("")
            })
            .collect();
        writer.write_record(&row).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output of UTF-8 cells is UTF-8")
}
