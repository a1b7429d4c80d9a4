//! Web of Science tagged plain-text export ("Other Reference Software").
//!
//! A file starts with `FN` and `VR` header lines, holds records terminated by
//! `ER`, and ends with `EF`. Each line is a two-character tag, a space and a
//! value; continuation lines start with three spaces and belong to the most
//! recent tag. Inside `CR`, every line is one cited reference.

use std::borrow::Cow;

use thiserror::Error;

use crate::convert;
use crate::model::{
    is_valid_rpy, CitedReference, Dataset, DatasetBuilder, Field, Origin, SourceFile,
};

pub const CR_TAG: &str = "CR";
const HEADER: &str = "FN Clarivate Analytics Web of Science\nVR 1.0\n";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WosError {
    #[error("{source_name}:{line}: malformed WoS file: {reason}")]
    MalformedFile {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("{source_name}:{line}: record starting here has no ER terminator")]
    MalformedRecord { source_name: String, line: usize },
}

/// One named input file.
#[derive(Debug, Clone)]
pub struct WosInput {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl WosInput {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        WosInput {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

/// Tagged fields of one record, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WosRecordBlock {
    pub tags: Vec<(String, Vec<String>)>,
    /// 1-based line of the first tag.
    pub line: usize,
}

impl WosRecordBlock {
    fn value(&self, tag: &str) -> Option<&str> {
        self.tags
            .iter()
            .find(|(t, _)| t == tag)
            .and_then(|(_, v)| v.first())
            .map(String::as_str)
    }

    /// Deduplication key: the UT accession when present, else the record text.
    fn dedup_key(&self) -> String {
        match self.value("UT").map(str::trim).filter(|v| !v.is_empty()) {
            Some(ut) => format!("UT {ut}"),
            None => {
                let mut text = String::new();
                for (tag, values) in &self.tags {
                    text.push_str(tag);
                    for v in values {
                        text.push('\u{1f}');
                        text.push_str(v);
                    }
                    text.push('\n');
                }
                text
            }
        }
    }
}

/// Decodes UTF-8, falling back to a byte-per-char (Latin-1) reading that
/// keeps every input byte recoverable.
pub fn decode_text(bytes: &[u8]) -> Cow<'_, str> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(s) => Cow::Borrowed(s),
        Err(_) => Cow::Owned(bytes.iter().map(|&b| char::from(b)).collect()),
    }
}

fn split_tag(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    if bytes.len() < 2 {
        return None;
    }
    let is_tag_char = |b: u8| b.is_ascii_uppercase() || b.is_ascii_digit();
    if !is_tag_char(bytes[0]) || !is_tag_char(bytes[1]) {
        return None;
    }
    match bytes.get(2) {
        None => Some((&line[..2], "")),
        Some(b' ') => Some((&line[..2], &line[3..])),
        _ => None,
    }
}

/// Splits one export file into record blocks.
pub fn read_blocks(source_name: &str, text: &str) -> Result<Vec<WosRecordBlock>, WosError> {
    let malformed = |line: usize, reason: &str| WosError::MalformedFile {
        source_name: source_name.to_string(),
        line,
        reason: reason.to_string(),
    };

    let mut blocks = Vec::new();
    let mut current: Option<WosRecordBlock> = None;
    let mut seen_fn = false;
    let mut last_line = 0;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw_line.trim_end();
        if line.is_empty() {
            continue;
        }
        if !seen_fn {
            match split_tag(line) {
                Some(("FN", _)) => {
                    seen_fn = true;
                    continue;
                }
                _ => return Err(malformed(lineno, "file does not start with FN")),
            }
        }

        if let Some((tag, value)) = split_tag(line) {
            match (tag, current.as_mut()) {
                ("EF", Some(block)) => {
                    return Err(WosError::MalformedRecord {
                        source_name: source_name.to_string(),
                        line: block.line,
                    })
                }
                ("EF", None) => return Ok(blocks),
                ("ER", Some(_)) => {
                    blocks.extend(current.take());
                }
                ("ER", None) => return Err(malformed(lineno, "ER outside of a record")),
                ("FN" | "VR", None) => {}
                (_, Some(block)) => {
                    block
                        .tags
                        .push((tag.to_string(), vec![value.trim().to_string()]));
                }
                (_, None) => {
                    current = Some(WosRecordBlock {
                        tags: vec![(tag.to_string(), vec![value.trim().to_string()])],
                        line: lineno,
                    });
                }
            }
        } else if let Some(block) = current.as_mut() {
            // Continuation of the most recent tag.
            match block.tags.last_mut() {
                Some((_, values)) => values.push(line.trim().to_string()),
                None => return Err(malformed(lineno, "continuation line without a tag")),
            }
        } else {
            return Err(malformed(lineno, "continuation line outside of a record"));
        }
    }

    if !seen_fn {
        return Err(malformed(1, "file does not start with FN"));
    }
    match current {
        Some(block) => Err(WosError::MalformedRecord {
            source_name: source_name.to_string(),
            line: block.line,
        }),
        None => Err(malformed(last_line.max(1), "missing EF terminator")),
    }
}

/// Parses one or more export files into a single dataset.
///
/// Records sharing a `UT` accession (or, without one, identical record text)
/// are kept once; the first occurrence wins.
pub fn parse_wos(inputs: &[WosInput]) -> Result<Dataset, WosError> {
    let mut builder = DatasetBuilder::new(Origin::Wos);
    for input in inputs {
        let text = decode_text(&input.bytes);
        let blocks = read_blocks(&input.name, &text)?;
        if blocks.len() > 500 {
            log::info!(
                "{}: {} records (vendor downloads hold at most 500)",
                input.name,
                blocks.len()
            );
        }
        let mut skipped = 0usize;
        for block in blocks {
            if !builder.claim_record(&block.dedup_key()) {
                skipped += 1;
                continue;
            }
            push_block(&mut builder, block);
        }
        if skipped > 0 {
            log::info!("{}: skipped {skipped} duplicate records", input.name);
        }
        builder.add_source(SourceFile::new(
            input.name.clone(),
            Origin::Wos,
            input.bytes.clone(),
        ));
    }
    Ok(builder.finish())
}

fn push_block(builder: &mut DatasetBuilder, block: WosRecordBlock) {
    let pub_year = block.value("PY").and_then(|v| v.trim().parse().ok());
    let mut fields = Vec::with_capacity(block.tags.len());
    let mut refs = Vec::new();
    for (tag, values) in block.tags {
        if tag == CR_TAG {
            refs.extend(
                values
                    .iter()
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_wos_cr(v)),
            );
            if !fields.iter().any(|f: &Field| f.tag == CR_TAG) {
                fields.push(Field::new(CR_TAG, Vec::new()));
            }
        } else {
            fields.push(Field::new(tag, values));
        }
    }
    builder.push_publication(Origin::Wos, fields, pub_year, refs);
}

fn is_year_segment(seg: &str) -> Option<i32> {
    if seg.len() == 4 && seg.bytes().all(|b| b.is_ascii_digit()) {
        seg.parse().ok().filter(|y| is_valid_rpy(*y))
    } else {
        None
    }
}

fn is_volume_marker(seg: &str) -> bool {
    seg.len() > 1 && seg.starts_with('V') && seg[1..].bytes().all(|b| b.is_ascii_digit())
}

fn is_page_marker(seg: &str) -> bool {
    seg.len() > 1 && seg.starts_with('P') && seg[1..].bytes().all(|b| b.is_ascii_alphanumeric())
}

fn doi_marker(seg: &str) -> Option<&str> {
    seg.strip_prefix("DOI ")
        .map(str::trim)
        .filter(|d| !d.is_empty())
}

/// Parses one `CR` value.
///
/// Comma-separated segments are assigned positionally: the first segment is
/// the (single) author unless it is a year; the first four-digit segment is
/// the year; the next non-marker segment after the year is the source;
/// `V<digits>` is the volume, `P<alnum>` the page, `DOI <rest>` the DOI.
/// Anything else is left in `raw` only.
pub fn parse_wos_cr(line: &str) -> CitedReference {
    let mut cr = CitedReference::raw_only(line, Origin::Wos);
    let mut seen_year = false;
    for (i, seg) in line.trim().split(',').map(str::trim).enumerate() {
        if seg.is_empty() {
            continue;
        }
        if let Some(year) = is_year_segment(seg) {
            if !seen_year {
                cr.rpy = Some(year);
                seen_year = true;
            }
            continue;
        }
        if i == 0 {
            cr.authors.push(seg.to_string());
            continue;
        }
        if is_volume_marker(seg) {
            if cr.volume.is_none() {
                cr.volume = Some(seg.to_string());
            }
        } else if is_page_marker(seg) {
            if cr.page.is_none() {
                cr.page = Some(seg.to_string());
            }
        } else if let Some(doi) = doi_marker(seg) {
            if cr.doi.is_none() {
                cr.doi = Some(doi.to_lowercase());
            }
        } else if seen_year && cr.source.is_none() {
            cr.source = Some(seg.to_string());
        }
    }
    cr
}

/// Converts a Scopus-style `Surname, I.` name into the WoS `Surname I` shape.
fn wos_author(name: &str) -> String {
    let name = name.trim();
    match name.split_once(',') {
        Some((family, given)) => {
            let initials: String = given
                .chars()
                .filter(|c| !matches!(c, '.' | ',') && !c.is_whitespace())
                .collect();
            let family = family.trim();
            if initials.is_empty() {
                family.to_string()
            } else {
                format!("{family} {initials}")
            }
        }
        None => name.replace(',', " "),
    }
}

/// Renders a reference in the WoS grammar: first author only, no title.
pub fn render_wos_cr(cr: &CitedReference) -> String {
    let clean = |s: &str| {
        s.replace(',', " ")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut segs: Vec<String> = Vec::new();
    if let Some(a) = cr.first_author() {
        let a = clean(&wos_author(a));
        if !a.is_empty() && is_year_segment(&a).is_none() {
            segs.push(a);
        }
    }
    if let Some(y) = cr.rpy {
        segs.push(y.to_string());
        if let Some(s) = cr.source.as_deref().map(clean).filter(|s| !s.is_empty()) {
            if is_year_segment(&s).is_none()
                && !is_volume_marker(&s)
                && !is_page_marker(&s)
                && doi_marker(&s).is_none()
            {
                segs.push(s);
            }
        }
    }
    if let Some(v) = cr.volume.as_deref().map(|v| clean(v).replace(' ', "")) {
        let v = v.strip_prefix('V').unwrap_or(&v).to_string();
        if !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()) {
            segs.push(format!("V{v}"));
        }
    }
    if let Some(p) = cr.page.as_deref().map(|p| clean(p).replace(' ', "")) {
        let p = if is_page_marker(&p) {
            p
        } else {
            format!("P{p}")
        };
        if is_page_marker(&p) {
            segs.push(p);
        }
    }
    if let Some(d) = cr.doi.as_deref().map(|d| d.replace(',', "")) {
        if !d.trim().is_empty() {
            segs.push(format!("DOI {}", d.trim()));
        }
    }
    let line = segs.join(", ");
    if line.is_empty() {
        cr.raw.replace('\n', " ")
    } else {
        line
    }
}

/// The line written for a reference: the original string when it still
/// parses to the entry's fields, otherwise a rendering of the fields.
fn cr_line(cr: &CitedReference) -> String {
    if cr.origin == Origin::Wos {
        let reparsed = parse_wos_cr(&cr.raw);
        if reparsed.same_fields(cr) && !cr.raw.contains('\n') {
            return cr.raw.clone();
        }
    }
    render_wos_cr(cr)
}

fn push_tag(out: &mut String, tag: &str, values: &[String]) {
    let mut first = true;
    for v in values {
        let v = v.trim_end();
        if first {
            out.push_str(tag);
            first = false;
        } else {
            out.push_str("  ");
        }
        if !v.is_empty() {
            out.push(' ');
            out.push_str(v);
        }
        out.push('\n');
    }
    if values.is_empty() {
        out.push_str(tag);
        out.push('\n');
    }
}

/// Serializes a dataset as a WoS tagged export.
///
/// WoS-origin publications keep their tags verbatim; Scopus-origin ones are
/// mapped onto WoS tags (see [`convert`]). Cited references carry at most the
/// first author and never a title.
pub fn write_wos(ds: &Dataset) -> String {
    let mut out = String::from(HEADER);
    for p in &ds.publications {
        let fields = match p.origin {
            Origin::Wos => Cow::Borrowed(&p.fields),
            Origin::Scopus => Cow::Owned(convert::scopus_fields_to_wos(p)),
        };
        let lines: Vec<String> = p
            .cr_ids
            .iter()
            .filter_map(|id| ds.crs.get(id))
            .map(cr_line)
            .collect();
        let mut wrote_cr = false;
        for f in fields.iter() {
            if f.tag == CR_TAG {
                if !lines.is_empty() && !wrote_cr {
                    push_tag(&mut out, CR_TAG, &lines);
                }
                wrote_cr = true;
            } else {
                push_tag(&mut out, &f.tag, &f.values);
            }
        }
        if !wrote_cr && !lines.is_empty() {
            push_tag(&mut out, CR_TAG, &lines);
        }
        out.push_str("ER\n\n");
    }
    out.push_str("EF\n");
    out
}
