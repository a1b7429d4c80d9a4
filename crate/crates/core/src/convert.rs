//! Field mapping between the two vendor formats and the report of what a
//! conversion cannot carry over.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{CitingPublication, Dataset, Field, Origin};
use crate::scopus::REFERENCES;
use crate::wos::CR_TAG;

/// WoS tag <-> Scopus column pairs used in both directions.
const TAG_COLUMNS: &[(&str, &str)] = &[
    ("AU", "Authors"),
    ("TI", "Title"),
    ("PY", "Year"),
    ("SO", "Source title"),
    ("VL", "Volume"),
    ("IS", "Issue"),
    ("BP", "Page start"),
    ("EP", "Page end"),
    ("DI", "DOI"),
    ("AB", "Abstract"),
    ("TC", "Cited by"),
    ("DT", "Document Type"),
    ("LA", "Language of Original Document"),
    ("SN", "ISSN"),
];

/// Scopus-only column carried into the WoS accession tag.
const EID: &str = "EID";

fn column_for_tag(tag: &str) -> Option<&'static str> {
    TAG_COLUMNS.iter().find(|(t, _)| *t == tag).map(|(_, c)| *c)
}

fn tag_for_column(column: &str) -> Option<&'static str> {
    let column = column.trim();
    if column.eq_ignore_ascii_case(EID) {
        return Some("UT");
    }
    TAG_COLUMNS
        .iter()
        .find(|(_, c)| c.eq_ignore_ascii_case(column))
        .map(|(t, _)| *t)
}

fn split_scopus_authors(cell: &str) -> Vec<String> {
    let sep = if cell.contains(';') { ';' } else { ',' };
    cell.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// WoS tags for a Scopus-origin publication.
pub fn scopus_fields_to_wos(p: &CitingPublication) -> Vec<Field> {
    let mut out = vec![Field::single("PT", "J")];
    for f in &p.fields {
        if f.tag.trim().eq_ignore_ascii_case(REFERENCES) {
            out.push(Field::new(CR_TAG, Vec::new()));
            out.push(Field::single("NR", p.cr_ids.len().to_string()));
            continue;
        }
        let Some(tag) = tag_for_column(&f.tag) else {
            continue;
        };
        let value = f.values.join(" ");
        let value = value.trim();
        if value.is_empty() {
            continue;
        }
        let values = if tag == "AU" {
            split_scopus_authors(value)
        } else {
            vec![value.to_string()]
        };
        out.push(Field::new(tag, values));
    }
    out
}

/// Scopus columns for a WoS-origin publication.
pub fn wos_fields_to_scopus(p: &CitingPublication) -> Vec<Field> {
    let mut out = Vec::new();
    for f in &p.fields {
        if f.tag == CR_TAG {
            out.push(Field::new(REFERENCES, Vec::new()));
            continue;
        }
        let Some(column) = column_for_tag(&f.tag) else {
            continue;
        };
        let sep = if f.tag == "AU" { "; " } else { " " };
        out.push(Field::single(column, f.values.join(sep)));
    }
    out
}

/// What an export to `target` drops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossReport {
    pub target: Origin,
    /// Source field name -> number of publications whose non-empty value is dropped.
    pub dropped_fields: BTreeMap<String, usize>,
    /// References written with only their first author.
    pub truncated_authors: usize,
    /// References whose title is not written.
    pub dropped_titles: usize,
    /// References written without a title because none is known.
    pub missing_titles: usize,
}

impl LossReport {
    pub fn is_lossless(&self) -> bool {
        self.dropped_fields.is_empty() && self.truncated_authors == 0 && self.dropped_titles == 0
    }
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loss report for export to {}:", self.target)?;
        if self.is_lossless() && self.missing_titles == 0 {
            return writeln!(f, "  nothing dropped");
        }
        for (field, n) in &self.dropped_fields {
            writeln!(f, "  dropped field {field:?} on {n} publication(s)")?;
        }
        if self.truncated_authors > 0 {
            writeln!(
                f,
                "  {} cited reference(s) reduced to their first author",
                self.truncated_authors
            )?;
        }
        if self.dropped_titles > 0 {
            writeln!(
                f,
                "  {} cited reference title(s) dropped",
                self.dropped_titles
            )?;
        }
        if self.missing_titles > 0 {
            writeln!(
                f,
                "  {} cited reference(s) written without title (not present in the source)",
                self.missing_titles
            )?;
        }
        Ok(())
    }
}

pub fn loss_report(ds: &Dataset, target: Origin) -> LossReport {
    let mut report = LossReport {
        target,
        dropped_fields: BTreeMap::new(),
        truncated_authors: 0,
        dropped_titles: 0,
        missing_titles: 0,
    };
    for p in ds.publications.iter().filter(|p| p.origin != target) {
        for f in &p.fields {
            if f.values.iter().all(|v| v.trim().is_empty()) {
                continue;
            }
            let kept = match p.origin {
                Origin::Scopus => tag_for_column(&f.tag).is_some(),
                Origin::Wos => column_for_tag(&f.tag).is_some(),
            };
            if !kept {
                *report.dropped_fields.entry(f.tag.clone()).or_default() += 1;
            }
        }
    }
    for cr in ds.crs.values() {
        match target {
            Origin::Wos => {
                report.truncated_authors += usize::from(cr.authors.len() > 1);
                report.dropped_titles += usize::from(cr.title.is_some());
            }
            Origin::Scopus => {
                report.missing_titles += usize::from(cr.title.is_none());
            }
        }
    }
    report
}
