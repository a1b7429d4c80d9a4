//! Normalized comparison keys for cited references.

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::model::CitedReference;

/// The normalized fields a cited reference is compared on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedKey {
    pub surname: String,
    pub rpy: Option<i32>,
    pub source_norm: String,
    pub volume_norm: String,
    pub page_norm: String,
    pub doi: Option<String>,
}

pub fn canonical_key(cr: &CitedReference) -> NormalizedKey {
    NormalizedKey {
        surname: cr
            .first_author()
            .map(|a| fold_text(family_name(a)))
            .unwrap_or_default(),
        rpy: cr.rpy,
        source_norm: cr.source.as_deref().map(fold_text).unwrap_or_default(),
        volume_norm: cr
            .volume
            .as_deref()
            .map(|v| strip_marker(v, 'v'))
            .unwrap_or_default(),
        page_norm: cr
            .page
            .as_deref()
            .map(|p| strip_marker(p, 'p'))
            .unwrap_or_default(),
        doi: cr.doi.as_deref().and_then(normalize_doi),
    }
}

pub fn normalize_doi(doi: &str) -> Option<String> {
    let d = doi.trim();
    (!d.is_empty()).then(|| d.to_lowercase())
}

/// Compatibility-decomposes, drops combining marks and punctuation,
/// lowercases and collapses whitespace.
pub fn fold_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.nfkd() {
        if is_combining_mark(c) {
            continue;
        }
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if !c.is_alphanumeric() {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Folds, removes all whitespace, then strips leading `marker` letters
/// (e.g. `V122` -> `122`) unless nothing would remain.
fn strip_marker(s: &str, marker: char) -> String {
    let folded: String = fold_text(s)
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let stripped = folded.trim_start_matches(marker);
    if stripped.is_empty() {
        folded.chars().take(1).collect()
    } else {
        stripped.to_string()
    }
}

/// Family-name part of a person name.
///
/// `Surname, I.` keeps the part before the comma; `SURNAME IN` drops a
/// trailing initials token (uppercase letters and dots, at most four letters).
pub fn family_name(author: &str) -> &str {
    let author = author.trim();
    if let Some((family, _)) = author.split_once(',') {
        return family.trim();
    }
    let Some((head, last)) = author.rsplit_once(char::is_whitespace) else {
        return author;
    };
    let letters: Vec<char> = last.chars().filter(|c| *c != '.' && *c != '-').collect();
    let initials =
        !letters.is_empty() && letters.len() <= 4 && letters.iter().all(|c| c.is_uppercase());
    if initials && !head.trim().is_empty() {
        head.trim_end()
    } else {
        author
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Origin;
    use proptest::prelude::*;

    fn wos(raw: &str) -> CitedReference {
        CitedReference::raw_only(raw, Origin::Wos)
    }

    #[test]
    fn garfield_key() {
        let mut c = wos("GARFIELD E, 1955, SCIENCE, V122, P108");
        c.authors = vec!["GARFIELD E".into()];
        c.rpy = Some(1955);
        c.source = Some("SCIENCE".into());
        c.volume = Some("V122".into());
        c.page = Some("P108".into());
        let k = canonical_key(&c);
        assert_eq!(k.surname, "garfield");
        assert_eq!(k.rpy, Some(1955));
        assert_eq!(k.source_norm, "science");
        assert_eq!(k.volume_norm, "122");
        assert_eq!(k.page_norm, "108");
        assert_eq!(k.doi, None);
    }

    #[test]
    fn empty_reference_key() {
        let k = canonical_key(&wos("x"));
        assert_eq!(
            k,
            NormalizedKey {
                surname: String::new(),
                rpy: None,
                source_norm: String::new(),
                volume_norm: String::new(),
                page_norm: String::new(),
                doi: None,
            }
        );
    }

    #[test]
    fn doi_lowercased() {
        let mut c = wos("x");
        c.doi = Some("10.1002/ASI.23089".into());
        assert_eq!(canonical_key(&c).doi.as_deref(), Some("10.1002/asi.23089"));
    }

    #[test]
    fn family_names() {
        assert_eq!(family_name("GARFIELD E"), "GARFIELD");
        assert_eq!(family_name("VAN ECK NJ"), "VAN ECK");
        assert_eq!(family_name("van Eck, N.J."), "van Eck");
        assert_eq!(family_name("Garfield E."), "Garfield");
        assert_eq!(family_name("ANON"), "ANON");
        assert_eq!(family_name("van eck"), "van eck");
    }

    #[test]
    fn diacritics_and_punctuation_fold() {
        assert_eq!(fold_text("Müller-Lüdenscheidt"), "mullerludenscheidt");
        assert_eq!(fold_text("J. Am.  Chem. Soc."), "j am chem soc");
        assert_eq!(fold_text("O'Brien"), "obrien");
        assert_eq!(fold_text("ﬁsher"), "fisher");
    }

    #[test]
    fn scopus_and_wos_authors_share_surname() {
        let mut a = wos("a");
        a.authors = vec!["LEYDESDORFF L".into()];
        let mut b = CitedReference::raw_only("b", Origin::Scopus);
        b.authors = vec!["Leydesdorff, L.".into(), "Bornmann, L.".into()];
        assert_eq!(canonical_key(&a).surname, canonical_key(&b).surname);
    }

    proptest! {
        #[test]
        fn key_idempotent_under_renormalization(
            author in proptest::option::of("\\PC{0,20}"),
            source in proptest::option::of("\\PC{0,20}"),
            volume in proptest::option::of("[vV]{0,3}[0-9a-zA-Z .]{0,6}"),
            page in proptest::option::of("[pP]{0,3}[0-9a-zA-Z .-]{0,6}"),
            doi in proptest::option::of("[ -~]{0,12}"),
            rpy in proptest::option::of(1000i32..3000),
        ) {
            let mut c = wos("raw");
            c.authors = author.into_iter().collect();
            c.source = source;
            c.volume = volume;
            c.page = page;
            c.doi = doi;
            c.rpy = rpy;
            let k = canonical_key(&c);

            let mut rebuilt = wos("raw");
            if !k.surname.is_empty() {
                rebuilt.authors = vec![k.surname.clone()];
            }
            rebuilt.source = Some(k.source_norm.clone()).filter(|s| !s.is_empty());
            rebuilt.volume = Some(k.volume_norm.clone()).filter(|s| !s.is_empty());
            rebuilt.page = Some(k.page_norm.clone()).filter(|s| !s.is_empty());
            rebuilt.doi = k.doi.clone();
            rebuilt.rpy = k.rpy;
            prop_assert_eq!(canonical_key(&rebuilt), k);
        }
    }
}
