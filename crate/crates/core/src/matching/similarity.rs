use crate::key::{canonical_key, fold_text, NormalizedKey};
use crate::model::CitedReference;

use super::SimilarityConfig;

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / longer length`, in [0, 1]. Two empty strings score 1.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Everything pair scoring needs from one reference, computed once.
#[derive(Debug, Clone)]
pub struct ScoringKey {
    raw: String,
    key: NormalizedKey,
    title_norm: String,
}

impl ScoringKey {
    pub fn new(cr: &CitedReference) -> Self {
        ScoringKey {
            raw: cr.raw.trim().to_string(),
            key: canonical_key(cr),
            title_norm: cr.title.as_deref().map(fold_text).unwrap_or_default(),
        }
    }

    /// Composite similarity of two keyed references.
    pub fn score(&self, other: &ScoringKey, cfg: &SimilarityConfig) -> f64 {
        if self.raw == other.raw {
            return 1.0;
        }
        if let (Some(x), Some(y)) = (&self.key.doi, &other.key.doi) {
            return if x == y { 1.0 } else { 0.0 };
        }
        let w = &cfg.weights;
        let (sa, sb) = if !self.title_norm.is_empty()
            && !other.title_norm.is_empty()
            && (self.key.source_norm.is_empty() || other.key.source_norm.is_empty())
        {
            (&self.title_norm, &other.title_norm)
        } else {
            (&self.key.source_norm, &other.key.source_norm)
        };
        let total = w.author * field(&self.key.surname, &other.key.surname)
            + w.source_or_title * field(sa, sb)
            + w.volume * field(&self.key.volume_norm, &other.key.volume_norm)
            + w.page * field(&self.key.page_norm, &other.key.page_norm);
        total.clamp(0.0, 1.0)
    }
}

/// Field similarity; a field missing on either side is neutral (0.5).
fn field(a: &str, b: &str) -> f64 {
    if a.is_empty() || b.is_empty() {
        0.5
    } else {
        normalized_similarity(a, b)
    }
}

/// Similarity of two cited references in [0, 1].
///
/// Equal DOIs score 1 and different DOIs 0. Otherwise the score is the
/// weighted sum of normalized edit similarities of first-author surname,
/// source (or title, when both have one and a source is missing), volume and
/// page. References with the same raw text score 1.
pub fn pair_similarity(a: &CitedReference, b: &CitedReference, cfg: &SimilarityConfig) -> f64 {
    ScoringKey::new(a).score(&ScoringKey::new(b), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Origin;
    use crate::wos::parse_wos_cr;
    use proptest::prelude::*;

    /// Textbook full-matrix recurrence, kept separate from the two-row version.
    fn oracle_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1)
                    .min(d[i][j - 1] + 1)
                    .min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn identical_references_score_one() {
        let cfg = SimilarityConfig::default();
        let a = parse_wos_cr("GARFIELD E, 1955, SCIENCE, V122, P108");
        assert_eq!(pair_similarity(&a, &a, &cfg), 1.0);
        let sparse = parse_wos_cr("ANON, [no year]");
        assert_eq!(pair_similarity(&sparse, &sparse, &cfg), 1.0);
    }

    #[test]
    fn doi_short_circuit() {
        let cfg = SimilarityConfig::default();
        let a = parse_wos_cr("GARFIELD E, 1955, SCIENCE, V122, P108, DOI 10.1/A");
        let b = parse_wos_cr("SMITH J, 1990, NATURE, V1, P2, DOI 10.1/a");
        assert_eq!(pair_similarity(&a, &b, &cfg), 1.0);
        let c = parse_wos_cr("GARFIELD E, 1955, SCIENCE, V122, P108, DOI 10.1/B");
        assert_eq!(pair_similarity(&a, &c, &cfg), 0.0);
    }

    #[test]
    fn surname_typo_matches_oracle() {
        let cfg = SimilarityConfig::default();
        let a = parse_wos_cr("GARFIELD E, 1955, SCIENCE, V122, P108");
        let b = parse_wos_cr("GARFELD E, 1955, SCIENCE, V122, P108");
        // garfield vs garfeld: distance from the oracle, longer length 8.
        let d = oracle_distance("garfield", "garfeld");
        assert_eq!(d, 1);
        let expected = 0.40 * (1.0 - d as f64 / 8.0) + 0.30 + 0.15 + 0.15;
        assert_eq!(pair_similarity(&a, &b, &cfg), expected);
        assert!((expected - 0.95).abs() < 1e-12);
    }

    #[test]
    fn absent_fields_are_neutral() {
        let cfg = SimilarityConfig::default();
        let a = parse_wos_cr("GARFIELD E, 1955, SCIENCE");
        let b = parse_wos_cr("GARFIELD E, 1955, SCIENCE, V122, P108");
        assert!((pair_similarity(&a, &b, &cfg) - (0.40 + 0.30 + 0.075 + 0.075)).abs() < 1e-12);
    }

    #[test]
    fn titles_compared_when_a_source_is_missing() {
        let cfg = SimilarityConfig::default();
        let mut a = CitedReference::raw_only("a", Origin::Scopus);
        a.title = Some("Reason, Truth and History".into());
        a.source = Some("Cambridge".into());
        let mut b = CitedReference::raw_only("b", Origin::Scopus);
        b.title = Some("Reason Truth and History".into());
        let s = pair_similarity(&a, &b, &cfg);
        assert!((s - (0.40 * 0.5 + 0.30 + 0.15 * 0.5 + 0.15 * 0.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn distance_matches_oracle(a in "\\PC{0,12}", b in "\\PC{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), oracle_distance(&a, &b));
        }

        #[test]
        fn similarity_is_symmetric_and_bounded(
            a in "[A-Z]{1,6} [A-Z]{0,2}, 19[0-9]{2}, [A-Z ]{0,8}(, V[0-9]{1,3})?(, P[0-9]{1,3})?",
            b in "[A-Z]{1,6} [A-Z]{0,2}, 19[0-9]{2}, [A-Z ]{0,8}(, V[0-9]{1,3})?(, P[0-9]{1,3})?",
        ) {
            let cfg = SimilarityConfig::default();
            let (x, y) = (parse_wos_cr(&a), parse_wos_cr(&b));
            let s = pair_similarity(&x, &y, &cfg);
            prop_assert_eq!(s, pair_similarity(&y, &x, &cfg));
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
