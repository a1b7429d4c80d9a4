//! Reference Publication Year Spectroscopy: counts per cited year, deviation
//! from the five-year median, most-cited references per year, and removal of
//! references by year.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::{canonical_key, fold_text};
use crate::model::{CitedReference, Dataset};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("empty year range {from}..={to}")]
    EmptyRange { from: i32, to: i32 },
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub rpy: i32,
    pub n_cr: u64,
    pub median_dev: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpySpectrum {
    /// One row per year from the first to the last cited year.
    pub rows: Vec<SpectrumRow>,
    /// Occurrences of references without a year (not in `rows`).
    pub missing_rpy: u64,
}

impl RpySpectrum {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.n_cr).sum()
    }

    pub fn row(&self, rpy: i32) -> Option<&SpectrumRow> {
        let first = self.rows.first()?.rpy;
        let idx = usize::try_from(rpy.checked_sub(first)?).ok()?;
        self.rows.get(idx)
    }

    /// `rpy,n_cr,median_dev` CSV with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rpy,n_cr,median_dev\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.rpy, r.n_cr, r.median_dev);
        }
        out
    }
}

/// Sums `n_cr` per year over a contiguous axis (gap years count zero).
pub fn rpy_histogram(ds: &Dataset) -> RpySpectrum {
    let mut per_year: BTreeMap<i32, u64> = BTreeMap::new();
    let mut missing = 0u64;
    for cr in ds.crs.values() {
        match cr.rpy {
            Some(y) => *per_year.entry(y).or_default() += u64::from(cr.n_cr),
            None => missing += u64::from(cr.n_cr),
        }
    }
    let (Some(&first), Some(&last)) = (per_year.keys().next(), per_year.keys().next_back()) else {
        return RpySpectrum {
            rows: Vec::new(),
            missing_rpy: missing,
        };
    };
    let counts: Vec<u64> = (first..=last)
        .map(|y| per_year.get(&y).copied().unwrap_or(0))
        .collect();
    let devs = compute_median_deviation(&counts);
    RpySpectrum {
        rows: (first..=last)
            .zip(counts)
            .zip(devs)
            .map(|((rpy, n_cr), median_dev)| SpectrumRow {
                rpy,
                n_cr,
                median_dev,
            })
            .collect(),
        missing_rpy: missing,
    }
}

/// Deviation of each count from the median of its five-year window
/// (two years either side, truncated at the ends). An even-sized window uses
/// the mean of its two middle values, rounded half away from zero.
pub fn compute_median_deviation(counts: &[u64]) -> Vec<i64> {
    (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(counts.len() - 1);
            let mut window: Vec<i64> = counts[lo..=hi].iter().map(|&c| c as i64).collect();
            window.sort_unstable();
            counts[i] as i64 - rounded_median(&window)
        })
        .collect()
}

fn rounded_median(sorted: &[i64]) -> i64 {
    let n = sorted.len();
    if n % 2 == 1 {
        return sorted[n / 2];
    }
    let twice = sorted[n / 2 - 1] + sorted[n / 2];
    if twice >= 0 {
        (twice + 1) / 2
    } else {
        (twice - 1) / 2
    }
}

/// Collation key for author order: folded surname; references without an
/// author sort after all others.
pub fn author_sort_key(cr: &CitedReference) -> (bool, String, String) {
    let surname = canonical_key(cr).surname;
    let full = cr.first_author().map(fold_text).unwrap_or_default();
    (surname.is_empty(), surname, full)
}

/// The `k` most frequent references of one year: by `n_cr` descending, then
/// author, then id.
pub fn top_crs_for_rpy(
    ds: &Dataset,
    rpy: i32,
    k: usize,
) -> Result<Vec<&CitedReference>, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::ZeroK);
    }
    let mut hits: Vec<(&CitedReference, (bool, String, String))> = ds
        .crs
        .values()
        .filter(|c| c.rpy == Some(rpy))
        .map(|c| (c, author_sort_key(c)))
        .collect();
    hits.sort_by(|(a, ka), (b, kb)| {
        b.n_cr
            .cmp(&a.n_cr)
            .then_with(|| ka.0.cmp(&kb.0))
            .then_with(|| ka.1.cmp(&kb.1))
            .then(a.id.cmp(&b.id))
    });
    hits.truncate(k);
    Ok(hits.into_iter().map(|(c, _)| c).collect())
}

/// Inclusive, non-empty year interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    from: i32,
    to: i32,
}

impl YearRange {
    pub fn new(from: i32, to: i32) -> Result<Self, AnalysisError> {
        if from > to {
            return Err(AnalysisError::EmptyRange { from, to });
        }
        Ok(YearRange { from, to })
    }

    pub fn from(&self) -> i32 {
        self.from
    }

    pub fn to(&self) -> i32 {
        self.to
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.from..=self.to).contains(&year)
    }
}

/// Drops every reference cited with a year in `range` (and, unless
/// `keep_missing`, every reference without a year). Publications stay, with
/// the dropped slots removed.
pub fn remove_by_rpy(ds: &Dataset, range: YearRange, keep_missing: bool) -> Dataset {
    let doomed = |c: &CitedReference| match c.rpy {
        Some(y) => range.contains(y),
        None => !keep_missing,
    };
    let mut out = ds.clone();
    out.crs.retain(|_, c| !doomed(c));
    if out.crs.len() == ds.crs.len() {
        return out;
    }
    for p in &mut out.publications {
        p.cr_ids.retain(|id| out.crs.contains_key(id));
    }
    let kept = &out.crs;
    out.merged_into.retain(|_, to| kept.contains_key(to));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CrId, DatasetBuilder, Origin};

    fn ds(refs: &[(Option<i32>, u32, &str)]) -> Dataset {
        // each entry: (year, n_cr, first author); n_cr realised as repeated slots
        let mut b = DatasetBuilder::new(Origin::Wos);
        let mut pubs: Vec<Vec<CitedReference>> = Vec::new();
        for (i, (y, n, author)) in refs.iter().enumerate() {
            let mut cr = CitedReference::raw_only(format!("{author} {i}"), Origin::Wos);
            cr.rpy = *y;
            if !author.is_empty() {
                cr.authors = vec![author.to_string()];
            }
            for k in 0..*n as usize {
                if pubs.len() <= k {
                    pubs.push(Vec::new());
                }
                pubs[k].push(cr.clone());
            }
        }
        for refs in pubs {
            b.push_publication(Origin::Wos, vec![], None, refs);
        }
        b.finish()
    }

    #[test]
    fn histogram_fills_gap_years() {
        let d = ds(&[
            (Some(1990), 2, "A"),
            (Some(1990), 1, "B"),
            (Some(1992), 4, "C"),
        ]);
        let s = rpy_histogram(&d);
        let counts: Vec<(i32, u64)> = s.rows.iter().map(|r| (r.rpy, r.n_cr)).collect();
        assert_eq!(counts, vec![(1990, 3), (1991, 0), (1992, 4)]);
        assert_eq!(s.missing_rpy, 0);
    }

    #[test]
    fn empty_dataset_gives_empty_spectrum() {
        let s = rpy_histogram(&Dataset::empty(crate::model::DatasetOrigin::Wos));
        assert!(s.rows.is_empty());
        assert_eq!(s.to_csv(), "rpy,n_cr,median_dev\n");
    }

    #[test]
    fn undated_references_reported_separately() {
        let d = ds(&[(None, 3, "A"), (Some(2000), 1, "B")]);
        let s = rpy_histogram(&d);
        assert_eq!(s.missing_rpy, 3);
        assert_eq!(s.total(), 1);
    }

    #[test]
    fn flat_series_has_zero_deviation() {
        assert_eq!(compute_median_deviation(&[5; 7]), vec![0; 7]);
    }

    #[test]
    fn spike_in_the_middle() {
        assert_eq!(compute_median_deviation(&[0, 0, 10, 0, 0])[2], 10);
    }

    #[test]
    fn truncated_windows_at_boundaries() {
        // year 0: window {4, 1, 9} -> median 4; year 1: {4, 1, 9, 6} -> (4+6)/2 = 5
        let devs = compute_median_deviation(&[4, 1, 9, 6, 2]);
        assert_eq!(devs[0], 0);
        assert_eq!(devs[1], 1 - 5);
        assert_eq!(compute_median_deviation(&[1, 2, 3, 4])[0], 1 - 2);
        // even window with odd sum rounds up: {1, 2, 3, 4} -> 2.5 -> 3
        assert_eq!(compute_median_deviation(&[2, 1, 3, 4])[1], 1 - 3);
        assert_eq!(compute_median_deviation(&[]), Vec::<i64>::new());
    }

    #[test]
    fn top_by_count_then_surname() {
        let d = ds(&[
            (Some(1990), 3, "ZETA Z"),
            (Some(1990), 7, "MIDDLE M"),
            (Some(1990), 3, "ALPHA A"),
            (Some(1991), 9, "OTHER O"),
        ]);
        let top = top_crs_for_rpy(&d, 1990, 2).unwrap();
        let names: Vec<_> = top.iter().map(|c| c.authors[0].as_str()).collect();
        assert_eq!(names, ["MIDDLE M", "ALPHA A"]);
        assert!(top_crs_for_rpy(&d, 1800, 3).unwrap().is_empty());
        assert_eq!(top_crs_for_rpy(&d, 1990, 10).unwrap().len(), 3);
        assert_eq!(top_crs_for_rpy(&d, 1990, 0), Err(AnalysisError::ZeroK));
    }

    #[test]
    fn authorless_references_sort_last() {
        let d = ds(&[(Some(1990), 1, ""), (Some(1990), 1, "ZZ Z")]);
        let top = top_crs_for_rpy(&d, 1990, 2).unwrap();
        assert_eq!(top[0].authors, vec!["ZZ Z"]);
    }

    #[test]
    fn remove_range() {
        let d = ds(&[(Some(1940), 1, "A"), (Some(1960), 2, "B"), (None, 1, "C")]);
        let kept = remove_by_rpy(&d, YearRange::new(1900, 1950).unwrap(), true);
        assert_eq!(kept.crs.len(), 2);
        assert!(kept.crs.values().all(|c| c.rpy != Some(1940)));
        assert_eq!(kept.publications.len(), d.publications.len());
        kept.validate().unwrap();

        let same = remove_by_rpy(&d, YearRange::new(1800, 1850).unwrap(), true);
        assert_eq!(same, d);

        let no_missing = remove_by_rpy(&d, YearRange::new(1800, 1850).unwrap(), false);
        assert!(!no_missing.crs.contains_key(&CrId(2)));
        no_missing.validate().unwrap();
    }

    #[test]
    fn empty_range_rejected() {
        assert!(YearRange::new(1950, 1900).is_err());
    }
}
