use crate::model::{CrId, CrPair, Dataset};

use super::SimilarityConfig;

/// Candidate pairs for scoring, sorted and without duplicates.
///
/// With `same_rpy_only`, two references pair when their years differ by at
/// most `rpy_slack`; references without a year pair only with each other.
/// Otherwise every pair is a candidate.
pub fn block_candidates(ds: &Dataset, cfg: &SimilarityConfig) -> Vec<CrPair> {
    let mut pairs = Vec::new();
    if !cfg.same_rpy_only {
        let ids: Vec<CrId> = ds.crs.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                pairs.extend(CrPair::new(a, b).ok());
            }
        }
        return pairs;
    }

    let mut dated: Vec<(i64, CrId)> = Vec::new();
    let mut undated: Vec<CrId> = Vec::new();
    for cr in ds.crs.values() {
        match cr.rpy {
            Some(y) => dated.push((i64::from(y), cr.id)),
            None => undated.push(cr.id),
        }
    }
    dated.sort_unstable();
    let slack = i64::from(cfg.rpy_slack);
    for (i, &(ya, a)) in dated.iter().enumerate() {
        for &(yb, b) in &dated[i + 1..] {
            if yb - ya > slack {
                break;
            }
            pairs.extend(CrPair::new(a, b).ok());
        }
    }
    for (i, &a) in undated.iter().enumerate() {
        for &b in &undated[i + 1..] {
            pairs.extend(CrPair::new(a, b).ok());
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CitedReference, DatasetBuilder, Origin};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(years: &[Option<i32>]) -> Dataset {
        let mut b = DatasetBuilder::new(Origin::Wos);
        let refs = years
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let mut cr = CitedReference::raw_only(format!("ref {i}"), Origin::Wos);
                cr.rpy = *y;
                cr
            })
            .collect();
        b.push_publication(Origin::Wos, vec![], None, refs);
        b.finish()
    }

    #[test]
    fn single_year_block_is_complete() {
        let ds = dataset(&[Some(1990); 3]);
        assert_eq!(block_candidates(&ds, &SimilarityConfig::default()).len(), 3);
    }

    #[test]
    fn adjacent_years_do_not_pair_without_slack() {
        let ds = dataset(&[Some(1990), Some(1991)]);
        assert!(block_candidates(&ds, &SimilarityConfig::default()).is_empty());
        let cfg = SimilarityConfig {
            rpy_slack: 1,
            ..Default::default()
        };
        assert_eq!(block_candidates(&ds, &cfg).len(), 1);
    }

    #[test]
    fn undated_pair_only_among_themselves() {
        let ds = dataset(&[None, None, Some(1990)]);
        let pairs = block_candidates(&ds, &SimilarityConfig::default());
        assert_eq!(pairs, vec![CrPair::new(CrId(0), CrId(1)).unwrap()]);
    }

    #[test]
    fn matches_exhaustive_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for slack in 0..3u32 {
            let years: Vec<Option<i32>> = (0..50)
                .map(|_| rng.gen_bool(0.85).then(|| rng.gen_range(1980..1990)))
                .collect();
            let ds = dataset(&years);
            let cfg = SimilarityConfig {
                rpy_slack: slack,
                ..Default::default()
            };
            let mut expected = Vec::new();
            for i in 0..50u32 {
                for j in (i + 1)..50u32 {
                    let keep = match (years[i as usize], years[j as usize]) {
                        (Some(a), Some(b)) => (a - b).unsigned_abs() <= slack,
                        (None, None) => true,
                        _ => false,
                    };
                    if keep {
                        expected.push(CrPair::new(CrId(i), CrId(j)).unwrap());
                    }
                }
            }
            assert_eq!(block_candidates(&ds, &cfg), expected);
        }
    }
}
