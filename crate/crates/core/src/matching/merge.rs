use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::model::{CitedReference, CrId, Dataset, Origin};

use super::ClusterState;

/// Ranking for representative choice: more present fields first, then
/// larger `n_cr`, then smaller id.
pub fn representative_order(a: &CitedReference, b: &CitedReference) -> Ordering {
    b.present_field_count()
        .cmp(&a.present_field_count())
        .then(b.n_cr.cmp(&a.n_cr))
        .then(a.id.cmp(&b.id))
}

fn fill<T: Clone>(slot: &mut Option<T>, from: &Option<T>) {
    if slot.is_none() {
        slot.clone_from(from);
    }
}

/// Collapses every multi-member cluster into its representative.
///
/// The representative keeps its own values and takes each missing field from
/// the best-ranked member that has it; its count is the cluster total.
/// Publications are rewritten to point at representatives, so reference
/// slots per publication are unchanged.
pub fn merge_clusters(ds: &Dataset, st: &ClusterState) -> Dataset {
    let mut groups: BTreeMap<CrId, Vec<&CitedReference>> = BTreeMap::new();
    for cr in ds.crs.values() {
        let root = st.cluster_of(cr.id).unwrap_or(cr.id);
        groups.entry(root).or_default().push(cr);
    }

    let mut out = ds.clone();
    let mut redirect: BTreeMap<CrId, CrId> = BTreeMap::new();
    for mut members in groups.into_values().filter(|m| m.len() > 1) {
        members.sort_by(|a, b| representative_order(a, b));
        let mut rep = members[0].clone();
        for m in &members[1..] {
            if rep.authors.is_empty() && !m.authors.is_empty() {
                rep.authors = match rep.origin {
                    Origin::Wos => m.authors.iter().take(1).cloned().collect(),
                    Origin::Scopus => m.authors.clone(),
                };
            }
            fill(&mut rep.title, &m.title);
            fill(&mut rep.source, &m.source);
            fill(&mut rep.rpy, &m.rpy);
            fill(&mut rep.volume, &m.volume);
            fill(&mut rep.page, &m.page);
            fill(&mut rep.doi, &m.doi);
            rep.n_cr += m.n_cr;
            redirect.insert(m.id, rep.id);
            out.crs.remove(&m.id);
        }
        out.crs.insert(rep.id, rep);
    }
    if redirect.is_empty() {
        return out;
    }

    for p in &mut out.publications {
        for id in &mut p.cr_ids {
            if let Some(rep) = redirect.get(id) {
                *id = *rep;
            }
        }
    }
    for target in out.merged_into.values_mut() {
        if let Some(rep) = redirect.get(target) {
            *target = *rep;
        }
    }
    out.merged_into.extend(redirect);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{cluster_equivalent, SimilarityConfig};
    use crate::model::{DatasetBuilder, DecisionSet, MatchDecision, Verdict};

    fn cr(raw: &str) -> CitedReference {
        CitedReference::raw_only(raw, Origin::Scopus)
    }

    fn build(pubs: Vec<Vec<CitedReference>>) -> Dataset {
        let mut b = DatasetBuilder::new(Origin::Scopus);
        for refs in pubs {
            b.push_publication(Origin::Scopus, vec![], None, refs);
        }
        b.finish()
    }

    fn forced(ds: &Dataset, pairs: &[(u32, u32)]) -> ClusterState {
        let d: DecisionSet = pairs
            .iter()
            .map(|(a, b)| MatchDecision::manual(CrId(*a), CrId(*b), Verdict::Same).unwrap())
            .collect();
        cluster_equivalent(ds, &SimilarityConfig::default(), &d).unwrap()
    }

    #[test]
    fn counts_sum_into_representative() {
        let (x, y) = (cr("x"), cr("y"));
        let ds = build(vec![
            vec![x.clone(), y.clone()],
            vec![x.clone(), y.clone()],
            vec![x.clone()],
        ]);
        assert_eq!(ds.crs[&CrId(0)].n_cr, 3);
        assert_eq!(ds.crs[&CrId(1)].n_cr, 2);
        let merged = merge_clusters(&ds, &forced(&ds, &[(0, 1)]));
        assert_eq!(merged.crs.len(), 1);
        assert_eq!(merged.crs[&CrId(0)].n_cr, 5);
        assert_eq!(merged.merged_into, BTreeMap::from([(CrId(1), CrId(0))]));
        for (before, after) in ds.publications.iter().zip(&merged.publications) {
            assert_eq!(before.cr_ids.len(), after.cr_ids.len());
        }
        merged.validate().unwrap();
    }

    #[test]
    fn singletons_merge_to_identity() {
        let ds = build(vec![vec![cr("x"), cr("y")]]);
        let st = ClusterState::singletons(&ds, 0.75, &DecisionSet::new());
        assert_eq!(merge_clusters(&ds, &st), ds);
    }

    #[test]
    fn representative_takes_missing_fields() {
        let mut x = cr("x");
        x.title = Some("T".into());
        x.rpy = Some(1990);
        let mut y = cr("y");
        y.source = Some("S".into());
        let ds = build(vec![vec![x, y.clone(), y]]);
        // x: 2 fields, y: 1 field -> x represents
        let merged = merge_clusters(&ds, &forced(&ds, &[(0, 1)]));
        let rep = &merged.crs[&CrId(0)];
        assert_eq!(rep.title.as_deref(), Some("T"));
        assert_eq!(rep.source.as_deref(), Some("S"));
        assert_eq!(rep.n_cr, 3);
    }

    #[test]
    fn conflicting_values_keep_representative() {
        let mut x = cr("x");
        x.source = Some("A".into());
        x.rpy = Some(1990);
        let mut y = cr("y");
        y.source = Some("B".into());
        let ds = build(vec![vec![x, y]]);
        let merged = merge_clusters(&ds, &forced(&ds, &[(0, 1)]));
        assert_eq!(merged.crs[&CrId(0)].source.as_deref(), Some("A"));
    }

    #[test]
    fn wos_representative_takes_single_author() {
        let mut x = CitedReference::raw_only("x", Origin::Wos);
        x.rpy = Some(1990);
        x.source = Some("S".into());
        let mut y = cr("y");
        y.authors = vec!["A, B.".into(), "C, D.".into()];
        let mut b = DatasetBuilder::new(Origin::Wos);
        b.push_publication(Origin::Wos, vec![], None, vec![x]);
        b.push_publication(Origin::Scopus, vec![], None, vec![y]);
        let ds = b.finish();
        let merged = merge_clusters(&ds, &forced(&ds, &[(0, 1)]));
        assert_eq!(merged.crs[&CrId(0)].authors, vec!["A, B."]);
        merged.validate().unwrap();
    }

    #[test]
    fn merge_history_follows_representatives() {
        let ds = build(vec![vec![cr("a"), cr("b"), cr("c")]]);
        let once = merge_clusters(&ds, &forced(&ds, &[(1, 2)]));
        assert_eq!(once.merged_into, BTreeMap::from([(CrId(2), CrId(1))]));
        // 1 now has n_cr = 2 and outranks 0
        let twice = merge_clusters(&once, &forced(&once, &[(0, 1)]));
        assert_eq!(
            twice.merged_into,
            BTreeMap::from([(CrId(0), CrId(1)), (CrId(2), CrId(1))])
        );
        twice.validate().unwrap();
    }
}
