use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{CrId, CrPair, Dataset, DecisionSet, MatchDecision, Provenance, Verdict};

use super::similarity::ScoringKey;
use super::{block_candidates, MatchError, SimilarityConfig};

/// Similarity score per scored pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<ScoredPair>", into = "Vec<ScoredPair>")]
pub struct PairScores(BTreeMap<CrPair, f64>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ScoredPair {
    a: CrId,
    b: CrId,
    score: f64,
}

impl From<Vec<ScoredPair>> for PairScores {
    fn from(v: Vec<ScoredPair>) -> Self {
        PairScores(
            v.into_iter()
                .filter_map(|p| CrPair::new(p.a, p.b).ok().map(|k| (k, p.score)))
                .collect(),
        )
    }
}

impl From<PairScores> for Vec<ScoredPair> {
    fn from(s: PairScores) -> Self {
        s.0.into_iter()
            .map(|(k, score)| ScoredPair {
                a: k.lo(),
                b: k.hi(),
                score,
            })
            .collect()
    }
}

impl PairScores {
    pub fn get(&self, a: CrId, b: CrId) -> Option<f64> {
        CrPair::new(a, b).ok().and_then(|p| self.0.get(&p).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (CrPair, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(CrPair, f64)> for PairScores {
    fn from_iter<T: IntoIterator<Item = (CrPair, f64)>>(iter: T) -> Self {
        PairScores(iter.into_iter().collect())
    }
}

/// Scores every blocked pair. Scoring runs in parallel; the result does not
/// depend on scheduling.
pub fn score_pairs(ds: &Dataset, cfg: &SimilarityConfig) -> PairScores {
    let keys: HashMap<CrId, ScoringKey> = ds
        .crs
        .values()
        .map(|cr| (cr.id, ScoringKey::new(cr)))
        .collect();
    let pairs = block_candidates(ds, cfg);
    let scored: Vec<(CrPair, f64)> = pairs
        .par_iter()
        .map(|p| (*p, keys[&p.lo()].score(&keys[&p.hi()], cfg)))
        .collect();
    scored.into_iter().collect()
}

/// Partition of cited references into clusters of variants, with the pair
/// scores and manual decisions it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    threshold: f64,
    /// Member id -> smallest id of its cluster.
    assignment: BTreeMap<CrId, CrId>,
    pair_scores: PairScores,
    decisions: DecisionSet,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Links two roots; the smaller index becomes the root.
    fn link(&mut self, ra: usize, rb: usize) -> usize {
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        keep
    }
}

/// Builds the partition.
///
/// Manual same-links are joined first. Algorithmic edges (score at or above
/// the threshold, on pairs without a manual decision) are then added from
/// the highest score down, ties by smaller pair first; an edge is skipped
/// when it would join two references marked different. This drops, for
/// every cannot-link, the weakest edges that would connect it.
fn resolve(
    ids: &BTreeSet<CrId>,
    scores: &PairScores,
    threshold: f64,
    decisions: &DecisionSet,
) -> Result<BTreeMap<CrId, CrId>, MatchError> {
    let order: Vec<CrId> = ids.iter().copied().collect();
    let index: HashMap<CrId, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let idx = |id: CrId| index.get(&id).copied().ok_or(MatchError::UnknownCrId(id));
    let mut uf = UnionFind::new(order.len());

    for d in decisions.iter().filter(|d| d.verdict == Verdict::Same) {
        let (ra, rb) = (uf.find(idx(d.a)?), uf.find(idx(d.b)?));
        if ra != rb {
            uf.link(ra, rb);
        }
    }

    // root -> members it must never join
    let mut cannot: HashMap<usize, Vec<usize>> = HashMap::new();
    for d in decisions.iter().filter(|d| d.verdict == Verdict::Different) {
        let (a, b) = (idx(d.a)?, idx(d.b)?);
        if uf.find(a) == uf.find(b) {
            return Err(MatchError::ConflictingDecisions(d.pair()));
        }
        cannot.entry(a).or_default().push(b);
        cannot.entry(b).or_default().push(a);
    }
    // rekey onto current roots
    let mut blocked: HashMap<usize, Vec<usize>> = HashMap::new();
    for (member, others) in cannot {
        let root = uf.find(member);
        blocked.entry(root).or_default().extend(others);
    }

    let mut edges: Vec<(CrPair, f64)> = scores
        .iter()
        .filter(|(p, s)| *s >= threshold && decisions.get(p.lo(), p.hi()).is_none())
        .collect();
    edges.sort_by(|(pa, sa), (pb, sb)| sb.total_cmp(sa).then(pa.cmp(pb)));

    for (pair, _) in edges {
        let (Some(&a), Some(&b)) = (index.get(&pair.lo()), index.get(&pair.hi())) else {
            continue;
        };
        let (ra, rb) = (uf.find(a), uf.find(b));
        if ra == rb {
            continue;
        }
        let forbidden = blocked
            .get(&ra)
            .is_some_and(|others| others.iter().any(|&o| uf.find(o) == rb));
        if forbidden {
            continue;
        }
        let root = uf.link(ra, rb);
        let gone = if root == ra { rb } else { ra };
        if let Some(moved) = blocked.remove(&gone) {
            blocked.entry(root).or_default().extend(moved);
        }
    }

    Ok(order
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, order[uf.find(i)]))
        .collect())
}

impl ClusterState {
    /// Every reference in its own cluster, carrying over `decisions` that
    /// still resolve.
    pub fn singletons(ds: &Dataset, threshold: f64, decisions: &DecisionSet) -> Self {
        let mut decisions = decisions.clone();
        decisions.retain(|d| ds.crs.contains_key(&d.a) && ds.crs.contains_key(&d.b));
        let ids: BTreeSet<CrId> = ds.crs.keys().copied().collect();
        let assignment = resolve(&ids, &PairScores::default(), threshold, &decisions)
            .unwrap_or_else(|_| ids.iter().map(|id| (*id, *id)).collect());
        ClusterState {
            threshold,
            assignment,
            pair_scores: PairScores::default(),
            decisions,
        }
    }

    /// Rebuilds from stored parts, checking that the assignment is the
    /// partition those parts produce.
    pub fn from_parts(
        threshold: f64,
        assignment: BTreeMap<CrId, CrId>,
        pair_scores: PairScores,
        decisions: DecisionSet,
    ) -> Result<Self, MatchError> {
        let ids: BTreeSet<CrId> = assignment.keys().copied().collect();
        if let Some((_, root)) = assignment.iter().find(|(_, r)| !ids.contains(r)) {
            return Err(MatchError::UnknownCrId(*root));
        }
        for (pair, _) in pair_scores.iter() {
            for id in [pair.lo(), pair.hi()] {
                if !ids.contains(&id) {
                    return Err(MatchError::UnknownCrId(id));
                }
            }
        }
        if let Some(id) = decisions.ids().find(|id| !ids.contains(id)) {
            return Err(MatchError::UnknownCrId(id));
        }
        Ok(ClusterState {
            threshold,
            assignment,
            pair_scores,
            decisions,
        })
    }

    /// Same scores and decisions, restricted to the references still in `ds`,
    /// re-partitioned.
    pub fn recluster(&self, ds: &Dataset) -> Result<ClusterState, MatchError> {
        let ids: BTreeSet<CrId> = ds.crs.keys().copied().collect();
        let pair_scores: PairScores = self
            .pair_scores
            .iter()
            .filter(|(p, _)| ids.contains(&p.lo()) && ids.contains(&p.hi()))
            .collect();
        let mut decisions = self.decisions.clone();
        decisions.retain(|d| ids.contains(&d.a) && ids.contains(&d.b));
        let assignment = resolve(&ids, &pair_scores, self.threshold, &decisions)?;
        Ok(ClusterState {
            threshold: self.threshold,
            assignment,
            pair_scores,
            decisions,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn pair_scores(&self) -> &PairScores {
        &self.pair_scores
    }

    pub fn decisions(&self) -> &DecisionSet {
        &self.decisions
    }

    pub fn assignment(&self) -> &BTreeMap<CrId, CrId> {
        &self.assignment
    }

    /// Cluster label (smallest member id) of a reference.
    pub fn cluster_of(&self, id: CrId) -> Option<CrId> {
        self.assignment.get(&id).copied()
    }

    /// Clusters as sorted member lists, ordered by their smallest member.
    pub fn clusters(&self) -> Vec<Vec<CrId>> {
        let mut groups: BTreeMap<CrId, Vec<CrId>> = BTreeMap::new();
        for (id, root) in &self.assignment {
            groups.entry(*root).or_default().push(*id);
        }
        groups.into_values().collect()
    }

    /// The effective decision on a pair: the manual one if recorded, else the
    /// algorithmic verdict implied by the stored score.
    pub fn decision(&self, a: CrId, b: CrId) -> Option<MatchDecision> {
        if let Some(d) = self.decisions.get(a, b) {
            return Some(*d);
        }
        let score = self.pair_scores.get(a, b)?;
        let verdict = if score >= self.threshold {
            Verdict::Same
        } else {
            Verdict::Different
        };
        MatchDecision::new(a, b, verdict, Provenance::Algorithm, Some(score)).ok()
    }
}

fn check_ids(ds: &Dataset, decisions: &DecisionSet) -> Result<(), MatchError> {
    match decisions.ids().find(|id| !ds.crs.contains_key(id)) {
        Some(id) => Err(MatchError::UnknownCrId(id)),
        None => Ok(()),
    }
}

/// Scores blocked pairs and partitions the references into clusters of
/// variants, honouring manual decisions.
pub fn cluster_equivalent(
    ds: &Dataset,
    cfg: &SimilarityConfig,
    manual: &DecisionSet,
) -> Result<ClusterState, MatchError> {
    cfg.validate()?;
    check_ids(ds, manual)?;
    let pair_scores = score_pairs(ds, cfg);
    let decisions: DecisionSet = manual
        .iter()
        .map(|d| MatchDecision {
            provenance: Provenance::Manual,
            score: pair_scores.get(d.a, d.b).or(d.score),
            ..*d
        })
        .collect();
    let ids: BTreeSet<CrId> = ds.crs.keys().copied().collect();
    let assignment = resolve(&ids, &pair_scores, cfg.threshold, &decisions)?;
    Ok(ClusterState {
        threshold: cfg.threshold,
        assignment,
        pair_scores,
        decisions,
    })
}

/// Records a manual decision (replacing any earlier one on the pair) and
/// re-partitions using the stored scores.
pub fn apply_manual_decision(
    ds: &Dataset,
    st: &ClusterState,
    decision: MatchDecision,
) -> Result<ClusterState, MatchError> {
    if decision.provenance != Provenance::Manual {
        return Err(MatchError::NotManual);
    }
    for id in [decision.a, decision.b] {
        if !ds.crs.contains_key(&id) || !st.assignment.contains_key(&id) {
            return Err(MatchError::UnknownCrId(id));
        }
    }
    let mut decisions = st.decisions.clone();
    decisions.insert(MatchDecision {
        score: st
            .pair_scores
            .get(decision.a, decision.b)
            .or(decision.score),
        ..decision
    });
    let ids: BTreeSet<CrId> = st.assignment.keys().copied().collect();
    let assignment = resolve(&ids, &st.pair_scores, st.threshold, &decisions)?;
    Ok(ClusterState {
        threshold: st.threshold,
        assignment,
        pair_scores: st.pair_scores.clone(),
        decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CitedReference, DatasetBuilder, Origin};

    fn ids(n: u32) -> BTreeSet<CrId> {
        (0..n).map(CrId).collect()
    }

    fn pair(a: u32, b: u32) -> CrPair {
        CrPair::new(CrId(a), CrId(b)).unwrap()
    }

    fn manual(a: u32, b: u32, v: Verdict) -> MatchDecision {
        MatchDecision::manual(CrId(a), CrId(b), v).unwrap()
    }

    fn chain_scores() -> PairScores {
        [(pair(0, 1), 0.9), (pair(1, 2), 0.9), (pair(0, 2), 0.1)]
            .into_iter()
            .collect()
    }

    fn groups(assignment: &BTreeMap<CrId, CrId>) -> Vec<Vec<u32>> {
        let mut g: BTreeMap<CrId, Vec<u32>> = BTreeMap::new();
        for (id, root) in assignment {
            g.entry(*root).or_default().push(id.0);
        }
        g.into_values().collect()
    }

    #[test]
    fn transitive_chain_forms_one_cluster() {
        let a = resolve(&ids(3), &chain_scores(), 0.75, &DecisionSet::new()).unwrap();
        assert_eq!(groups(&a), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn cannot_link_splits_on_larger_pair_at_tie() {
        let d: DecisionSet = vec![manual(0, 2, Verdict::Different)].into();
        let a = resolve(&ids(3), &chain_scores(), 0.75, &d).unwrap();
        // Both admissible splits: {0,1},{2} and {0},{1,2}. Equal scores: the
        // larger pair (1,2) is the one dropped.
        assert_eq!(groups(&a), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn cannot_link_drops_weakest_edge() {
        let scores: PairScores = [(pair(0, 1), 0.8), (pair(1, 2), 0.95)]
            .into_iter()
            .collect();
        let d: DecisionSet = vec![manual(0, 2, Verdict::Different)].into();
        let a = resolve(&ids(3), &scores, 0.75, &d).unwrap();
        assert_eq!(groups(&a), vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn nothing_above_threshold_gives_singletons() {
        let scores: PairScores = [(pair(0, 1), 0.5)].into_iter().collect();
        let a = resolve(&ids(3), &scores, 0.75, &DecisionSet::new()).unwrap();
        assert_eq!(groups(&a), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn conflicting_manual_links_are_rejected() {
        let d: DecisionSet = vec![
            manual(0, 1, Verdict::Same),
            manual(1, 2, Verdict::Same),
            manual(0, 2, Verdict::Different),
        ]
        .into();
        assert_eq!(
            resolve(&ids(3), &PairScores::default(), 0.75, &d),
            Err(MatchError::ConflictingDecisions(pair(0, 2)))
        );
    }

    fn dataset() -> Dataset {
        let mut b = DatasetBuilder::new(Origin::Wos);
        let refs = [
            "GARFIELD E, 1955, SCIENCE, V122, P108",
            "GARFIELD E, 1955, SCIENCE, V122, P108-111",
            "GARFELD E, 1955, SCIENCE, V122, P108",
            "PRICE DJD, 1955, NATURE, V7, P5",
        ]
        .iter()
        .map(|s| crate::wos::parse_wos_cr(s))
        .collect();
        b.push_publication(Origin::Wos, vec![], None, refs);
        b.finish()
    }

    #[test]
    fn clusters_variants() {
        let ds = dataset();
        let st =
            cluster_equivalent(&ds, &SimilarityConfig::default(), &DecisionSet::new()).unwrap();
        assert_eq!(
            st.clusters(),
            vec![vec![CrId(0), CrId(1), CrId(2)], vec![CrId(3)]]
        );
        let d = st.decision(CrId(2), CrId(0)).unwrap();
        assert_eq!(d.provenance, Provenance::Algorithm);
        assert_eq!(d.verdict, Verdict::Same);
    }

    #[test]
    fn manual_same_joins_low_scoring_pair() {
        let ds = dataset();
        let st =
            cluster_equivalent(&ds, &SimilarityConfig::default(), &DecisionSet::new()).unwrap();
        let st = apply_manual_decision(&ds, &st, manual(0, 3, Verdict::Same)).unwrap();
        assert_eq!(st.cluster_of(CrId(3)), Some(CrId(0)));
        assert_eq!(
            st.decision(CrId(3), CrId(0)).unwrap().provenance,
            Provenance::Manual
        );
    }

    #[test]
    fn later_decision_replaces_earlier() {
        let ds = dataset();
        let cfg = SimilarityConfig::default();
        let st = cluster_equivalent(&ds, &cfg, &DecisionSet::new()).unwrap();
        let both = apply_manual_decision(&ds, &st, manual(0, 3, Verdict::Different)).unwrap();
        let both = apply_manual_decision(&ds, &both, manual(0, 3, Verdict::Same)).unwrap();
        let only = apply_manual_decision(&ds, &st, manual(0, 3, Verdict::Same)).unwrap();
        assert_eq!(both, only);
        let recomputed =
            cluster_equivalent(&ds, &cfg, &vec![manual(0, 3, Verdict::Same)].into()).unwrap();
        assert_eq!(both, recomputed);
    }

    #[test]
    fn same_on_joined_pair_keeps_partition() {
        let ds = dataset();
        let st =
            cluster_equivalent(&ds, &SimilarityConfig::default(), &DecisionSet::new()).unwrap();
        let after = apply_manual_decision(&ds, &st, manual(0, 1, Verdict::Same)).unwrap();
        assert_eq!(after.clusters(), st.clusters());
        assert_eq!(after.decisions().len(), 1);
    }

    #[test]
    fn unknown_ids_rejected() {
        let ds = dataset();
        let d: DecisionSet = vec![manual(0, 99, Verdict::Same)].into();
        assert_eq!(
            cluster_equivalent(&ds, &SimilarityConfig::default(), &d),
            Err(MatchError::UnknownCrId(CrId(99)))
        );
    }

    #[test]
    fn raising_threshold_never_adds_edges() {
        let ds = dataset();
        let scores = score_pairs(&ds, &SimilarityConfig::default());
        let mut last = usize::MAX;
        for t in [0.0, 0.5, 0.75, 0.9, 0.95, 1.0] {
            let n = scores.iter().filter(|(_, s)| *s >= t).count();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn recluster_after_removal_splits_broken_chain() {
        let mut b = DatasetBuilder::new(Origin::Wos);
        let refs = ["a", "b", "c"]
            .iter()
            .map(|s| CitedReference::raw_only(*s, Origin::Wos))
            .collect();
        b.push_publication(Origin::Wos, vec![], None, refs);
        let ds = b.finish();
        let ids3: BTreeSet<CrId> = ds.crs.keys().copied().collect();
        let assignment = resolve(&ids3, &chain_scores(), 0.75, &DecisionSet::new()).unwrap();
        let st =
            ClusterState::from_parts(0.75, assignment, chain_scores(), DecisionSet::new()).unwrap();
        let mut smaller = ds.clone();
        smaller.crs.remove(&CrId(1));
        smaller.publications[0].cr_ids.retain(|id| *id != CrId(1));
        let st = st.recluster(&smaller).unwrap();
        assert_eq!(st.clusters(), vec![vec![CrId(0)], vec![CrId(2)]]);
    }
}
