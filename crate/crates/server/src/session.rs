//! The single working session behind the HTTP API. Every mutation computes
//! the next state from the current one and swaps it in only on success.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crex_core::analysis::{remove_by_rpy, YearRange};
use crex_core::cre::{load_cre_file, save_cre_file, CreError, WorkingState};
use crex_core::matching::{
    apply_manual_decision, cluster_equivalent, merge_clusters, ClusterState, MatchError,
    SimilarityConfig,
};
use crex_core::model::{CrId, MatchDecision, ModelError, Verdict};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown cited reference {0}")]
    NotFound(CrId),
    #[error("cited reference {id} was merged into {into}")]
    MergedAway { id: CrId, into: CrId },
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Store(#[from] CreError),
}

impl From<MatchError> for SessionError {
    fn from(e: MatchError) -> Self {
        match e {
            MatchError::UnknownCrId(id) => SessionError::NotFound(id),
            MatchError::ConflictingDecisions(_) => SessionError::Conflict(e.to_string()),
            MatchError::NotManual | MatchError::InvalidConfig(_) => {
                SessionError::BadRequest(e.to_string())
            }
        }
    }
}

impl From<ModelError> for SessionError {
    fn from(e: ModelError) -> Self {
        SessionError::BadRequest(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MergeSummary {
    pub crs_before: usize,
    pub crs_after: usize,
    pub merged: usize,
    pub total_n_cr: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RemoveSummary {
    pub removed_crs: usize,
    pub removed_slots: u64,
    pub crs_after: usize,
}

#[derive(Debug)]
pub struct ApiSession {
    state: WorkingState,
    dirty: bool,
    state_path: PathBuf,
}

impl ApiSession {
    pub fn new(state: WorkingState, state_path: impl Into<PathBuf>) -> Self {
        ApiSession {
            state,
            dirty: false,
            state_path: state_path.into(),
        }
    }

    pub fn open(state_path: impl Into<PathBuf>) -> Result<Self, CreError> {
        let state_path = state_path.into();
        let state = load_cre_file(&state_path)?;
        Ok(ApiSession::new(state, state_path))
    }

    pub fn state(&self) -> &WorkingState {
        &self.state
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn state_path(&self) -> &Path {
        &self.state_path
    }

    fn commit(&mut self, next: WorkingState) {
        if next != self.state {
            self.state = next;
            self.dirty = true;
        }
    }

    /// Ok when `id` names a reference of the current dataset.
    pub fn check_live(&self, id: CrId) -> Result<(), SessionError> {
        let ds = &self.state.dataset;
        if ds.crs.contains_key(&id) {
            return Ok(());
        }
        match ds.merged_into.get(&id) {
            Some(&into) => Err(SessionError::MergedAway { id, into }),
            None => Err(SessionError::NotFound(id)),
        }
    }

    /// Members of the clusters containing any of `ids`.
    fn cluster_members(st: &ClusterState, ids: &[CrId]) -> BTreeSet<CrId> {
        let roots: BTreeSet<CrId> = ids.iter().filter_map(|id| st.cluster_of(*id)).collect();
        st.assignment()
            .iter()
            .filter(|(_, root)| roots.contains(root))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Records a manual decision and re-partitions. Returns the clusters that
    /// hold any reference whose cluster changed or that the decision names.
    pub fn record_decision(
        &mut self,
        a: CrId,
        b: CrId,
        verdict: Verdict,
    ) -> Result<Vec<Vec<CrId>>, SessionError> {
        if a == b {
            return Err(ModelError::SelfPair(a).into());
        }
        self.check_live(a)?;
        self.check_live(b)?;
        let decision = MatchDecision::manual(a, b, verdict)?;
        let before = &self.state.cluster_state;
        let after = apply_manual_decision(&self.state.dataset, before, decision)?;

        let mut touched: Vec<CrId> = Self::cluster_members(before, &[a, b]).into_iter().collect();
        touched.extend(Self::cluster_members(&after, &[a, b]));
        let affected = Self::cluster_members(&after, &touched);
        let clusters = after
            .clusters()
            .into_iter()
            .filter(|c| c.iter().any(|id| affected.contains(id)))
            .collect();

        let next = WorkingState {
            cluster_state: after,
            ..self.state.clone()
        };
        self.commit(next);
        Ok(clusters)
    }

    /// Rescores and re-partitions with `config`, keeping manual decisions.
    pub fn recluster(&mut self, config: SimilarityConfig) -> Result<usize, SessionError> {
        let st = cluster_equivalent(
            &self.state.dataset,
            &config,
            self.state.cluster_state.decisions(),
        )?;
        let clusters = st.clusters().iter().filter(|c| c.len() > 1).count();
        let next = WorkingState {
            cluster_state: st,
            config,
            ..self.state.clone()
        };
        self.commit(next);
        Ok(clusters)
    }

    /// Merges every multi-member cluster. Manual decisions follow their
    /// references onto representatives.
    pub fn merge(&mut self) -> MergeSummary {
        let ds = &self.state.dataset;
        let st = &self.state.cluster_state;
        let merged = merge_clusters(ds, st);
        let decisions = st.decisions().remapped(&merged.merged_into);
        let cluster_state = ClusterState::singletons(&merged, st.threshold(), &decisions);
        let summary = MergeSummary {
            crs_before: ds.crs.len(),
            crs_after: merged.crs.len(),
            merged: ds.crs.len() - merged.crs.len(),
            total_n_cr: merged.total_n_cr(),
        };
        let next = WorkingState {
            dataset: merged,
            cluster_state,
            ..self.state.clone()
        };
        self.commit(next);
        summary
    }

    pub fn remove_years(
        &mut self,
        range: YearRange,
        keep_missing: bool,
    ) -> Result<RemoveSummary, SessionError> {
        let ds = &self.state.dataset;
        let kept = remove_by_rpy(ds, range, keep_missing);
        let cluster_state = self.state.cluster_state.recluster(&kept)?;
        let summary = RemoveSummary {
            removed_crs: ds.crs.len() - kept.crs.len(),
            removed_slots: ds.total_n_cr() - kept.total_n_cr(),
            crs_after: kept.crs.len(),
        };
        let next = WorkingState {
            dataset: kept,
            cluster_state,
            ..self.state.clone()
        };
        self.commit(next);
        Ok(summary)
    }

    pub fn save(&mut self) -> Result<(), SessionError> {
        save_cre_file(&self.state, &self.state_path)?;
        self.dirty = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crex_core::model::DecisionSet;
    use crex_core::wos::{parse_wos, WosInput};

    const FILE: &str = "FN x\nVR 1.0\nPT J\nCR GARFIELD E, 1955, SCIENCE, V122, P108\n   GARFELD E, 1955, SCIENCE, V122, P108\n   PRICE DJD, 1965, SCIENCE, V149, P510\nER\nPT J\nCR GARFIELD E, 1955, SCIENCE, V122, P108\nER\nEF\n";

    fn session() -> ApiSession {
        let ds = parse_wos(&[WosInput::new("a.txt", FILE)]).unwrap();
        let cfg = SimilarityConfig::default();
        let st = cluster_equivalent(&ds, &cfg, &DecisionSet::new()).unwrap();
        let state = WorkingState {
            cluster_state: st,
            ..WorkingState::new(ds, cfg)
        };
        ApiSession::new(state, "unused.cre")
    }

    #[test]
    fn decision_returns_split_clusters() {
        let mut s = session();
        let affected = s
            .record_decision(CrId(0), CrId(1), Verdict::Different)
            .unwrap();
        assert_eq!(affected, vec![vec![CrId(0)], vec![CrId(1)]]);
        assert!(s.is_dirty());
    }

    #[test]
    fn failed_mutation_leaves_state_alone() {
        let mut s = session();
        s.record_decision(CrId(0), CrId(2), Verdict::Same).unwrap();
        s.record_decision(CrId(1), CrId(2), Verdict::Same).unwrap();
        let before = s.state().clone();
        let err = s.record_decision(CrId(0), CrId(1), Verdict::Different);
        assert!(matches!(err, Err(SessionError::Conflict(_))));
        assert_eq!(s.state(), &before);
    }

    #[test]
    fn merged_away_ids_are_reported() {
        let mut s = session();
        let summary = s.merge();
        assert_eq!(summary.merged, 1);
        assert_eq!(summary.total_n_cr, 4);
        assert!(matches!(
            s.check_live(CrId(1)),
            Err(SessionError::MergedAway { into: CrId(0), .. })
        ));
        assert!(matches!(
            s.check_live(CrId(9)),
            Err(SessionError::NotFound(_))
        ));
    }

    #[test]
    fn unchanged_state_stays_clean() {
        let mut s = session();
        s.remove_years(YearRange::new(1800, 1810).unwrap(), true)
            .unwrap();
        assert!(!s.is_dirty());
    }
}
