//! Variant detection for cited references: pairwise similarity, blocking,
//! clustering under manual must-link / cannot-link decisions, and merging.

mod blocking;
mod cluster;
mod merge;
mod similarity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CrId, CrPair};

pub use blocking::block_candidates;
pub use cluster::{
    apply_manual_decision, cluster_equivalent, score_pairs, ClusterState, PairScores,
};
pub use merge::{merge_clusters, representative_order};
pub use similarity::{levenshtein, normalized_similarity, pair_similarity, ScoringKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("unknown cited reference id {0}")]
    UnknownCrId(CrId),
    #[error("manual decisions conflict: {0} is marked different but joined by manual same-links")]
    ConflictingDecisions(CrPair),
    #[error("only manual decisions can be applied")]
    NotManual,
    #[error("invalid similarity config: {0}")]
    InvalidConfig(String),
}

/// Per-field weights of the composite similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub author: f64,
    pub source_or_title: f64,
    pub volume: f64,
    pub page: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            author: 0.40,
            source_or_title: 0.30,
            volume: 0.15,
            page: 0.15,
        }
    }
}

impl Weights {
    pub fn sum(&self) -> f64 {
        self.author + self.source_or_title + self.volume + self.page
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub threshold: f64,
    pub weights: Weights,
    /// Only compare references whose years differ by at most `rpy_slack`.
    pub same_rpy_only: bool,
    pub rpy_slack: u32,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            threshold: 0.75,
            weights: Weights::default(),
            same_rpy_only: true,
            rpy_slack: 0,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(MatchError::InvalidConfig(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        let w = self.weights;
        if [w.author, w.source_or_title, w.volume, w.page]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(MatchError::InvalidConfig("negative weight".into()));
        }
        if (w.sum() - 1.0).abs() > 1e-9 {
            return Err(MatchError::InvalidConfig(format!(
                "weights sum to {}, expected 1",
                w.sum()
            )));
        }
        Ok(())
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, MatchError> {
        self.threshold = threshold;
        self.validate().map(|_| self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = SimilarityConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.threshold, 0.75);
        assert!(cfg.same_rpy_only);
        assert_eq!(cfg.rpy_slack, 0);
    }

    #[test]
    fn rejects_bad_threshold_and_weights() {
        assert!(SimilarityConfig::default().with_threshold(1.01).is_err());
        assert!(SimilarityConfig::default().with_threshold(-0.1).is_err());
        let mut cfg = SimilarityConfig::default();
        cfg.weights.page = 0.5;
        assert!(cfg.validate().is_err());
    }
}
