//! Core of the crex toolkit: the cited-reference data model, Web of Science
//! and Scopus codecs, variant clustering and merging, publication-year
//! spectroscopy and the `.cre` working-file format.

pub mod analysis;
pub mod convert;
pub mod cre;
pub mod key;
pub mod matching;
pub mod model;
pub mod scopus;
pub mod synth;
pub mod wos;

pub use analysis::{
    compute_median_deviation, remove_by_rpy, rpy_histogram, top_crs_for_rpy, AnalysisError,
    RpySpectrum, SpectrumRow, YearRange,
};
pub use convert::{loss_report, LossReport};
pub use cre::{load_cre, load_cre_file, save_cre, save_cre_file, CreError, WorkingState};
pub use key::{canonical_key, NormalizedKey};
pub use matching::{
    apply_manual_decision, cluster_equivalent, merge_clusters, pair_similarity, ClusterState,
    MatchError, SimilarityConfig, Weights,
};
pub use model::{
    display_details, CitedReference, CitingPublication, CrId, CrPair, Dataset, DatasetOrigin,
    DecisionSet, DetailRecord, MatchDecision, ModelError, Origin, Provenance, PubId, Verdict,
};
pub use scopus::{parse_scopus_cr, parse_scopus_csv, write_scopus_csv, ScopusError, ScopusImport};
pub use wos::{parse_wos, parse_wos_cr, write_wos, WosError, WosInput};
