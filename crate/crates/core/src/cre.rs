//! `.cre` working files.
//!
//! Layout: the four bytes `CRE1`, the format version as a little-endian
//! `u32`, then a gzip-compressed tar archive holding `state.json` (dataset,
//! cluster state, similarity config, manual decisions) and one entry per
//! imported source file under `sources/`. Identical states serialize to
//! identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matching::{ClusterState, PairScores, SimilarityConfig};
use crate::model::{CrId, Dataset, DecisionSet, MatchDecision, Provenance, Verdict};

pub const MAGIC: &[u8; 4] = b"CRE1";
pub const FORMAT_VERSION: u32 = 1;
const DOC_KIND: &str = "crex-working-state";
const STATE_ENTRY: &str = "state.json";

#[derive(Debug, Error)]
pub enum CreError {
    #[error("not a .cre file (bad magic)")]
    BadMagic,
    #[error("unsupported .cre format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt .cre payload: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn corrupt(detail: impl std::fmt::Display) -> CreError {
    CreError::CorruptPayload(detail.to_string())
}

/// Everything a curator works on.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingState {
    pub dataset: Dataset,
    pub cluster_state: ClusterState,
    pub config: SimilarityConfig,
    pub format_version: u32,
}

impl WorkingState {
    /// A fresh state: every reference its own cluster, no decisions.
    pub fn new(dataset: Dataset, config: SimilarityConfig) -> Self {
        let cluster_state =
            ClusterState::singletons(&dataset, config.threshold, &DecisionSet::new());
        WorkingState {
            dataset,
            cluster_state,
            config,
            format_version: FORMAT_VERSION,
        }
    }

    /// Copies manual decisions from `previous` onto references of this state
    /// with the same raw text. Returns how many were carried over.
    pub fn carry_decisions_from(&mut self, previous: &WorkingState) -> usize {
        let by_digest: HashMap<String, CrId> = self
            .dataset
            .crs
            .values()
            .map(|c| (c.raw_digest(), c.id))
            .collect();
        let lookup = |id: CrId| {
            previous
                .dataset
                .cr(id)
                .and_then(|c| by_digest.get(&c.raw_digest()).copied())
        };
        let mut decisions = self.cluster_state.decisions().clone();
        let mut carried = 0;
        for d in previous.cluster_state.decisions().iter() {
            if let (Some(a), Some(b)) = (lookup(d.a), lookup(d.b)) {
                if let Ok(moved) = MatchDecision::new(a, b, d.verdict, Provenance::Manual, None) {
                    decisions.insert(moved);
                    carried += 1;
                }
            }
        }
        self.cluster_state =
            ClusterState::singletons(&self.dataset, self.config.threshold, &decisions);
        carried
    }
}

#[derive(Serialize, Deserialize)]
struct StoredDecision {
    a: CrId,
    b: CrId,
    a_digest: String,
    b_digest: String,
    verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct StoredClusters {
    threshold: f64,
    assignment: BTreeMap<CrId, CrId>,
    pair_scores: PairScores,
}

#[derive(Serialize, Deserialize)]
struct StateDocument {
    format: String,
    format_version: u32,
    config: SimilarityConfig,
    dataset: Dataset,
    clusters: StoredClusters,
    manual_decisions: Vec<StoredDecision>,
}

fn append_entry<W: Write>(tar: &mut tar::Builder<W>, name: &str, data: &[u8]) -> io::Result<()> {
    let mut header = tar::Header::new_gnu();
    header.set_size(data.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_uid(0);
    header.set_gid(0);
    header.set_entry_type(tar::EntryType::Regular);
    header.set_cksum();
    tar.append_data(&mut header, name, data)
}

fn source_entry(index: usize) -> String {
    format!("sources/{index:04}")
}

/// Writes a working state.
pub fn save_cre<W: Write>(state: &WorkingState, mut sink: W) -> Result<(), CreError> {
    let ds = &state.dataset;
    let digest = |id: CrId| ds.cr(id).map(|c| c.raw_digest()).unwrap_or_default();
    let doc = StateDocument {
        format: DOC_KIND.to_string(),
        format_version: FORMAT_VERSION,
        config: state.config,
        dataset: ds.clone(),
        clusters: StoredClusters {
            threshold: state.cluster_state.threshold(),
            assignment: state.cluster_state.assignment().clone(),
            pair_scores: state.cluster_state.pair_scores().clone(),
        },
        manual_decisions: state
            .cluster_state
            .decisions()
            .iter()
            .map(|d| StoredDecision {
                a: d.a,
                b: d.b,
                a_digest: digest(d.a),
                b_digest: digest(d.b),
                verdict: d.verdict,
                score: d.score,
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&doc).map_err(io::Error::other)?;

    let mut payload = Vec::new();
    {
        let gz = GzEncoder::new(&mut payload, Compression::default());
        let mut tar = tar::Builder::new(gz);
        tar.mode(tar::HeaderMode::Deterministic);
        append_entry(&mut tar, STATE_ENTRY, &json)?;
        for (i, src) in ds.sources.iter().enumerate() {
            append_entry(&mut tar, &source_entry(i), &src.bytes)?;
        }
        tar.into_inner()?.finish()?;
    }

    sink.write_all(MAGIC)?;
    sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
    sink.write_all(&payload)?;
    sink.flush()?;
    Ok(())
}

/// Reads a working state, validating every cross-reference. Nothing is
/// returned unless the whole file checks out.
pub fn load_cre<R: Read>(mut source: R) -> Result<WorkingState, CreError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(CreError::BadMagic);
    }
    let version_bytes: [u8; 4] = bytes
        .get(4..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| corrupt("missing version"))?;
    match u32::from_le_bytes(version_bytes) {
        1 => load_v1(&bytes[8..]),
        other => Err(CreError::UnsupportedVersion(other)),
    }
}

fn load_v1(payload: &[u8]) -> Result<WorkingState, CreError> {
    let mut archive = Vec::new();
    GzDecoder::new(payload)
        .read_to_end(&mut archive)
        .map_err(|e| corrupt(format!("decompression failed: {e}")))?;

    let mut entries: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut tar = tar::Archive::new(archive.as_slice());
    for entry in tar.entries().map_err(corrupt)? {
        let mut entry = entry.map_err(corrupt)?;
        let name = entry
            .path()
            .map_err(corrupt)?
            .to_string_lossy()
            .into_owned();
        let mut data = Vec::new();
        entry.read_to_end(&mut data).map_err(corrupt)?;
        entries.insert(name, data);
    }

    let json = entries
        .get(STATE_ENTRY)
        .ok_or_else(|| corrupt("missing state.json"))?;
    let doc: StateDocument = serde_json::from_slice(json).map_err(corrupt)?;
    if doc.format != DOC_KIND {
        return Err(corrupt(format!(
            "unexpected document kind {:?}",
            doc.format
        )));
    }
    if doc.format_version != 1 {
        return Err(corrupt(format!(
            "document version {} inside a version 1 container",
            doc.format_version
        )));
    }
    doc.config.validate().map_err(corrupt)?;

    let mut dataset = doc.dataset;
    for (i, src) in dataset.sources.iter_mut().enumerate() {
        let data = entries
            .remove(&source_entry(i))
            .ok_or_else(|| corrupt(format!("missing source file {}", src.name)))?;
        if hex::encode(Sha256::digest(&data)) != src.sha256 {
            return Err(corrupt(format!(
                "source file {} fails its checksum",
                src.name
            )));
        }
        src.bytes = data;
    }
    dataset.validate().map_err(corrupt)?;

    let mut decisions = DecisionSet::new();
    for d in doc.manual_decisions {
        for (id, digest) in [(d.a, &d.a_digest), (d.b, &d.b_digest)] {
            let cr = dataset
                .cr(id)
                .ok_or_else(|| corrupt(format!("decision names unknown reference {id}")))?;
            if &cr.raw_digest() != digest {
                return Err(corrupt(format!(
                    "decision digest mismatch for reference {id}"
                )));
            }
        }
        let decision = MatchDecision::new(d.a, d.b, d.verdict, Provenance::Manual, d.score)
            .map_err(corrupt)?;
        decisions.insert(decision);
    }

    let clusters = doc.clusters;
    if clusters.assignment.len() != dataset.crs.len()
        || !clusters
            .assignment
            .keys()
            .all(|id| dataset.crs.contains_key(id))
    {
        return Err(corrupt(
            "cluster assignment does not cover the reference table",
        ));
    }
    let stored = ClusterState::from_parts(
        clusters.threshold,
        clusters.assignment,
        clusters.pair_scores,
        decisions,
    )
    .map_err(corrupt)?;
    let rebuilt = stored.recluster(&dataset).map_err(corrupt)?;
    if rebuilt.assignment() != stored.assignment() {
        return Err(corrupt(
            "cluster assignment disagrees with scores and decisions",
        ));
    }

    Ok(WorkingState {
        dataset,
        cluster_state: stored,
        config: doc.config,
        format_version: FORMAT_VERSION,
    })
}

pub fn save_cre_file(state: &WorkingState, path: impl AsRef<Path>) -> Result<(), CreError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    save_cre(state, &mut bytes)?;
    let tmp = path.with_extension("cre.tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_cre_file(path: impl AsRef<Path>) -> Result<WorkingState, CreError> {
    load_cre(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{apply_manual_decision, cluster_equivalent};
    use crate::model::DatasetOrigin;
    use crate::wos::{parse_wos, WosInput};

    const FILE: &str = "FN x\nVR 1.0\nPT J\nTI t\nCR GARFIELD E, 1955, SCIENCE, V122, P108\n   GARFELD E, 1955, SCIENCE, V122, P108\n   PRICE DJD, 1965, SCIENCE, V149, P510\nER\nEF\n";

    fn state() -> WorkingState {
        let ds = parse_wos(&[WosInput::new("a.txt", FILE)]).unwrap();
        let cfg = SimilarityConfig::default();
        let st = cluster_equivalent(&ds, &cfg, &DecisionSet::new()).unwrap();
        let st = apply_manual_decision(
            &ds,
            &st,
            MatchDecision::manual(CrId(0), CrId(2), Verdict::Different).unwrap(),
        )
        .unwrap();
        WorkingState {
            dataset: ds,
            cluster_state: st,
            config: cfg,
            format_version: FORMAT_VERSION,
        }
    }

    fn bytes(s: &WorkingState) -> Vec<u8> {
        let mut out = Vec::new();
        save_cre(s, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_keeps_decisions_and_sources() {
        let s = state();
        let back = load_cre(bytes(&s).as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.dataset.sources[0].bytes, FILE.as_bytes());
        assert_eq!(back.cluster_state.decisions().len(), 1);
    }

    #[test]
    fn saves_are_deterministic() {
        let s = state();
        assert_eq!(bytes(&s), bytes(&s.clone()));
    }

    #[test]
    fn empty_state_loads() {
        let s = WorkingState::new(
            Dataset::empty(DatasetOrigin::Wos),
            SimilarityConfig::default(),
        );
        let b = bytes(&s);
        assert_eq!(&b[..4], MAGIC);
        assert_eq!(load_cre(b.as_slice()).unwrap(), s);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let b = bytes(&state());
        for cut in [9, b.len() / 2, b.len() - 1] {
            match load_cre(&b[..cut]) {
                Err(CreError::CorruptPayload(_)) => {}
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn newer_version_rejected() {
        let mut b = bytes(&state());
        b[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            load_cre(b.as_slice()),
            Err(CreError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            load_cre(&b"PK\x03\x04rest"[..]),
            Err(CreError::BadMagic)
        ));
        assert!(matches!(load_cre(&b""[..]), Err(CreError::BadMagic)));
    }

    #[test]
    fn decisions_carry_over_by_raw_text() {
        let old = state();
        let ds = parse_wos(&[WosInput::new("again.txt", FILE)]).unwrap();
        let mut fresh = WorkingState::new(ds, SimilarityConfig::default());
        assert_eq!(fresh.carry_decisions_from(&old), 1);
        let d = fresh
            .cluster_state
            .decisions()
            .get(CrId(2), CrId(0))
            .unwrap();
        assert_eq!(d.verdict, Verdict::Different);
    }
}
