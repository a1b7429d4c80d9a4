//! Shared data model: cited references, citing publications, datasets and
//! match decisions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Lowest accepted reference publication year.
pub const MIN_RPY: i32 = 1000;
/// Highest accepted reference publication year.
pub const MAX_RPY: i32 = 2999;

pub fn is_valid_rpy(year: i32) -> bool {
    (MIN_RPY..=MAX_RPY).contains(&year)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("a decision needs two distinct cited references (got {0} twice)")]
    SelfPair(CrId),
    #[error("duplicate cited reference id {0}")]
    DuplicateId(CrId),
    #[error("cited reference {0} is keyed under {1}")]
    KeyMismatch(CrId, CrId),
    #[error("publication {publication} references unknown cited reference {cr}")]
    DanglingCr { publication: PubId, cr: CrId },
    #[error("cited reference {0} has an empty raw string")]
    EmptyRaw(CrId),
    #[error("cited reference {0} has n_cr = 0")]
    ZeroCount(CrId),
    #[error("cited reference {0} has year {1} outside [{MIN_RPY}, {MAX_RPY}]")]
    YearOutOfRange(CrId, i32),
    #[error("WoS cited reference {0} carries {1} authors")]
    TooManyWosAuthors(CrId, usize),
    #[error("cited reference {cr} has n_cr = {counted} but fills {slots} slot(s)")]
    Conservation { cr: CrId, counted: u64, slots: u64 },
    #[error("merge alias {0} -> {1} does not resolve")]
    DanglingAlias(CrId, CrId),
}

/// Identifier of a cited reference within one dataset.
///
/// Ids are handed out in order of first appearance during import and never
/// reused, so ordering them is the lexicographic tie-break used by the
/// matching module.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CrId(pub u32);

impl fmt::Display for CrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for CrId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(CrId)
    }
}

/// Identifier of a citing publication within one dataset.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PubId(pub u32);

impl fmt::Display for PubId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Vendor a record or reference was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "WOS")]
    Wos,
    #[serde(rename = "SCOPUS")]
    Scopus,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Wos => "WOS",
            Origin::Scopus => "SCOPUS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetOrigin {
    #[serde(rename = "WOS")]
    Wos,
    #[serde(rename = "SCOPUS")]
    Scopus,
    #[serde(rename = "MIXED")]
    Mixed,
}

impl From<Origin> for DatasetOrigin {
    fn from(o: Origin) -> Self {
        match o {
            Origin::Wos => DatasetOrigin::Wos,
            Origin::Scopus => DatasetOrigin::Scopus,
        }
    }
}

impl fmt::Display for DatasetOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetOrigin::Wos => "WOS",
            DatasetOrigin::Scopus => "SCOPUS",
            DatasetOrigin::Mixed => "MIXED",
        })
    }
}

/// One cited-reference entry: the parsed bibliographic fields of a reference
/// string plus the number of reference slots it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedReference {
    pub id: CrId,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpy: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    pub origin: Origin,
    pub n_cr: u32,
}

impl CitedReference {
    /// A reference that carries nothing but its source text.
    pub fn raw_only(raw: impl Into<String>, origin: Origin) -> Self {
        CitedReference {
            id: CrId::default(),
            raw: raw.into(),
            authors: Vec::new(),
            title: None,
            source: None,
            rpy: None,
            volume: None,
            page: None,
            doi: None,
            origin,
            n_cr: 1,
        }
    }

    pub fn first_author(&self) -> Option<&str> {
        self.authors.first().map(String::as_str)
    }

    /// Number of bibliographic fields that carry a value (authors count once).
    pub fn present_field_count(&self) -> usize {
        usize::from(!self.authors.is_empty())
            + usize::from(self.title.is_some())
            + usize::from(self.source.is_some())
            + usize::from(self.rpy.is_some())
            + usize::from(self.volume.is_some())
            + usize::from(self.page.is_some())
            + usize::from(self.doi.is_some())
    }

    /// True when both entries carry identical bibliographic fields,
    /// ignoring id, raw text, origin and count.
    pub fn same_fields(&self, other: &CitedReference) -> bool {
        self.authors == other.authors
            && self.title == other.title
            && self.source == other.source
            && self.rpy == other.rpy
            && self.volume == other.volume
            && self.page == other.page
            && self.doi == other.doi
    }

    /// Hex SHA-256 of the raw string; stable across re-imports.
    pub fn raw_digest(&self) -> String {
        raw_digest(&self.raw)
    }
}

pub fn raw_digest(raw: &str) -> String {
    hex::encode(Sha256::digest(raw.as_bytes()))
}

/// A vendor field of a citing publication: a WoS tag or a Scopus column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub tag: String,
    pub values: Vec<String>,
}

impl Field {
    pub fn new(tag: impl Into<String>, values: Vec<String>) -> Self {
        Field {
            tag: tag.into(),
            values,
        }
    }

    pub fn single(tag: impl Into<String>, value: impl Into<String>) -> Self {
        Field::new(tag, vec![value.into()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitingPublication {
    pub id: PubId,
    pub origin: Origin,
    /// Vendor fields in source order. The field carrying the reference list
    /// (`CR` / `References`) is kept as a position marker with no values;
    /// its content lives in `cr_ids`.
    pub fields: Vec<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pub_year: Option<i32>,
    pub cr_ids: Vec<CrId>,
}

impl CitingPublication {
    /// First field whose tag matches exactly.
    pub fn field(&self, tag: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.tag == tag)
    }

    /// First field whose tag matches ignoring case and surrounding whitespace.
    pub fn field_ci(&self, tag: &str) -> Option<&Field> {
        self.fields
            .iter()
            .find(|f| f.tag.trim().eq_ignore_ascii_case(tag))
    }
}

/// An input file the dataset was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub name: String,
    pub origin: Origin,
    pub sha256: String,
    /// Original bytes; persisted next to the state document in `.cre` files.
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, origin: Origin, bytes: Vec<u8>) -> Self {
        SourceFile {
            name: name.into(),
            origin,
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub origin: DatasetOrigin,
    pub publications: Vec<CitingPublication>,
    pub crs: BTreeMap<CrId, CitedReference>,
    #[serde(default)]
    pub sources: Vec<SourceFile>,
    /// Merge history: merged-away id -> id of the surviving representative.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub merged_into: BTreeMap<CrId, CrId>,
}

impl Dataset {
    pub fn empty(origin: DatasetOrigin) -> Self {
        Dataset {
            origin,
            publications: Vec::new(),
            crs: BTreeMap::new(),
            sources: Vec::new(),
            merged_into: BTreeMap::new(),
        }
    }

    pub fn cr(&self, id: CrId) -> Option<&CitedReference> {
        self.crs.get(&id)
    }

    pub fn total_n_cr(&self) -> u64 {
        self.crs.values().map(|c| u64::from(c.n_cr)).sum()
    }

    pub fn total_slots(&self) -> u64 {
        self.publications
            .iter()
            .map(|p| p.cr_ids.len() as u64)
            .sum()
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (key, cr) in &self.crs {
            if *key != cr.id {
                return Err(ModelError::KeyMismatch(cr.id, *key));
            }
            if cr.raw.is_empty() {
                return Err(ModelError::EmptyRaw(cr.id));
            }
            if cr.n_cr == 0 {
                return Err(ModelError::ZeroCount(cr.id));
            }
            if let Some(y) = cr.rpy {
                if !is_valid_rpy(y) {
                    return Err(ModelError::YearOutOfRange(cr.id, y));
                }
            }
            if cr.origin == Origin::Wos && cr.authors.len() > 1 {
                return Err(ModelError::TooManyWosAuthors(cr.id, cr.authors.len()));
            }
        }
        for p in &self.publications {
            if let Some(&cr) = p.cr_ids.iter().find(|id| !self.crs.contains_key(id)) {
                return Err(ModelError::DanglingCr {
                    publication: p.id,
                    cr,
                });
            }
        }
        for (from, to) in &self.merged_into {
            if !self.crs.contains_key(to) || self.crs.contains_key(from) {
                return Err(ModelError::DanglingAlias(*from, *to));
            }
        }
        let mut slots: BTreeMap<CrId, u64> = BTreeMap::new();
        for id in self.publications.iter().flat_map(|p| &p.cr_ids) {
            *slots.entry(*id).or_default() += 1;
        }
        for cr in self.crs.values() {
            let filled = slots.get(&cr.id).copied().unwrap_or(0);
            if u64::from(cr.n_cr) != filled {
                return Err(ModelError::Conservation {
                    cr: cr.id,
                    counted: cr.n_cr.into(),
                    slots: filled,
                });
            }
        }
        Ok(())
    }

    /// Joins freshly imported datasets into one, as if all their sources had
    /// been read together. Identical reference strings across parts collapse.
    pub fn combine(parts: Vec<Dataset>) -> Dataset {
        let mut builder = DatasetBuilder::new(Origin::Wos);
        for part in parts {
            for p in &part.publications {
                let refs = p
                    .cr_ids
                    .iter()
                    .filter_map(|id| part.crs.get(id).cloned())
                    .collect();
                builder.push_publication(p.origin, p.fields.clone(), p.pub_year, refs);
            }
            for src in part.sources {
                builder.add_source(src);
            }
        }
        let mut ds = builder.finish();
        ds.refresh_origin();
        ds
    }

    /// Recomputes the dataset origin from its publications.
    fn refresh_origin(&mut self) {
        let mut seen = self.publications.iter().map(|p| p.origin);
        if let Some(first) = seen.next() {
            self.origin = if seen.all(|o| o == first) {
                first.into()
            } else {
                DatasetOrigin::Mixed
            };
        }
    }
}

/// Assembles a dataset from parsed publications, collapsing byte-identical
/// (after trimming) reference strings into one entry with summed counts.
#[derive(Debug)]
pub struct DatasetBuilder {
    dataset: Dataset,
    by_raw: HashMap<String, CrId>,
    seen_records: HashSet<String>,
    next_cr: u32,
}

impl DatasetBuilder {
    pub fn new(origin: Origin) -> Self {
        DatasetBuilder {
            dataset: Dataset::empty(origin.into()),
            by_raw: HashMap::new(),
            seen_records: HashSet::new(),
            next_cr: 0,
        }
    }

    pub fn add_source(&mut self, source: SourceFile) {
        self.dataset.sources.push(source);
    }

    /// Registers a record key; returns false when the key was seen before.
    pub fn claim_record(&mut self, key: &str) -> bool {
        self.seen_records.insert(key.to_string())
    }

    /// Appends a publication. References with blank raw text are skipped.
    pub fn push_publication(
        &mut self,
        origin: Origin,
        fields: Vec<Field>,
        pub_year: Option<i32>,
        references: Vec<CitedReference>,
    ) -> PubId {
        let id = PubId(self.dataset.publications.len() as u32);
        let mut cr_ids = Vec::with_capacity(references.len());
        for mut cr in references {
            let raw = cr.raw.trim();
            if raw.is_empty() {
                continue;
            }
            let cr_id = match self.by_raw.get(raw) {
                Some(&existing) => {
                    if let Some(entry) = self.dataset.crs.get_mut(&existing) {
                        entry.n_cr += 1;
                    }
                    existing
                }
                None => {
                    let new_id = CrId(self.next_cr);
                    self.next_cr += 1;
                    if cr.raw.len() != raw.len() {
                        cr.raw = raw.to_string();
                    }
                    cr.id = new_id;
                    cr.n_cr = 1;
                    self.by_raw.insert(cr.raw.clone(), new_id);
                    self.dataset.crs.insert(new_id, cr);
                    new_id
                }
            };
            cr_ids.push(cr_id);
        }
        self.dataset.publications.push(CitingPublication {
            id,
            origin,
            fields,
            pub_year,
            cr_ids,
        });
        id
    }

    pub fn finish(self) -> Dataset {
        self.dataset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "SAME", alias = "same")]
    Same,
    #[serde(rename = "DIFFERENT", alias = "different")]
    Different,
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "same" => Ok(Verdict::Same),
            "different" => Ok(Verdict::Different),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "ALGORITHM")]
    Algorithm,
    #[serde(rename = "MANUAL")]
    Manual,
}

/// An orderless pair of distinct cited-reference ids, stored smaller first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(CrId, CrId)", into = "(CrId, CrId)")]
pub struct CrPair {
    lo: CrId,
    hi: CrId,
}

impl CrPair {
    pub fn new(a: CrId, b: CrId) -> Result<Self, ModelError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(CrPair { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Ok(CrPair { lo: b, hi: a }),
            std::cmp::Ordering::Equal => Err(ModelError::SelfPair(a)),
        }
    }

    pub fn lo(self) -> CrId {
        self.lo
    }

    pub fn hi(self) -> CrId {
        self.hi
    }

    pub fn contains(self, id: CrId) -> bool {
        self.lo == id || self.hi == id
    }
}

impl TryFrom<(CrId, CrId)> for CrPair {
    type Error = ModelError;

    fn try_from((a, b): (CrId, CrId)) -> Result<Self, Self::Error> {
        CrPair::new(a, b)
    }
}

impl From<CrPair> for (CrId, CrId) {
    fn from(p: CrPair) -> Self {
        (p.lo, p.hi)
    }
}

impl fmt::Display for CrPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// A same/different verdict on a pair of cited references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub a: CrId,
    pub b: CrId,
    pub verdict: Verdict,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl MatchDecision {
    /// Builds a decision; the pair is stored with the smaller id in `a`.
    pub fn new(
        a: CrId,
        b: CrId,
        verdict: Verdict,
        provenance: Provenance,
        score: Option<f64>,
    ) -> Result<Self, ModelError> {
        let pair = CrPair::new(a, b)?;
        Ok(MatchDecision {
            a: pair.lo,
            b: pair.hi,
            verdict,
            provenance,
            score,
        })
    }

    pub fn manual(a: CrId, b: CrId, verdict: Verdict) -> Result<Self, ModelError> {
        MatchDecision::new(a, b, verdict, Provenance::Manual, None)
    }

    pub fn pair(&self) -> CrPair {
        CrPair {
            lo: self.a.min(self.b),
            hi: self.a.max(self.b),
        }
    }
}

/// Manual decisions keyed by orderless pair; at most one per pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<MatchDecision>", into = "Vec<MatchDecision>")]
pub struct DecisionSet {
    by_pair: BTreeMap<CrPair, MatchDecision>,
}

impl DecisionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a decision, replacing any previous one on the same pair.
    pub fn insert(&mut self, decision: MatchDecision) -> Option<MatchDecision> {
        self.by_pair.insert(decision.pair(), decision)
    }

    pub fn get(&self, a: CrId, b: CrId) -> Option<&MatchDecision> {
        CrPair::new(a, b).ok().and_then(|p| self.by_pair.get(&p))
    }

    pub fn remove(&mut self, a: CrId, b: CrId) -> Option<MatchDecision> {
        CrPair::new(a, b).ok().and_then(|p| self.by_pair.remove(&p))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MatchDecision> {
        self.by_pair.values()
    }

    pub fn len(&self) -> usize {
        self.by_pair.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_pair.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = CrId> + '_ {
        self.by_pair.keys().flat_map(|p| [p.lo, p.hi])
    }

    /// Rewrites ids through `map` (merged-away id -> representative),
    /// dropping decisions that collapse onto a single id.
    pub fn remapped(&self, map: &BTreeMap<CrId, CrId>) -> DecisionSet {
        let resolve = |id: CrId| map.get(&id).copied().unwrap_or(id);
        let mut out = DecisionSet::new();
        for d in self.iter() {
            let (a, b) = (resolve(d.a), resolve(d.b));
            if let Ok(moved) = MatchDecision::new(a, b, d.verdict, d.provenance, d.score) {
                out.insert(moved);
            }
        }
        out
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&MatchDecision) -> bool) {
        self.by_pair.retain(|_, d| keep(d));
    }
}

impl From<Vec<MatchDecision>> for DecisionSet {
    fn from(v: Vec<MatchDecision>) -> Self {
        let mut set = DecisionSet::new();
        for d in v {
            set.insert(d);
        }
        set
    }
}

impl From<DecisionSet> for Vec<MatchDecision> {
    fn from(s: DecisionSet) -> Self {
        s.by_pair.into_values().collect()
    }
}

impl FromIterator<MatchDecision> for DecisionSet {
    fn from_iter<T: IntoIterator<Item = MatchDecision>>(iter: T) -> Self {
        iter.into_iter().collect::<Vec<_>>().into()
    }
}

/// Label/value rows describing a cited reference, in display order.
pub type DetailRecord = Vec<(String, String)>;

/// Every present field of a reference, followed by count, origin and the raw
/// source text.
pub fn display_details(cr: &CitedReference) -> DetailRecord {
    let mut rows = Vec::new();
    let mut push = |label: &str, value: String| rows.push((label.to_string(), value));
    if !cr.authors.is_empty() {
        push("Authors", cr.authors.join("; "));
    }
    if let Some(t) = &cr.title {
        push("Title", t.clone());
    }
    if let Some(s) = &cr.source {
        push("Source", s.clone());
    }
    if let Some(y) = cr.rpy {
        push("RPY", y.to_string());
    }
    if let Some(v) = &cr.volume {
        push("Volume", v.clone());
    }
    if let Some(p) = &cr.page {
        push("Page", p.clone());
    }
    if let Some(d) = &cr.doi {
        push("DOI", d.clone());
    }
    push("N_CR", cr.n_cr.to_string());
    push("Origin", cr.origin.to_string());
    push("Raw", cr.raw.clone());
    rows
}
