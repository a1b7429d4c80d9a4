use std::cmp::Ordering;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crex_core::analysis::{author_sort_key, rpy_histogram, top_crs_for_rpy, YearRange};
use crex_core::matching::SimilarityConfig;
use crex_core::model::{display_details, CitedReference, CrId, Verdict};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::{SessionError, SharedSession};

const MAX_PAGE: usize = 1000;

const PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>crex</title></head>
<body><h1>crex curation service</h1>
<p>The JSON API lives under <code>/api</code>: crs, crs/{id}, clusters, decisions, merge,
cluster, rpys, top, remove-rpy, save, summary.</p></body></html>
";

pub struct ApiError {
    status: StatusCode,
    message: String,
    merged_into: Option<CrId>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            merged_into: None,
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, merged_into) = match &e {
            SessionError::BadRequest(_) => (StatusCode::BAD_REQUEST, None),
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, None),
            SessionError::MergedAway { into, .. } => (StatusCode::CONFLICT, Some(*into)),
            SessionError::Conflict(_) => (StatusCode::CONFLICT, None),
            SessionError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, None),
        };
        ApiError {
            status,
            message: e.to_string(),
            merged_into,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.merged_into {
            Some(into) => json!({ "error": self.message, "merged_into": into }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

#[derive(Serialize)]
struct CrRow<'a> {
    id: CrId,
    authors: &'a [String],
    title: Option<&'a str>,
    source: Option<&'a str>,
    rpy: Option<i32>,
    volume: Option<&'a str>,
    page: Option<&'a str>,
    doi: Option<&'a str>,
    n_cr: u32,
    cluster: Option<CrId>,
    raw: &'a str,
}

fn row<'a>(cr: &'a CitedReference, cluster: Option<CrId>) -> CrRow<'a> {
    CrRow {
        id: cr.id,
        authors: &cr.authors,
        title: cr.title.as_deref(),
        source: cr.source.as_deref(),
        rpy: cr.rpy,
        volume: cr.volume.as_deref(),
        page: cr.page.as_deref(),
        doi: cr.doi.as_deref(),
        n_cr: cr.n_cr,
        cluster,
        raw: &cr.raw,
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum SortKey {
    #[default]
    Id,
    Authors,
    Rpy,
    NCr,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Direction {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Deserialize)]
struct CrQuery {
    #[serde(default)]
    sort: SortKey,
    #[serde(default)]
    dir: Direction,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

#[derive(Serialize)]
struct CrPage<'a> {
    total: usize,
    offset: usize,
    limit: usize,
    rows: Vec<CrRow<'a>>,
}

/// Orders by the key in the requested direction; references lacking the key
/// come last either way, and ties go by id.
fn compare_present<T: Ord>(a: Option<T>, b: Option<T>, dir: Direction) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => match dir {
            Direction::Asc => x.cmp(&y),
            Direction::Desc => y.cmp(&x),
        },
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

async fn list_crs(State(s): State<SharedSession>, Query(q): Query<CrQuery>) -> Response {
    let session = s.read().await;
    let state = session.state();
    let mut crs: Vec<&CitedReference> = state.dataset.crs.values().collect();
    match q.sort {
        SortKey::Id => {
            if q.dir == Direction::Desc {
                crs.reverse();
            }
        }
        SortKey::Authors => {
            let mut keyed: Vec<_> = crs
                .into_iter()
                .map(|c| {
                    let (empty, surname, full) = author_sort_key(c);
                    (c, (!empty).then_some((surname, full)))
                })
                .collect();
            keyed.sort_by(|(a, ka), (b, kb)| {
                compare_present(ka.as_ref(), kb.as_ref(), q.dir).then(a.id.cmp(&b.id))
            });
            crs = keyed.into_iter().map(|(c, _)| c).collect();
        }
        SortKey::Rpy => {
            crs.sort_by(|a, b| compare_present(a.rpy, b.rpy, q.dir).then(a.id.cmp(&b.id)));
        }
        SortKey::NCr => {
            crs.sort_by(|a, b| {
                compare_present(Some(a.n_cr), Some(b.n_cr), q.dir).then(a.id.cmp(&b.id))
            });
        }
    }
    let limit = q.limit.unwrap_or(100).min(MAX_PAGE);
    let total = crs.len();
    let rows = crs
        .into_iter()
        .skip(q.offset)
        .take(limit)
        .map(|c| row(c, state.cluster_state.cluster_of(c.id)))
        .collect();
    Json(CrPage {
        total,
        offset: q.offset,
        limit,
        rows,
    })
    .into_response()
}

#[derive(Serialize)]
struct DetailRow {
    label: String,
    value: String,
}

#[derive(Serialize)]
struct CrDetails {
    id: CrId,
    details: Vec<DetailRow>,
}

async fn cr_details(State(s): State<SharedSession>, Path(id): Path<u32>) -> ApiResult<CrDetails> {
    let session = s.read().await;
    let id = CrId(id);
    let cr = session
        .state()
        .dataset
        .cr(id)
        .ok_or(SessionError::NotFound(id))?;
    let details = display_details(cr)
        .into_iter()
        .map(|(label, value)| DetailRow { label, value })
        .collect();
    Ok(Json(CrDetails { id, details }))
}

#[derive(Deserialize)]
struct ClusterQuery {
    min_size: Option<usize>,
}

#[derive(Serialize)]
struct PairView {
    a: CrId,
    b: CrId,
    score: Option<f64>,
    verdict: Verdict,
    provenance: crex_core::model::Provenance,
}

#[derive(Serialize)]
struct ClusterView<'a> {
    id: CrId,
    size: usize,
    members: Vec<CrRow<'a>>,
    pairs: Vec<PairView>,
}

/// Clusters with at least `min_size` members (default 2), largest first.
async fn list_clusters(State(s): State<SharedSession>, Query(q): Query<ClusterQuery>) -> Response {
    let session = s.read().await;
    let state = session.state();
    let st = &state.cluster_state;
    let min_size = q.min_size.unwrap_or(2);
    let mut clusters: Vec<Vec<CrId>> = st
        .clusters()
        .into_iter()
        .filter(|c| c.len() >= min_size)
        .collect();
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let views: Vec<ClusterView> = clusters
        .into_iter()
        .map(|members| {
            let mut pairs = Vec::new();
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    if let Some(d) = st.decision(a, b) {
                        pairs.push(PairView {
                            a: d.a,
                            b: d.b,
                            score: d.score,
                            verdict: d.verdict,
                            provenance: d.provenance,
                        });
                    }
                }
            }
            ClusterView {
                id: members[0],
                size: members.len(),
                members: members
                    .iter()
                    .filter_map(|id| state.dataset.cr(*id))
                    .map(|c| row(c, Some(members[0])))
                    .collect(),
                pairs,
            }
        })
        .collect();
    Json(views).into_response()
}

#[derive(Deserialize)]
struct DecisionBody {
    a: CrId,
    b: CrId,
    verdict: Verdict,
}

#[derive(Serialize)]
struct DecisionResult {
    clusters: Vec<Vec<CrId>>,
}

async fn post_decision(State(s): State<SharedSession>, body: Bytes) -> ApiResult<DecisionResult> {
    let body: DecisionBody = parse_body(&body)?;
    let mut session = s.write().await;
    let clusters = session.record_decision(body.a, body.b, body.verdict)?;
    Ok(Json(DecisionResult { clusters }))
}

#[derive(Deserialize)]
struct ClusterBody {
    threshold: Option<f64>,
    rpy_slack: Option<u32>,
    same_rpy_only: Option<bool>,
}

async fn post_cluster(State(s): State<SharedSession>, body: Bytes) -> Result<Response, ApiError> {
    let body: ClusterBody = if body.is_empty() {
        ClusterBody {
            threshold: None,
            rpy_slack: None,
            same_rpy_only: None,
        }
    } else {
        parse_body(&body)?
    };
    let mut session = s.write().await;
    let base = session.state().config;
    let config = SimilarityConfig {
        threshold: body.threshold.unwrap_or(base.threshold),
        rpy_slack: body.rpy_slack.unwrap_or(base.rpy_slack),
        same_rpy_only: body.same_rpy_only.unwrap_or(base.same_rpy_only),
        ..base
    };
    let clusters = session.recluster(config)?;
    Ok(Json(json!({ "clusters": clusters })).into_response())
}

async fn post_merge(State(s): State<SharedSession>) -> Response {
    let mut session = s.write().await;
    Json(session.merge()).into_response()
}

async fn get_rpys(State(s): State<SharedSession>) -> Response {
    let session = s.read().await;
    Json(rpy_histogram(&session.state().dataset)).into_response()
}

#[derive(Deserialize)]
struct TopQuery {
    rpy: i32,
    k: Option<usize>,
}

async fn get_top(
    State(s): State<SharedSession>,
    Query(q): Query<TopQuery>,
) -> Result<Response, ApiError> {
    let session = s.read().await;
    let state = session.state();
    let top = top_crs_for_rpy(&state.dataset, q.rpy, q.k.unwrap_or(10))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let rows: Vec<CrRow> = top
        .into_iter()
        .map(|c| row(c, state.cluster_state.cluster_of(c.id)))
        .collect();
    Ok(Json(rows).into_response())
}

#[derive(Deserialize)]
struct RemoveBody {
    from: i32,
    to: i32,
    #[serde(default = "keep_missing_default")]
    keep_missing: bool,
}

fn keep_missing_default() -> bool {
    true
}

async fn post_remove(State(s): State<SharedSession>, body: Bytes) -> Result<Response, ApiError> {
    let body: RemoveBody = parse_body(&body)?;
    let range =
        YearRange::new(body.from, body.to).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut session = s.write().await;
    let summary = session.remove_years(range, body.keep_missing)?;
    Ok(Json(summary).into_response())
}

async fn post_save(State(s): State<SharedSession>) -> Result<Response, ApiError> {
    let mut session = s.write().await;
    session.save()?;
    Ok(Json(json!({ "saved": session.state_path().display().to_string() })).into_response())
}

async fn get_summary(State(s): State<SharedSession>) -> Response {
    let session = s.read().await;
    let state = session.state();
    let ds = &state.dataset;
    let spectrum = rpy_histogram(ds);
    Json(json!({
        "origin": ds.origin,
        "publications": ds.publications.len(),
        "crs": ds.crs.len(),
        "total_n_cr": ds.total_n_cr(),
        "missing_rpy": spectrum.missing_rpy,
        "clusters": state.cluster_state.clusters().iter().filter(|c| c.len() > 1).count(),
        "decisions": state.cluster_state.decisions().len(),
        "threshold": state.config.threshold,
        "dirty": session.is_dirty(),
        "state_path": session.state_path().display().to_string(),
    }))
    .into_response()
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

/// The API under `/api`, plus static assets (or a placeholder page) at `/`.
pub fn router(session: SharedSession, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/crs", get(list_crs))
        .route("/crs/{id}", get(cr_details))
        .route("/clusters", get(list_clusters))
        .route("/decisions", post(post_decision))
        .route("/cluster", post(post_cluster))
        .route("/merge", post(post_merge))
        .route("/rpys", get(get_rpys))
        .route("/top", get(get_top))
        .route("/remove-rpy", post(post_remove))
        .route("/save", post(post_save))
        .route("/summary", get(get_summary))
        .with_state(session);
    let app = Router::new().nest("/api", api);
    match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(placeholder)),
    }
}
