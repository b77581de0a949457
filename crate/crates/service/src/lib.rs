//! HTTP/JSON API over one live analysis session.
//!
//! Every response carries an `x-staleness` header with the session counter
//! it was computed at. Mutations may send the counter they last saw in the
//! same header; a mismatch is answered with `409 stale` and nothing changes.

mod error;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{FromRequest, FromRequestParts, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use refspect_core::export::{write_clusters_csv, write_spectrum_csv};
use refspect_core::ingest::{read_corpus_file, Corpus, Fingerprint};
use refspect_core::reference::ClusterId;
use refspect_core::session::{load_session, now, save_session, AnalysisSession, LiveSession, SessionFilters};
use refspect_core::spectrum::{
    cluster_rows, detect_peaks, peak_reports, spectrum_from_cluster_counts, top_references_for_year, Analysis,
    Derived, MarkerMode, MarkerSelection, PeakParams, PeakReport, PipelineConfig, SpectrumPoint, YearRange,
};

pub use error::ApiError;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct ApiJson<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Query<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct UrlPath<T>(T);

pub const STALENESS_HEADER: &str = "x-staleness";
pub const TOKEN_HEADER: &str = "x-session-token";

struct Shared {
    live: RwLock<LiveSession>,
    session_path: Option<PathBuf>,
    token: String,
    /// Derived outputs keyed by the staleness counter they belong to.
    memo: Mutex<Option<(u64, Arc<Derived>)>>,
}

/// Cheap to clone; all clones share one session.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(live: LiveSession, session_path: Option<PathBuf>) -> Self {
        let mut hash = Sha256::new();
        hash.update(live.session().session_id.as_bytes());
        hash.update(now().timestamp_nanos_opt().unwrap_or_default().to_le_bytes());
        hash.update(std::process::id().to_le_bytes());
        let token = hash.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect();
        AppState {
            shared: Arc::new(Shared {
                live: RwLock::new(live),
                session_path,
                token,
                memo: Mutex::new(None),
            }),
        }
    }

    /// Loads the corpus and, when `session_path` names an existing file, the
    /// saved session; otherwise starts a fresh session with `config`.
    pub fn open(corpus_path: &Path, session_path: Option<PathBuf>, config: &PipelineConfig) -> Result<Self, String> {
        let (_, ingested) = read_corpus_file(corpus_path).map_err(|e| format!("{}: {e}", corpus_path.display()))?;
        let (corpus, _) = ingested.into_corpus().map_err(|e| e.to_string())?;
        Self::from_corpus(corpus, session_path, config)
    }

    pub fn from_corpus(corpus: Corpus, session_path: Option<PathBuf>, config: &PipelineConfig) -> Result<Self, String> {
        let analysis = Analysis::new(corpus);
        let session = match &session_path {
            Some(p) if p.exists() => load_session(p, analysis.fingerprint()).map_err(|e| e.to_string())?,
            _ => AnalysisSession::new(analysis.fingerprint().clone(), config, now()),
        };
        let live = LiveSession::open(analysis, session).map_err(|e| e.to_string())?;
        Ok(Self::new(live, session_path))
    }

    pub fn token(&self) -> &str {
        &self.shared.token
    }

    pub fn staleness(&self) -> u64 {
        self.read().generation()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, LiveSession> {
        self.shared.live.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, LiveSession> {
        self.shared.live.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Derived outputs for the current state. The session lock is held only
    /// to take a snapshot; the computation runs outside it.
    async fn derived(&self) -> Result<(u64, Arc<Derived>, refspect_core::session::Snapshot), ApiError> {
        let snapshot = self.read().snapshot();
        let generation = snapshot.generation;
        if let Some((g, d)) = &*self.shared.memo.lock().unwrap_or_else(|e| e.into_inner()) {
            if *g == generation {
                return Ok((generation, d.clone(), snapshot));
            }
        }
        let snap = snapshot.clone();
        let derived = tokio::task::spawn_blocking(move || snap.derive())
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
        let derived = Arc::new(derived);
        let mut memo = self.shared.memo.lock().unwrap_or_else(|e| e.into_inner());
        if memo.as_ref().is_none_or(|(g, _)| *g < generation) {
            *memo = Some((generation, derived.clone()));
        }
        Ok((generation, derived, snapshot))
    }

    /// Runs `f` under the writer lock after checking the client's counter.
    fn mutate<T>(&self, headers: &HeaderMap, f: impl FnOnce(&mut LiveSession) -> Result<T, ApiError>) -> Result<(u64, T), ApiError> {
        if let Some(token) = headers.get(TOKEN_HEADER) {
            if token.as_bytes() != self.shared.token.as_bytes() {
                return Err(ApiError::new(StatusCode::FORBIDDEN, "wrong_session", "session token does not match this service"));
            }
        }
        let mut live = self.write();
        if let Some(seen) = headers.get(STALENESS_HEADER) {
            let seen: u64 = seen
                .to_str()
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ApiError::bad_request("x-staleness must be an unsigned integer"))?;
            if seen != live.generation() {
                return Err(ApiError::stale(seen, live.generation()));
            }
        }
        let out = f(&mut live)?;
        Ok((live.generation(), out))
    }
}

fn with_staleness(staleness: u64, body: impl IntoResponse) -> Response {
    let mut response = body.into_response();
    response.headers_mut().insert(STALENESS_HEADER, HeaderValue::from(staleness));
    response
}

/// Adds the current counter to responses that do not carry one already
/// (errors, mostly).
async fn stamp(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let mut response = next.run(request).await;
    if !response.headers().contains_key(STALENESS_HEADER) {
        let counter = state.staleness();
        response.headers_mut().insert(STALENESS_HEADER, HeaderValue::from(counter));
    }
    response
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", get(get_session))
        .route("/session/save", post(save))
        .route("/spectrum", get(get_spectrum))
        .route("/peaks", get(get_peaks))
        .route("/years/{rpy}/references", get(get_year_references))
        .route("/clusters/merge", post(merge))
        .route("/clusters/{id}", get(get_cluster))
        .route("/clusters/{id}/split", post(split))
        .route("/clusters/{id}/year", post(correct_year))
        .route("/markers", put(put_markers).delete(delete_markers))
        .route("/export/spectrum.csv", get(export_spectrum))
        .route("/export/clusters.csv", get(export_clusters))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), stamp))
        .with_state(state)
}

pub struct ServeConfig {
    pub bind: SocketAddr,
    pub corpus_path: PathBuf,
    pub session_path: Option<PathBuf>,
    pub pipeline: PipelineConfig,
}

/// Loads the corpus and serves until the process is interrupted.
pub async fn serve(config: ServeConfig) -> Result<(), String> {
    let state = AppState::open(&config.corpus_path, config.session_path, &config.pipeline)?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| format!("cannot bind {}: {e}", config.bind))?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    eprintln!("refspect: serving session on http://{addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub token: String,
    pub staleness: u64,
    pub corpus_fingerprint: Fingerprint,
    pub citing_records: usize,
    pub clusters: usize,
    pub ledger_entries: usize,
    pub filters: SessionFilters,
    pub markers: MarkerSelection,
    pub session_path: Option<PathBuf>,
}

async fn get_session(State(state): State<AppState>) -> Response {
    let live = state.read();
    let session = live.session();
    let info = SessionInfo {
        session_id: session.session_id.clone(),
        token: state.shared.token.clone(),
        staleness: live.generation(),
        corpus_fingerprint: session.corpus_fingerprint.clone(),
        citing_records: live.analysis().corpus().len(),
        clusters: live.table().len(),
        ledger_entries: session.ledger.len(),
        filters: session.filters.clone(),
        markers: session.markers.clone(),
        session_path: state.shared.session_path.clone(),
    };
    with_staleness(live.generation(), Json(info))
}

#[derive(Debug, Default, Deserialize)]
pub struct RangeQuery {
    pub from: Option<i32>,
    pub to: Option<i32>,
}

async fn spectrum_points(state: &AppState, q: &RangeQuery) -> Result<(u64, Vec<SpectrumPoint<i64>>), ApiError> {
    let (generation, derived, snapshot) = state.derived().await?;
    if q.from.is_none() && q.to.is_none() {
        return Ok((generation, derived.spectrum.points().to_vec()));
    }
    let current = derived.spectrum.year_range();
    let from = q.from.or(current.map(|r| r.start())).or(q.to);
    let to = q.to.or(current.map(|r| r.end())).or(q.from);
    let (Some(from), Some(to)) = (from, to) else {
        return Ok((generation, Vec::new()));
    };
    let range = YearRange::new(from, to).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let spectrum = spectrum_from_cluster_counts(&snapshot.table, &derived.counts, &derived.selection, range);
    Ok((generation, spectrum.points().to_vec()))
}

async fn get_spectrum(State(state): State<AppState>, Query(q): Query<RangeQuery>) -> Result<Response, ApiError> {
    let (generation, points) = spectrum_points(&state, &q).await?;
    Ok(with_staleness(generation, Json(points)))
}

#[derive(Debug, Default, Deserialize)]
pub struct PeakQuery {
    pub min_deviation: Option<i64>,
    pub max: Option<usize>,
    pub k: Option<usize>,
}

async fn get_peaks(State(state): State<AppState>, Query(q): Query<PeakQuery>) -> Result<Response, ApiError> {
    let (generation, derived, snapshot) = state.derived().await?;
    let mut params: PeakParams<i64> = snapshot.config.peaks;
    if let Some(min) = q.min_deviation {
        if min < 0 {
            return Err(ApiError::bad_request("min_deviation must be at least 0"));
        }
        params.min_deviation = min;
    }
    if q.max.is_some() {
        params.max_peaks = q.max;
    }
    let k = q.k.unwrap_or(snapshot.config.top_k);
    let peaks = detect_peaks(&derived.spectrum, &params);
    let reports: Vec<PeakReport> = peak_reports(&peaks, &snapshot.table, &derived.counts, &derived.selection, k);
    Ok(with_staleness(generation, Json(reports)))
}

/// A cluster as the explorer shows it in a year table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub cluster_id: ClusterId,
    pub rpy: Option<i32>,
    pub ncr: u64,
    pub year_corrected: bool,
    pub canonical_raw: String,
    pub author: String,
    pub source: Option<String>,
    pub volume: Option<u32>,
    pub page: Option<String>,
    pub doi: Option<String>,
    pub variants: Vec<String>,
}

fn cluster_entry(table: &refspect_core::reference::ClusterTable, position: usize, ncr: u64) -> ClusterEntry {
    let cluster = &table.clusters()[position];
    let canonical = table.canonical(cluster);
    ClusterEntry {
        cluster_id: cluster.id.clone(),
        rpy: cluster.effective_rpy,
        ncr,
        year_corrected: cluster.year_corrected,
        canonical_raw: canonical.raw_text.clone(),
        author: canonical.author_norm.clone(),
        source: canonical.source_norm.clone(),
        volume: canonical.volume,
        page: canonical.start_page.clone(),
        doi: canonical.doi_norm.clone(),
        variants: cluster
            .variants
            .iter()
            .map(|r| table.index().get(*r).raw_text.clone())
            .collect(),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct TopQuery {
    pub k: Option<usize>,
}

async fn get_year_references(
    State(state): State<AppState>,
    UrlPath(rpy): UrlPath<i32>,
    Query(q): Query<TopQuery>,
) -> Result<Response, ApiError> {
    let (generation, derived, snapshot) = state.derived().await?;
    let k = q.k.unwrap_or(snapshot.config.top_k);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let table = &snapshot.table;
    let entries: Vec<ClusterEntry> = top_references_for_year(table, &derived.counts, &derived.selection, rpy, k)
        .into_iter()
        .map(|r| cluster_entry(table, table.position(&r.cluster_id).expect("live id"), r.ncr))
        .collect();
    Ok(with_staleness(generation, Json(entries)))
}

async fn get_cluster(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let (generation, derived, snapshot) = state.derived().await?;
    let table = &snapshot.table;
    let live = table.resolve(&ClusterId::from(id.as_str()))?;
    let pos = table.position(&live).expect("resolved id is live");
    Ok(with_staleness(generation, Json(cluster_entry(table, pos, derived.counts[pos]))))
}

#[derive(Debug, Deserialize)]
pub struct MergeBody {
    pub ids: Vec<ClusterId>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MergeResponse {
    pub cluster_id: ClusterId,
    pub noop: bool,
}

async fn merge(State(state): State<AppState>, headers: HeaderMap, ApiJson(body): ApiJson<MergeBody>) -> Result<Response, ApiError> {
    let (generation, outcome) = state.mutate(&headers, |live| Ok(live.merge(&body.ids, now(), &body.note)?))?;
    Ok(with_staleness(
        generation,
        Json(MergeResponse {
            cluster_id: outcome.cluster_id,
            noop: outcome.noop,
        }),
    ))
}

#[derive(Debug, Deserialize)]
pub struct SplitBody {
    pub partition: Vec<Vec<String>>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitResponse {
    pub cluster_ids: Vec<ClusterId>,
}

async fn split(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    ApiJson(body): ApiJson<SplitBody>,
) -> Result<Response, ApiError> {
    let id = ClusterId::from(id.as_str());
    let (generation, ids) = state.mutate(&headers, |live| Ok(live.split(&id, &body.partition, now(), &body.note)?))?;
    Ok(with_staleness(generation, Json(SplitResponse { cluster_ids: ids })))
}

#[derive(Debug, Deserialize)]
pub struct YearBody {
    pub rpy: i32,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct YearResponse {
    pub cluster_id: ClusterId,
    pub rpy: i32,
}

async fn correct_year(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    ApiJson(body): ApiJson<YearBody>,
) -> Result<Response, ApiError> {
    let id = ClusterId::from(id.as_str());
    let (generation, live_id) = state.mutate(&headers, |live| {
        let resolved = live.table().resolve(&id)?;
        live.correct_year(&resolved, body.rpy, now(), &body.note)?;
        Ok(resolved)
    })?;
    Ok(with_staleness(
        generation,
        Json(YearResponse {
            cluster_id: live_id,
            rpy: body.rpy,
        }),
    ))
}

#[derive(Debug, Deserialize)]
pub struct MarkersBody {
    pub cluster_ids: Vec<ClusterId>,
    #[serde(default)]
    pub mode: MarkerMode,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MarkersResponse {
    pub markers: MarkerSelection,
    pub markers_without_citers: Vec<ClusterId>,
}

async fn put_markers(State(state): State<AppState>, headers: HeaderMap, ApiJson(body): ApiJson<MarkersBody>) -> Result<Response, ApiError> {
    if body.cluster_ids.is_empty() {
        return Err(ApiError::bad_request("cluster_ids must not be empty; use DELETE /markers to clear"));
    }
    let selection = MarkerSelection {
        cluster_ids: body.cluster_ids,
        mode: body.mode,
    };
    state.mutate(&headers, |live| Ok(live.set_markers(selection)?))?;
    let (generation, derived, snapshot) = state.derived().await?;
    Ok(with_staleness(
        generation,
        Json(MarkersResponse {
            markers: snapshot.markers.clone(),
            markers_without_citers: derived.markers_without_citers.clone(),
        }),
    ))
}

async fn delete_markers(State(state): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    let (generation, ()) = state.mutate(&headers, |live| {
        live.clear_markers();
        Ok(())
    })?;
    Ok(with_staleness(
        generation,
        Json(MarkersResponse {
            markers: MarkerSelection::default(),
            markers_without_citers: Vec::new(),
        }),
    ))
}

fn csv_response(generation: u64, body: Vec<u8>) -> Response {
    with_staleness(generation, ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body))
}

async fn export_spectrum(State(state): State<AppState>, Query(q): Query<RangeQuery>) -> Result<Response, ApiError> {
    let (generation, points) = spectrum_points(&state, &q).await?;
    let spectrum = match points.first() {
        Some(p) => refspect_core::Spectrum::from_counts(p.rpy, &points.iter().map(|p| p.ncr).collect::<Vec<_>>()),
        None => refspect_core::Spectrum::default(),
    };
    let mut buf = Vec::new();
    write_spectrum_csv(&spectrum, &mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(csv_response(generation, buf))
}

async fn export_clusters(State(state): State<AppState>) -> Result<Response, ApiError> {
    let (generation, derived, snapshot) = state.derived().await?;
    let rows = cluster_rows(&snapshot.table, &derived.counts, &derived.selection);
    let mut buf = Vec::new();
    write_clusters_csv(&rows, &mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(csv_response(generation, buf))
}

#[derive(Debug, Default, Deserialize)]
pub struct SaveBody {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SaveResponse {
    pub path: PathBuf,
    pub ledger_entries: usize,
}

async fn save(State(state): State<AppState>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let requested = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        serde_json::from_slice::<SaveBody>(&body)
            .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))?
            .path
    };
    let path = requested
        .or_else(|| state.shared.session_path.clone())
        .ok_or_else(|| ApiError::bad_request("no session path configured; pass {\"path\": ...}"))?;
    let (generation, session) = {
        let live = state.read();
        (live.generation(), live.session().clone())
    };
    save_session(&session, &path).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string()))?;
    Ok(with_staleness(
        generation,
        Json(SaveResponse {
            path,
            ledger_entries: session.ledger.len(),
        }),
    ))
}
