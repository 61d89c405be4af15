//! HTTP annotation service. Annotators pull a work queue of segments, read
//! each segment's transcript, edit deltas and paste events, and submit
//! help-seeking and response-use modes per round. Labels are appended to an
//! `annotations.jsonl` journal in the output directory.
//!
//! There is no authentication: the annotator is whoever the `X-Annotator`
//! header (or the request body) says it is.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use reliance_core::analysis::Outcome;
use reliance_core::benchmark::{agreement, AgreementReport};
use reliance_core::label::similarity::code_blocks;
use reliance_core::label::{text_similarity, EngagementMode, LabelRecord, LabelSource, RuleConfig};
use reliance_core::model::store::{parse_jsonl, to_jsonl};
use reliance_core::model::{diff_snapshots, ChatMessage, EditDelta, Role, SessionRecord, SourceHint, Timestamp};
use reliance_core::pipeline::Pipeline;
use reliance_core::segment::InteractionSegment;
use reliance_core::{CoreError, Result};

pub const JOURNAL_FILE: &str = "annotations.jsonl";
pub const DEFAULT_PORT: u16 = 7340;
pub const ANNOTATOR_HEADER: &str = "x-annotator";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub corpus_dir: PathBuf,
    /// Holds `segments.jsonl` (reused or computed) and the journal.
    pub out: PathBuf,
    pub addr: SocketAddr,
    /// Built annotation UI; a placeholder page is served at `/` without it.
    pub static_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl ServerConfig {
    pub fn new(corpus_dir: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            corpus_dir: corpus_dir.into(),
            out: out.into(),
            addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            static_dir: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MessageView {
    pub index: usize,
    pub ts: Timestamp,
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EditView {
    pub ts: Timestamp,
    pub bulk_insert: bool,
    #[serde(flatten)]
    pub delta: EditDelta,
}

#[derive(Debug, Clone, Serialize)]
pub struct CopyView {
    pub ts: Timestamp,
    pub pasted_text: String,
    pub source_hint: SourceHint,
    /// The paste is (near-)verbatim code from an assistant message in the
    /// segment.
    pub matches_response: bool,
}

/// Everything an annotator sees for one segment, minus labels.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentView {
    pub segment_id: String,
    pub session_id: String,
    pub kc_id: String,
    pub ordinal: usize,
    pub messages: Vec<MessageView>,
    pub edits: Vec<EditView>,
    pub copies: Vec<CopyView>,
}

impl SegmentView {
    fn build(segment: &InteractionSegment, session: &SessionRecord, verbatim: f64) -> Self {
        let messages: Vec<&ChatMessage> = session.messages[segment.first_index..=segment.last_index].iter().collect();
        let edits = segment
            .edits
            .clone()
            .map(|i| {
                let prev = if i == 0 { "" } else { session.edits[i - 1].snapshot.as_str() };
                let edit = &session.edits[i];
                EditView { ts: edit.timestamp, bulk_insert: edit.bulk_insert, delta: diff_snapshots(prev, &edit.snapshot) }
            })
            .collect();
        let blocks: Vec<String> =
            messages.iter().filter(|m| m.role == Role::Assistant).flat_map(|m| code_blocks(&m.text)).collect();
        let copies = session.copies[segment.copies.clone()]
            .iter()
            .map(|c| CopyView {
                ts: c.timestamp,
                pasted_text: c.pasted_text.clone(),
                source_hint: c.source_hint,
                matches_response: blocks.iter().any(|b| text_similarity(&c.pasted_text, b) >= verbatim),
            })
            .collect();
        Self {
            segment_id: segment.segment_id.clone(),
            session_id: segment.session_id.clone(),
            kc_id: segment.kc_id.clone(),
            ordinal: segment.ordinal,
            messages: messages
                .into_iter()
                .map(|m| MessageView { index: m.index, ts: m.timestamp, role: m.role, text: m.text.clone() })
                .collect(),
            edits,
            copies,
        }
    }
}

/// Segments in canonical order, built once at startup.
struct Catalog {
    views: Vec<SegmentView>,
    index: HashMap<String, usize>,
    kcs: BTreeSet<String>,
}

struct Shared {
    catalog: Catalog,
    journal: PathBuf,
    /// Every record so far, in append order. Readers load it without locking.
    records: ArcSwap<Vec<LabelRecord>>,
    writer: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// Loads the corpus, segments it (reusing `segments.jsonl` in `out` when
    /// present) and replays an existing journal.
    pub fn open(corpus_dir: &Path, out: &Path, jobs: usize) -> Result<Self> {
        let rules = RuleConfig::default();
        let pipeline = Pipeline::open(corpus_dir, out, jobs, rules.clone())?;
        let segments = pipeline.segments()?;
        let views: Vec<SegmentView> = segments
            .iter()
            .map(|s| {
                let session = pipeline.corpus.session(&s.session_id).expect("segments reference loaded sessions");
                SegmentView::build(s, session, rules.verbatim_threshold)
            })
            .collect();
        let index = views.iter().enumerate().map(|(i, v)| (v.segment_id.clone(), i)).collect();
        let kcs = pipeline.corpus.kcs.iter().map(|k| k.kc_id.clone()).collect();
        let catalog = Catalog { views, index, kcs };

        let journal = out.join(JOURNAL_FILE);
        let records = match fs::read_to_string(&journal) {
            Ok(text) => parse_jsonl::<LabelRecord>(JOURNAL_FILE, &text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(CoreError::io(&journal, e)),
        };
        let mut seen = BTreeSet::new();
        for r in &records {
            let (Some(a), Some(round)) = (&r.annotator_id, r.round) else {
                return Err(CoreError::invariant(format!("journal record {}", r.segment_id), "missing annotator or round"));
            };
            if !catalog.index.contains_key(&r.segment_id) {
                return Err(CoreError::UnknownSegment(r.segment_id.clone()));
            }
            if !seen.insert((r.segment_id.clone(), a.clone(), round)) {
                return Err(CoreError::Duplicate(format!("{} by {a} in round {round}", r.segment_id)));
            }
        }
        Ok(Self(Arc::new(Shared { catalog, journal, records: ArcSwap::from_pointee(records), writer: Mutex::new(()) })))
    }

    pub fn records(&self) -> Arc<Vec<LabelRecord>> {
        self.0.records.load_full()
    }

    pub fn segment_ids(&self) -> Vec<String> {
        self.0.catalog.views.iter().map(|v| v.segment_id.clone()).collect()
    }

    /// Appends one record. The journal is rewritten to a temporary file,
    /// synced and renamed over the old one, so a crash leaves either the old
    /// or the new journal, never a torn line.
    fn append(&self, record: LabelRecord) -> std::result::Result<LabelRecord, ApiError> {
        let _guard = self.0.writer.lock().unwrap_or_else(|p| p.into_inner());
        let current = self.0.records.load_full();
        let key = |r: &LabelRecord| (r.segment_id.clone(), r.annotator_id.clone(), r.round);
        if current.iter().any(|r| key(r) == key(&record)) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!(
                    "{} already labeled by {} in round {}",
                    record.segment_id,
                    record.annotator_id.as_deref().unwrap_or_default(),
                    record.round.unwrap_or_default()
                ),
            ));
        }
        let mut next = Vec::with_capacity(current.len() + 1);
        next.extend(current.iter().cloned());
        next.push(record.clone());
        write_atomically(&self.0.journal, &to_jsonl(&next).map_err(ApiError::internal)?).map_err(ApiError::internal)?;
        self.0.records.store(Arc::new(next));
        Ok(record)
    }

    fn view(&self, id: &str) -> std::result::Result<&SegmentView, ApiError> {
        self.0
            .catalog
            .index
            .get(id)
            .map(|&i| &self.0.catalog.views[i])
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown segment `{id}`")))
    }
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = File::create(&tmp).map_err(|e| CoreError::io(&tmp, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CoreError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))?;
    if let Some(dir) = path.parent().and_then(|d| File::open(d).ok()) {
        let _ = dir.sync_all();
    }
    Ok(())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        log::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Segments that annotators labeled differently in `round`.
fn disagreements_in(records: &[LabelRecord], round: u32) -> BTreeSet<String> {
    type Modes = (Option<EngagementMode>, Option<EngagementMode>);
    let mut by_segment: BTreeMap<&str, Vec<Modes>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.round == Some(round)) {
        by_segment.entry(&r.segment_id).or_default().push((r.help_seeking, r.response_use));
    }
    by_segment
        .into_iter()
        .filter(|(_, labels)| labels.iter().any(|l| *l != labels[0]))
        .map(|(id, _)| id.to_string())
        .collect()
}

fn annotator_from(headers: &HeaderMap, fallback: Option<String>) -> ApiResult<String> {
    let header = headers.get(ANNOTATOR_HEADER).map(|v| v.to_str().map(str::trim)).transpose();
    let header = header.map_err(|_| ApiError::bad_request("X-Annotator header is not valid UTF-8"))?;
    let id = header.map(str::to_string).or(fallback.map(|s| s.trim().to_string())).unwrap_or_default();
    if id.is_empty() {
        return Err(ApiError::bad_request("annotator id required (X-Annotator header or annotator_id)"));
    }
    Ok(id)
}

fn check_round(round: u32) -> ApiResult<u32> {
    if round == 0 {
        return Err(ApiError::bad_request("round must be at least 1"));
    }
    Ok(round)
}

#[derive(Debug, Deserialize)]
struct QueueQuery {
    round: Option<u32>,
    annotator: Option<String>,
}

#[derive(Debug, Serialize)]
struct QueueItem<'a> {
    segment_id: &'a str,
    session_id: &'a str,
    kc_id: &'a str,
    /// Annotators disagreed on this segment in the previous round.
    disagreement: bool,
}

/// Segments the annotator has not labeled in this round. From round 2 on,
/// segments with a disagreement in the previous round come first.
async fn queue(State(state): State<AppState>, headers: HeaderMap, Query(q): Query<QueueQuery>) -> ApiResult<Response> {
    let round = check_round(q.round.unwrap_or(1))?;
    let annotator = annotator_from(&headers, q.annotator)?;
    let records = state.records();
    let done: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.round == Some(round) && r.annotator_id.as_deref() == Some(annotator.as_str()))
        .map(|r| r.segment_id.as_str())
        .collect();
    let previous = if round > 1 { disagreements_in(&records, round - 1) } else { BTreeSet::new() };
    let mut items: Vec<QueueItem> = state
        .0
        .catalog
        .views
        .iter()
        .filter(|v| !done.contains(v.segment_id.as_str()))
        .map(|v| QueueItem {
            segment_id: &v.segment_id,
            session_id: &v.session_id,
            kc_id: &v.kc_id,
            disagreement: previous.contains(&v.segment_id),
        })
        .collect();
    items.sort_by_key(|i| !i.disagreement);
    Ok(Json(json!({
        "round": round,
        "annotator": annotator,
        "total": state.0.catalog.views.len(),
        "remaining": items.len(),
        "segments": items,
    }))
    .into_response())
}

#[derive(Debug, Deserialize)]
struct SegmentQuery {
    annotator: Option<String>,
    #[serde(default)]
    adjudication: bool,
}

/// One segment. Without `adjudication=true` only the requesting annotator's
/// own labels are included, so nobody sees another annotator's labels
/// before adjudication.
async fn segment(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Query(q): Query<SegmentQuery>,
) -> ApiResult<Response> {
    let view = state.view(&id)?;
    let records = state.records();
    let annotator = annotator_from(&headers, q.annotator).ok();
    let labels: Vec<&LabelRecord> = records
        .iter()
        .filter(|r| r.segment_id == id)
        .filter(|r| q.adjudication || (annotator.is_some() && r.annotator_id == annotator))
        .collect();
    let mut body = serde_json::to_value(view).map_err(ApiError::internal)?;
    body["labels"] = serde_json::to_value(labels).map_err(ApiError::internal)?;
    body["adjudication"] = json!(q.adjudication);
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    #[serde(default)]
    annotator_id: Option<String>,
    round: u32,
    help_seeking: String,
    response_use: String,
    #[serde(default)]
    kc_id: Option<String>,
    #[serde(default)]
    timestamp: Option<Timestamp>,
}

fn now_ms() -> Timestamp {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as Timestamp).unwrap_or_default()
}

async fn post_label(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    state.view(&id)?;
    let body: LabelBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid label body: {e}")))?;
    let annotator = annotator_from(&headers, body.annotator_id)?;
    let round = check_round(body.round)?;
    let mode = |s: &str| s.parse::<EngagementMode>().map_err(|e| ApiError::bad_request(e.to_string()));
    let help_seeking = mode(&body.help_seeking)?;
    let response_use = mode(&body.response_use)?;
    if let Some(kc) = &body.kc_id {
        if !state.0.catalog.kcs.contains(kc) {
            return Err(ApiError::bad_request(format!("unknown knowledge component `{kc}`")));
        }
    }
    let record = LabelRecord {
        segment_id: id,
        help_seeking: Some(help_seeking),
        response_use: Some(response_use),
        source: LabelSource::Human,
        evidence: Vec::new(),
        raw_response: None,
        annotator_id: Some(annotator),
        round: Some(round),
        kc_id: body.kc_id,
        timestamp: Some(body.timestamp.unwrap_or_else(now_ms)),
    };
    let writer = state.clone();
    let stored = tokio::task::spawn_blocking(move || writer.append(record)).await.map_err(ApiError::internal)??;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

#[derive(Debug, Deserialize)]
struct AgreementQuery {
    round: Option<u32>,
    #[serde(default)]
    weighted: bool,
}

#[derive(Debug, Serialize)]
struct PairAgreement {
    annotator_a: String,
    annotator_b: String,
    report: Outcome<AgreementReport>,
}

/// Pairwise agreement among the annotators of one round.
async fn agreement_report(State(state): State<AppState>, Query(q): Query<AgreementQuery>) -> ApiResult<Response> {
    let round = check_round(q.round.unwrap_or(1))?;
    let records = state.records();
    let mut by_annotator: BTreeMap<&str, Vec<LabelRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.round == Some(round)) {
        if let Some(a) = &r.annotator_id {
            by_annotator.entry(a).or_default().push(r.clone());
        }
    }
    let names: Vec<&str> = by_annotator.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            pairs.push(PairAgreement {
                annotator_a: a.to_string(),
                annotator_b: b.to_string(),
                report: agreement(&by_annotator[a], &by_annotator[b], q.weighted).into(),
            });
        }
    }
    let disagreements: Vec<String> = disagreements_in(&records, round).into_iter().collect();
    Ok(Json(json!({
        "round": round,
        "annotators": names,
        "pairs": pairs,
        "disagreements": disagreements,
    }))
    .into_response())
}

/// The journal as JSON lines.
async fn export(State(state): State<AppState>) -> ApiResult<Response> {
    let text = to_jsonl(state.records().iter()).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn placeholder() -> Html<&'static str> {
    Html(
        "<!doctype html><title>annotation server</title>\
         <p>No UI assets configured. The JSON API is under <code>/api</code>.</p>",
    )
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/segments", get(queue))
        .route("/api/segments/{id}", get(segment))
        .route("/api/segments/{id}/labels", axum::routing::post(post_label))
        .route("/api/agreement", get(agreement_report))
        .route("/api/export", get(export))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

/// Runs the server until Ctrl-C.
pub async fn serve(config: ServerConfig) -> Result<()> {
    let state = AppState::open(&config.corpus_dir, &config.out, config.jobs)?;
    let app = router(state, config.static_dir.as_deref());
    let listener =
        tokio::net::TcpListener::bind(config.addr).await.map_err(|e| CoreError::io(config.addr.to_string(), e))?;
    log::info!("annotation server listening on http://{}", config.addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CoreError::io(config.addr.to_string(), e))
}
