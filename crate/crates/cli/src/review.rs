//! Review API: read-only views of a run state plus decision submission.
//!
//! Routes:
//! - `GET /api/state`: config and outcome counts
//! - `GET /api/sequences`: every sequence with its domain
//! - `GET /api/pending`: needs_review and unmatched outcomes
//! - `GET /api/pair/{snowy_id}`: polylines, per-threshold coverage and metadata
//! - `POST /api/pair/{snowy_id}/decision` with `{"clear_id": .., "note": ..}`
//!
//! A decision is written to the state file before it is acknowledged.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use weatherpair_core::manifest::{load_state, save_state, SequenceInfo};
use weatherpair_core::pipeline::{ensure_pairs_with, Corpus};
use weatherpair_core::{
    apply_decision, Candidate, Decision, Domain, Error, LateralThresholds, MatchOutcome,
    MatchStatus, PlanarPoint, RunConfig, RunState,
};

/// Polylines sent to the client are thinned to at most this many points.
pub const MAX_POLYLINE_POINTS: usize = 2000;

pub struct ReviewService {
    state_path: PathBuf,
    corpus: Corpus,
    state: Mutex<RunState>,
}

impl ReviewService {
    /// Loads the state file and the trajectories it refers to.
    pub fn open(state_path: &Path) -> weatherpair_core::Result<Self> {
        let state = load_state(state_path)?;
        let corpus = Corpus::load(
            Path::new(&state.data_dir),
            Some(state.origin),
            state.config.delta_d,
        )?;
        Ok(Self {
            state_path: state_path.to_path_buf(),
            corpus,
            state: Mutex::new(state),
        })
    }

    fn lock(&self) -> MutexGuard<'_, RunState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn snapshot(&self) -> RunState {
        self.lock().clone()
    }

    /// Records a decision. The returned flag is false when the same
    /// decision was already on file and nothing was written.
    pub fn decide(
        &self,
        snowy_id: &str,
        clear_id: &str,
        note: &str,
    ) -> weatherpair_core::Result<(MatchOutcome, bool)> {
        let mut state = self.lock();
        let pos = state
            .outcomes
            .iter()
            .position(|o| o.snowy_id == snowy_id)
            .ok_or_else(|| Error::UnknownSequence(snowy_id.to_string()))?;
        let current = &state.outcomes[pos];
        if current.decision.as_ref().is_some_and(|d| d.clear_id == clear_id) {
            return Ok((current.clone(), false));
        }
        let decided_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let next = apply_decision(current, clear_id, note, |c| state.is_clear(c), Some(decided_at))?;

        let mut staged = state.clone();
        staged.outcomes[pos] = next.clone();
        ensure_pairs_with(&mut staged, &self.corpus)?;
        save_state(&staged, &self.state_path)?;
        *state = staged;
        Ok((next, true))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

pub struct ApiError(StatusCode, &'static str, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match &e {
            Error::UnknownSequence(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::InvalidDecision(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            Error::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError(status, kind, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, "invalid", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.1,
            message: self.2,
        };
        (self.0, Json(body)).into_response()
    }
}

type Shared = Arc<ReviewService>;
type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Counts {
    pub snowy: usize,
    pub clear: usize,
    pub auto_matched: usize,
    pub needs_review: usize,
    pub unmatched: usize,
    pub human_matched: usize,
    pub pending: usize,
    pub pairs: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StateView {
    pub schema_version: u32,
    pub config: RunConfig,
    pub counts: Counts,
}

async fn get_state(State(svc): State<Shared>) -> ApiResult<StateView> {
    let s = svc.lock();
    let domain_count = |d| s.sequences.iter().filter(|q| q.domain == d).count();
    Ok(Json(StateView {
        schema_version: s.schema_version,
        config: s.config.clone(),
        counts: Counts {
            snowy: domain_count(Domain::Snowy),
            clear: domain_count(Domain::Clear),
            auto_matched: s.count_status(MatchStatus::AutoMatched),
            needs_review: s.count_status(MatchStatus::NeedsReview),
            unmatched: s.count_status(MatchStatus::Unmatched),
            human_matched: s.count_status(MatchStatus::HumanMatched),
            pending: s.pending().count(),
            pairs: s.pairs.len(),
        },
    }))
}

async fn get_sequences(State(svc): State<Shared>) -> ApiResult<Vec<SequenceInfo>> {
    Ok(Json(svc.lock().sequences.clone()))
}

async fn get_pending(State(svc): State<Shared>) -> ApiResult<Vec<MatchOutcome>> {
    Ok(Json(svc.lock().pending().cloned().collect()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrackView {
    pub sequence_id: String,
    pub frame_count: usize,
    pub road_users: Option<u32>,
    /// Planar `[x, y]` meters.
    pub polyline: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateView {
    #[serde(flatten)]
    pub track: TrackView,
    /// One fraction per threshold.
    pub coverage: Vec<f64>,
    pub d_max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairView {
    pub snowy_id: String,
    pub status: MatchStatus,
    pub tier: Option<u8>,
    pub decision: Option<Decision>,
    pub thresholds: LateralThresholds,
    pub snowy: TrackView,
    pub candidates: Vec<CandidateView>,
    /// Every clear sequence, for picking a match for unmatched outcomes.
    pub clear_ids: Vec<String>,
}

/// Evenly thins `points` to at most `max` points, keeping both ends.
pub fn downsample(points: &[PlanarPoint], max: usize) -> Vec<[f64; 2]> {
    let n = points.len();
    if n <= max || max < 2 {
        return points.iter().take(max).map(|p| [p.x, p.y]).collect();
    }
    (0..max)
        .map(|i| points[i * (n - 1) / (max - 1)])
        .map(|p| [p.x, p.y])
        .collect()
}

fn track(svc: &ReviewService, info: &SequenceInfo) -> TrackView {
    let points: Vec<PlanarPoint> = svc
        .corpus
        .trajectory(&info.sequence_id)
        .map(|t| t.positions().collect())
        .unwrap_or_default();
    TrackView {
        sequence_id: info.sequence_id.clone(),
        frame_count: info.frame_count,
        road_users: info.road_users,
        polyline: downsample(&points, MAX_POLYLINE_POINTS),
    }
}

async fn get_pair(State(svc): State<Shared>, UrlPath(snowy_id): UrlPath<String>) -> ApiResult<PairView> {
    let state = svc.snapshot();
    let outcome = state
        .outcome(&snowy_id)
        .ok_or_else(|| Error::UnknownSequence(snowy_id.clone()))?;
    let info = state
        .sequence(&snowy_id)
        .ok_or_else(|| Error::UnknownSequence(snowy_id.clone()))?;
    let candidate_view = |c: &Candidate| -> Result<CandidateView, Error> {
        let info = state
            .sequence(&c.clear_id)
            .ok_or_else(|| Error::UnknownSequence(c.clear_id.clone()))?;
        Ok(CandidateView {
            track: track(&svc, info),
            coverage: c.coverage.clone(),
            d_max: c.d_max,
        })
    };
    Ok(Json(PairView {
        snowy_id: snowy_id.clone(),
        status: outcome.status,
        tier: outcome.tier,
        decision: outcome.decision.clone(),
        thresholds: state.config.thresholds.clone(),
        snowy: track(&svc, info),
        candidates: outcome
            .candidates
            .iter()
            .map(candidate_view)
            .collect::<Result<_, _>>()?,
        clear_ids: state
            .sequences
            .iter()
            .filter(|s| s.domain == Domain::Clear)
            .map(|s| s.sequence_id.clone())
            .collect(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub clear_id: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub status: String,
    pub outcome: MatchOutcome,
    pub pending: usize,
}

async fn post_decision(
    State(svc): State<Shared>,
    UrlPath(snowy_id): UrlPath<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> ApiResult<DecisionResponse> {
    let Json(req) = body?;
    let task_svc = svc.clone();
    let (outcome, written) = tokio::task::spawn_blocking(move || {
        task_svc.decide(&snowy_id, &req.clear_id, &req.note)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(DecisionResponse {
        status: if written { "accepted" } else { "unchanged" }.to_string(),
        outcome,
        pending: svc.lock().pending().count(),
    }))
}

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/sequences", get(get_sequences))
        .route("/api/pending", get(get_pending))
        .route("/api/pair/{snowy_id}", get(get_pair))
        .route("/api/pair/{snowy_id}/decision", post(post_decision))
        .with_state(service)
}

/// Serves the API on `bind` until interrupted.
pub async fn serve(state_path: &Path, bind: &str) -> anyhow::Result<()> {
    let service = Arc::new(ReviewService::open(state_path)?);
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {bind}: {e}"))?;
    log::info!("review service on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
