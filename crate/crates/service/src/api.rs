use std::sync::Arc;

use ambihedge::domain::{moment_indices, Event, EventMap, EventPartition, RespondentId, WaveId};
use ambihedge::elicitation::{
    verify_commitment, MatchingInterval, PayoutResolution, Question, DEFAULT_DEPTH, MAX_DEPTH,
};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::store::SessionStore;

/// Cosmetic; the service pays nothing.
pub const STAKE_TEXT: &str = "20 euros";
const MAX_RESPONDENT_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub lower: f64,
    pub upper: f64,
}

impl From<EventPartition> for PartitionConfig {
    fn from(p: EventPartition) -> Self {
        let [lower, upper] = p.cutoffs();
        Self { lower, upper }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub respondent: String,
    #[serde(default)]
    pub wave: Option<u32>,
    #[serde(default)]
    pub depth: Option<u32>,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
}

impl CreateRequest {
    pub fn new(respondent: &str) -> Self {
        Self { respondent: respondent.into(), wave: None, depth: None, partition: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session: String,
    pub respondent: RespondentId,
    pub wave: WaveId,
    pub depth: u32,
    pub digest: String,
    pub total_questions: usize,
    pub remaining: usize,
    pub stake: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextResponse {
    Ask {
        session: String,
        ordinal: u32,
        event: Event,
        description: String,
        offered: f64,
        offered_percent: f64,
        stake: String,
        progress: Progress,
    },
    Done {
        session: String,
        progress: Progress,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceRequest {
    /// The question being answered, as served by `next`.
    pub ordinal: u32,
    pub chose_bet: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResponse {
    pub session: String,
    pub ordinal: u32,
    pub answered: usize,
    pub remaining: usize,
    pub complete: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimates {
    pub aversion: f64,
    pub sensitivity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultResponse {
    pub session: String,
    pub respondent: RespondentId,
    pub wave: WaveId,
    pub depth: u32,
    pub partition: PartitionConfig,
    pub intervals: Vec<MatchingInterval>,
    pub seed: u64,
    pub digest: String,
    pub payout_question: usize,
    pub payout: PayoutResolution,
    /// Moment indices of the interval midpoints.
    pub indices: IndexEstimates,
    pub stake: String,
}

impl ResultResponse {
    /// Checks the revealed seed against the digest shown at creation.
    pub fn verify(&self) -> Result<(), ServiceError> {
        match verify_commitment(&self.digest, self.seed, self.depth, &self.respondent, self.wave) {
            Ok(q) if q == self.payout_question => Ok(()),
            _ => Err(ServiceError::Integrity),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub sessions: usize,
}

fn validate_respondent(tag: &str) -> Result<RespondentId, ServiceError> {
    let ok = !tag.is_empty()
        && tag.len() <= MAX_RESPONDENT_LEN
        && tag.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(RespondentId(tag.into()))
    } else {
        Err(ServiceError::InvalidRequest(format!(
            "respondent must be 1 to {MAX_RESPONDENT_LEN} characters from [A-Za-z0-9._-]"
        )))
    }
}

fn progress(answered: usize, total: usize) -> Progress {
    Progress { answered, total, fraction: answered as f64 / total as f64 }
}

impl SessionStore {
    pub async fn create_session(&self, req: CreateRequest) -> Result<CreateResponse, ServiceError> {
        let respondent = validate_respondent(&req.respondent)?;
        let depth = req.depth.unwrap_or(DEFAULT_DEPTH);
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(ServiceError::InvalidRequest(format!("depth must be between 1 and {MAX_DEPTH}")));
        }
        let wave = WaveId(req.wave.unwrap_or(1));
        let partition = match req.partition {
            None => EventPartition::default(),
            Some(p) => EventPartition::new(p.lower, p.upper).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?,
        };
        let s = self.create(partition, depth, respondent, wave).await?;
        Ok(CreateResponse {
            session: s.id().into(),
            respondent: s.respondent().clone(),
            wave: s.wave(),
            depth: s.depth(),
            digest: s.commitment_digest().into(),
            total_questions: s.total_questions(),
            remaining: s.remaining(),
            stake: STAKE_TEXT.into(),
        })
    }

    pub async fn next(&self, id: &str) -> Result<NextResponse, ServiceError> {
        let cell = self.cell(id).ok_or_else(|| ServiceError::NotFound(id.into()))?;
        let s = cell.lock().await;
        let progress = progress(s.answered(), s.total_questions());
        Ok(match s.next_question() {
            Question::Ask { ordinal, event, offered } => NextResponse::Ask {
                session: s.id().into(),
                ordinal,
                event,
                description: s.partition().describe(event),
                offered,
                offered_percent: 100.0 * offered,
                stake: STAKE_TEXT.into(),
                progress,
            },
            Question::Done => NextResponse::Done { session: s.id().into(), progress },
        })
    }

    pub async fn choose(&self, id: &str, req: ChoiceRequest) -> Result<ChoiceResponse, ServiceError> {
        let cell = self.cell(id).ok_or_else(|| ServiceError::NotFound(id.into()))?;
        // Held across the log append so choices on one session never interleave.
        let mut s = cell.lock().await;
        let expected = match s.next_question() {
            Question::Done => return Err(ServiceError::SessionComplete),
            Question::Ask { ordinal, .. } => ordinal,
        };
        if req.ordinal != expected {
            return Err(ServiceError::StaleQuestion { expected, got: req.ordinal });
        }
        self.log_choice(id, expected, req.chose_bet).await.map_err(ServiceError::storage)?;
        s.record_choice(req.chose_bet).expect("question outstanding");
        Ok(ChoiceResponse {
            session: s.id().into(),
            ordinal: expected,
            answered: s.answered(),
            remaining: s.remaining(),
            complete: s.is_complete(),
        })
    }

    pub async fn result(&self, id: &str) -> Result<ResultResponse, ServiceError> {
        let cell = self.cell(id).ok_or_else(|| ServiceError::NotFound(id.into()))?;
        let s = cell.lock().await;
        let outcome = s.finalize().map_err(|e| match e {
            ambihedge::elicitation::ElicitationError::Incomplete { remaining } => {
                ServiceError::Incomplete { remaining }
            }
            _ => ServiceError::Integrity,
        })?;
        let mids: EventMap<f64> = outcome.intervals.iter().map(|iv| (iv.event, iv.midpoint())).collect();
        let idx = moment_indices(&mids).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
        Ok(ResultResponse {
            session: outcome.session,
            respondent: outcome.respondent,
            wave: outcome.wave,
            depth: outcome.depth,
            partition: (*s.partition()).into(),
            intervals: outcome.intervals,
            seed: outcome.seed,
            digest: outcome.digest,
            payout_question: outcome.payout_question,
            payout: outcome.payout,
            indices: IndexEstimates { aversion: idx.aversion, sensitivity: idx.sensitivity },
            stake: STAKE_TEXT.into(),
        })
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::InvalidRequest(format!("malformed body: {e}")))
}

type Shared = State<Arc<SessionStore>>;

async fn create_handler(State(store): Shared, body: Bytes) -> Result<(StatusCode, Json<CreateResponse>), ServiceError> {
    let req = parse(&body)?;
    Ok((StatusCode::CREATED, Json(store.create_session(req).await?)))
}

async fn next_handler(State(store): Shared, Path(id): Path<String>) -> Result<Json<NextResponse>, ServiceError> {
    Ok(Json(store.next(&id).await?))
}

async fn choice_handler(
    State(store): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ChoiceResponse>, ServiceError> {
    // Unknown sessions are reported before body problems.
    if store.cell(&id).is_none() {
        return Err(ServiceError::NotFound(id));
    }
    let req = parse(&body)?;
    Ok(Json(store.choose(&id, req).await?))
}

async fn result_handler(State(store): Shared, Path(id): Path<String>) -> Result<Json<ResultResponse>, ServiceError> {
    Ok(Json(store.result(&id).await?))
}

async fn health_handler(State(store): Shared) -> Json<Health> {
    Json(Health { status: "ok".into(), sessions: store.len() })
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_handler))
        .route("/sessions/{id}/next", get(next_handler))
        .route("/sessions/{id}/choices", post(choice_handler))
        .route("/sessions/{id}/result", get(result_handler))
        .route("/healthz", get(health_handler))
        .fallback(|| async { ServiceError::NotFound("route".into()) })
        .with_state(store)
}
