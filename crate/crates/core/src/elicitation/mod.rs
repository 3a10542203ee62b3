//! Adaptive bisection questionnaire.
//!
//! Each of the six events is probed `depth` times. Every probe offers an
//! objective lottery at the midpoint of the event's current bounds; choosing
//! the ambiguous bet reveals `m > q` and raises the lower bound, choosing the
//! lottery lowers the upper bound. Indifference is not offered, so `m = q`
//! lands on the lottery branch.
//!
//! The question that will be paid out is drawn from the session seed before
//! the first choice, and only a SHA-256 digest of it is exposed until the
//! session is finalized.

mod transcript;

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{Event, EventPartition, RespondentId, WaveId};

pub use transcript::{
    read_transcripts, write_transcripts, IntervalPanel, SessionTranscript, TranscriptError,
};

pub const DEFAULT_DEPTH: u32 = 5;
/// Dyadic bounds stay exact in `f64` well past this.
pub const MAX_DEPTH: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElicitationError {
    #[error("depth must be between 1 and {MAX_DEPTH} (got {0})")]
    InvalidDepth(u32),
    #[error("session is complete; no question is outstanding")]
    NoOutstandingQuestion,
    #[error("session incomplete: {remaining} question(s) unanswered")]
    Incomplete { remaining: usize },
    #[error("commitment digest does not match the revealed seed")]
    Integrity,
    #[error("invalid interval for {event}: [{lb}, {ub}]")]
    InvalidInterval { event: Event, lb: f64, ub: f64 },
}

/// Observed bounds on one event's matching probability in one wave.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingInterval {
    pub event: Event,
    pub wave: WaveId,
    pub lb: f64,
    pub ub: f64,
}

impl MatchingInterval {
    pub fn new(event: Event, wave: WaveId, lb: f64, ub: f64) -> Result<Self, ElicitationError> {
        let iv = Self { event, wave, lb, ub };
        iv.validate()?;
        Ok(iv)
    }

    pub fn validate(&self) -> Result<(), ElicitationError> {
        if !(0.0 <= self.lb && self.lb <= self.ub && self.ub <= 1.0) {
            return Err(ElicitationError::InvalidInterval {
                event: self.event,
                lb: self.lb,
                ub: self.ub,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.ub - self.lb
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lb + self.ub)
    }

    pub fn contains(&self, m: f64) -> bool {
        self.lb <= m && m <= self.ub
    }
}

/// One binary choice between the ambiguous bet and a lottery paying with probability `offered`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub session: String,
    pub ordinal: u32,
    pub event: Event,
    pub offered: f64,
    pub chose_bet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Question {
    Ask { ordinal: u32, event: Event, offered: f64 },
    Done,
}

/// How the pre-drawn payout question is settled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoutResolution {
    /// The lottery was chosen; it is played out with a uniform draw from the seed.
    Lottery { ordinal: u32, offered: f64, draw: f64, won: bool },
    /// The bet was chosen; payment waits on the realized outcome.
    AwaitEventOutcome { ordinal: u32, event: Event },
}

impl PayoutResolution {
    /// Settles a pending bet once the outcome value is known. Lottery
    /// resolutions return their own result.
    pub fn settle(&self, partition: &EventPartition, outcome: f64) -> bool {
        match *self {
            PayoutResolution::Lottery { won, .. } => won,
            PayoutResolution::AwaitEventOutcome { event, .. } => partition.contains(event, outcome),
        }
    }
}

/// Digest binding the seed and the payout question to a session before any choice.
pub fn commitment_digest(
    seed: u64,
    payout_question: usize,
    respondent: &RespondentId,
    wave: WaveId,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"ambihedge-commit-v1\0");
    hasher.update(seed.to_le_bytes());
    hasher.update((payout_question as u64).to_le_bytes());
    hasher.update(respondent.0.as_bytes());
    hasher.update(b"\0");
    hasher.update(wave.0.to_le_bytes());
    hex::encode(hasher.finalize())
}

/// Recomputes the payout question from a revealed seed and checks it against `digest`.
pub fn verify_commitment(
    digest: &str,
    seed: u64,
    depth: u32,
    respondent: &RespondentId,
    wave: WaveId,
) -> Result<usize, ElicitationError> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(ElicitationError::InvalidDepth(depth));
    }
    let (payout, _) = draw_plan(seed, depth);
    if commitment_digest(seed, payout, respondent, wave) == digest {
        Ok(payout)
    } else {
        Err(ElicitationError::Integrity)
    }
}

fn draw_plan(seed: u64, depth: u32) -> (usize, Vec<Event>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = Event::ALL.len() * depth as usize;
    // The payout draw comes first so nothing downstream can influence it.
    let payout = rng.random_range(0..total);
    let mut schedule: Vec<Event> =
        Event::ALL.iter().flat_map(|&e| std::iter::repeat_n(e, depth as usize)).collect();
    schedule.shuffle(&mut rng);
    (payout, schedule)
}

fn lottery_draw(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng.random::<f64>()
}

/// One respondent's questionnaire for one wave.
#[derive(Clone)]
pub struct ElicitationSession {
    id: String,
    respondent: RespondentId,
    wave: WaveId,
    partition: EventPartition,
    depth: u32,
    seed: u64,
    schedule: Vec<Event>,
    bounds: [(f64, f64); 6],
    payout_question: usize,
    digest: String,
    choices: Vec<ChoiceRecord>,
}

impl fmt::Debug for ElicitationSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ElicitationSession")
            .field("id", &self.id)
            .field("respondent", &self.respondent)
            .field("wave", &self.wave)
            .field("depth", &self.depth)
            .field("answered", &self.choices.len())
            .field("digest", &self.digest)
            .finish_non_exhaustive()
    }
}

/// Starts a session; a `None` seed is drawn from OS entropy.
pub fn start_session(
    partition: EventPartition,
    depth: u32,
    seed: Option<u64>,
    respondent: RespondentId,
    wave: WaveId,
) -> Result<ElicitationSession, ElicitationError> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(ElicitationError::InvalidDepth(depth));
    }
    let seed = seed.unwrap_or_else(rand::random);
    let (payout_question, schedule) = draw_plan(seed, depth);
    let digest = commitment_digest(seed, payout_question, &respondent, wave);
    let id = format!("{}-w{}-{}", respondent, wave, &digest[..12]);
    Ok(ElicitationSession {
        id,
        respondent,
        wave,
        partition,
        depth,
        seed,
        schedule,
        bounds: [(0.0, 1.0); 6],
        payout_question,
        digest,
        choices: Vec::new(),
    })
}

impl ElicitationSession {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn respondent(&self) -> &RespondentId {
        &self.respondent
    }

    pub fn wave(&self) -> WaveId {
        self.wave
    }

    pub fn partition(&self) -> &EventPartition {
        &self.partition
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn total_questions(&self) -> usize {
        self.schedule.len()
    }

    pub fn answered(&self) -> usize {
        self.choices.len()
    }

    pub fn remaining(&self) -> usize {
        self.total_questions() - self.answered()
    }

    pub fn is_complete(&self) -> bool {
        self.remaining() == 0
    }

    pub fn commitment_digest(&self) -> &str {
        &self.digest
    }

    /// Operator-side view of the pre-drawn payout question. Must never reach
    /// the respondent before completion.
    /// The committed seed. Reveal it to the respondent only after completion.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn payout_question(&self) -> usize {
        self.payout_question
    }

    pub fn choices(&self) -> &[ChoiceRecord] {
        &self.choices
    }

    /// Question order (one entry per question).
    pub fn schedule(&self) -> &[Event] {
        &self.schedule
    }

    pub fn bounds(&self, event: Event) -> (f64, f64) {
        self.bounds[event.index()]
    }

    pub fn next_question(&self) -> Question {
        match self.schedule.get(self.choices.len()) {
            None => Question::Done,
            Some(&event) => {
                let (lb, ub) = self.bounds[event.index()];
                Question::Ask {
                    ordinal: self.choices.len() as u32,
                    event,
                    offered: 0.5 * (lb + ub),
                }
            }
        }
    }

    pub fn record_choice(&mut self, chose_bet: bool) -> Result<&ChoiceRecord, ElicitationError> {
        let Question::Ask { ordinal, event, offered } = self.next_question() else {
            return Err(ElicitationError::NoOutstandingQuestion);
        };
        let slot = &mut self.bounds[event.index()];
        if chose_bet {
            slot.0 = offered;
        } else {
            slot.1 = offered;
        }
        self.choices.push(ChoiceRecord {
            session: self.id.clone(),
            ordinal,
            event,
            offered,
            chose_bet,
        });
        Ok(self.choices.last().expect("just pushed"))
    }

    /// Current intervals for all six events, complete or not.
    pub fn intervals(&self) -> Vec<MatchingInterval> {
        Event::ALL
            .iter()
            .map(|&e| {
                let (lb, ub) = self.bounds[e.index()];
                MatchingInterval { event: e, wave: self.wave, lb, ub }
            })
            .collect()
    }

    pub fn finalize(&self) -> Result<SessionOutcome, ElicitationError> {
        if !self.is_complete() {
            return Err(ElicitationError::Incomplete { remaining: self.remaining() });
        }
        let paid = &self.choices[self.payout_question];
        let payout = if paid.chose_bet {
            PayoutResolution::AwaitEventOutcome { ordinal: paid.ordinal, event: paid.event }
        } else {
            let draw = lottery_draw(self.seed);
            PayoutResolution::Lottery {
                ordinal: paid.ordinal,
                offered: paid.offered,
                draw,
                won: draw < paid.offered,
            }
        };
        verify_commitment(&self.digest, self.seed, self.depth, &self.respondent, self.wave)?;
        Ok(SessionOutcome {
            session: self.id.clone(),
            respondent: self.respondent.clone(),
            wave: self.wave,
            depth: self.depth,
            intervals: self.intervals(),
            seed: self.seed,
            digest: self.digest.clone(),
            payout_question: self.payout_question,
            payout,
        })
    }

    pub fn transcript(&self) -> Result<SessionTranscript, ElicitationError> {
        if !self.is_complete() {
            return Err(ElicitationError::Incomplete { remaining: self.remaining() });
        }
        Ok(SessionTranscript {
            session: self.id.clone(),
            respondent: self.respondent.clone(),
            wave: self.wave,
            choices: self.choices.clone(),
            intervals: self.intervals(),
        })
    }
}

/// Everything revealed once a session completes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub session: String,
    pub respondent: RespondentId,
    pub wave: WaveId,
    pub depth: u32,
    pub intervals: Vec<MatchingInterval>,
    pub seed: u64,
    pub digest: String,
    pub payout_question: usize,
    pub payout: PayoutResolution,
}

impl SessionOutcome {
    pub fn verify(&self) -> Result<(), ElicitationError> {
        let payout =
            verify_commitment(&self.digest, self.seed, self.depth, &self.respondent, self.wave)?;
        if payout != self.payout_question {
            return Err(ElicitationError::Integrity);
        }
        Ok(())
    }
}

/// Runs a full session against a responder callback `(event, offered) -> chose_bet`.
pub fn run_session(
    mut session: ElicitationSession,
    mut responder: impl FnMut(Event, f64) -> bool,
) -> ElicitationSession {
    while let Question::Ask { event, offered, .. } = session.next_question() {
        let choice = responder(event, offered);
        session.record_choice(choice).expect("question outstanding");
    }
    session
}
