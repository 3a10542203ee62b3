use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, RwLock};
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use ambihedge::domain::{EventPartition, RespondentId, WaveId};
use ambihedge::elicitation::{start_session, ElicitationSession, Question};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{oneshot, Mutex};

use crate::error::ServiceError;

/// One line of the session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEvent {
    Created {
        session: String,
        respondent: RespondentId,
        wave: WaveId,
        depth: u32,
        partition: EventPartition,
        seed: u64,
        digest: String,
        payout_question: usize,
        /// Wall-clock milliseconds since the Unix epoch; metadata only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at_ms: Option<u64>,
    },
    Choice {
        session: String,
        ordinal: u32,
        chose_bet: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at_ms: Option<u64>,
    },
}

fn now_ms() -> Option<u64> {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).ok()?;
    u64::try_from(d.as_millis()).ok()
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("log i/o: {0}")]
    Io(#[from] io::Error),
}

/// Rebuilds every session from the log. Pure: the same events always give the same sessions.
pub fn replay<I>(events: I) -> Result<BTreeMap<String, ElicitationSession>, StoreError>
where
    I: IntoIterator<Item = LogEvent>,
{
    let mut sessions = BTreeMap::new();
    for (i, event) in events.into_iter().enumerate() {
        let line = i + 1;
        let corrupt = |message: String| StoreError::Corrupt { line, message };
        match event {
            LogEvent::Created { session, respondent, wave, depth, partition, seed, digest, payout_question, .. } => {
                let s = start_session(partition, depth, Some(seed), respondent, wave)
                    .map_err(|e| corrupt(e.to_string()))?;
                if s.id() != session || s.commitment_digest() != digest || s.payout_question() != payout_question {
                    return Err(corrupt(format!("creation of {session} does not match its seed")));
                }
                if sessions.insert(session.clone(), s).is_some() {
                    return Err(corrupt(format!("session {session} created twice")));
                }
            }
            LogEvent::Choice { session, ordinal, chose_bet, .. } => {
                let s = sessions.get_mut(&session).ok_or_else(|| corrupt(format!("unknown session {session}")))?;
                match s.next_question() {
                    Question::Ask { ordinal: expected, .. } if expected == ordinal => {}
                    _ => return Err(corrupt(format!("out-of-order choice {ordinal} for {session}"))),
                }
                s.record_choice(chose_bet).map_err(|e| corrupt(e.to_string()))?;
            }
        }
    }
    Ok(sessions)
}

/// Parses a JSON-lines log. Blank lines are skipped.
pub fn read_log(reader: impl BufRead) -> Result<Vec<LogEvent>, StoreError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| StoreError::Corrupt { line: i + 1, message: e.to_string() })?;
        out.push(event);
    }
    Ok(out)
}

type Append = (String, oneshot::Sender<io::Result<()>>);

/// Single writer thread; appends are queued and acknowledged once flushed.
struct LogWriter {
    tx: mpsc::Sender<Append>,
}

impl LogWriter {
    fn spawn(mut out: Box<dyn Write + Send>) -> Self {
        let (tx, rx) = mpsc::channel::<Append>();
        thread::spawn(move || {
            for (line, ack) in rx {
                let res = out.write_all(line.as_bytes()).and_then(|_| out.flush());
                let _ = ack.send(res);
            }
        });
        Self { tx }
    }

    async fn append(&self, event: &LogEvent) -> io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
        line.push('\n');
        let (ack, done) = oneshot::channel();
        self.tx.send((line, ack)).map_err(|_| io::Error::other("log writer stopped"))?;
        done.await.map_err(|_| io::Error::other("log writer stopped"))?
    }
}

/// Where session seeds come from. Clients never choose them.
#[derive(Debug)]
pub enum SeedSource {
    Entropy,
    /// `base + n` for the n-th draw; for reproducible test runs.
    Deterministic { base: u64, counter: AtomicU64 },
}

impl SeedSource {
    pub fn deterministic(base: u64) -> Self {
        SeedSource::Deterministic { base, counter: AtomicU64::new(0) }
    }

    fn draw(&self) -> Option<u64> {
        match self {
            SeedSource::Entropy => None,
            SeedSource::Deterministic { base, counter } => {
                Some(base.wrapping_add(counter.fetch_add(1, Ordering::Relaxed)))
            }
        }
    }
}

pub(crate) type SessionCell = Arc<Mutex<ElicitationSession>>;

/// Sessions indexed in memory, every change appended to the log first.
pub struct SessionStore {
    sessions: RwLock<HashMap<String, SessionCell>>,
    log: LogWriter,
    seeds: SeedSource,
    creating: Mutex<()>,
}

impl SessionStore {
    /// A store whose log is discarded.
    pub fn in_memory(seeds: SeedSource) -> Self {
        Self::with_sessions(BTreeMap::new(), Box::new(io::sink()), seeds)
    }

    /// Replays the log at `path` (if any) and keeps appending to it.
    pub fn open(path: &Path, seeds: SeedSource) -> Result<Self, StoreError> {
        let sessions = match File::open(path) {
            Ok(f) => replay(read_log(BufReader::new(f))?)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::with_sessions(sessions, Box::new(file), seeds))
    }

    fn with_sessions(
        sessions: BTreeMap<String, ElicitationSession>,
        out: Box<dyn Write + Send>,
        seeds: SeedSource,
    ) -> Self {
        let sessions = sessions.into_iter().map(|(k, s)| (k, Arc::new(Mutex::new(s)))).collect();
        Self {
            sessions: RwLock::new(sessions),
            log: LogWriter::spawn(out),
            seeds,
            creating: Mutex::new(()),
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn cell(&self, id: &str) -> Option<SessionCell> {
        self.sessions.read().expect("index lock").get(id).cloned()
    }

    /// A copy of the current state of one session.
    pub async fn snapshot(&self, id: &str) -> Option<ElicitationSession> {
        let cell = self.cell(id)?;
        let s = cell.lock().await;
        Some(s.clone())
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("index lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Starts and logs a session. Seeds that collide with an existing id are redrawn.
    pub(crate) async fn create(
        &self,
        partition: EventPartition,
        depth: u32,
        respondent: RespondentId,
        wave: WaveId,
    ) -> Result<ElicitationSession, ServiceError> {
        let _guard = self.creating.lock().await;
        let session = loop {
            let s = start_session(partition, depth, self.seeds.draw(), respondent.clone(), wave)
                .map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
            if self.cell(s.id()).is_none() {
                break s;
            }
        };
        self.log
            .append(&LogEvent::Created {
                session: session.id().to_string(),
                respondent,
                wave,
                depth,
                partition,
                seed: session.seed(),
                digest: session.commitment_digest().to_string(),
                payout_question: session.payout_question(),
                at_ms: now_ms(),
            })
            .await
            .map_err(ServiceError::storage)?;
        self.sessions
            .write()
            .expect("index lock")
            .insert(session.id().to_string(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    /// Logs a choice; the caller holds the session lock and has checked the ordinal.
    pub(crate) async fn log_choice(&self, session: &str, ordinal: u32, chose_bet: bool) -> io::Result<()> {
        self.log
            .append(&LogEvent::Choice { session: session.to_string(), ordinal, chose_bet, at_ms: now_ms() })
            .await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_seeds_count_up_from_the_base() {
        let s = SeedSource::deterministic(u64::MAX);
        assert_eq!([s.draw(), s.draw()], [Some(u64::MAX), Some(0)]);
        assert_eq!(SeedSource::Entropy.draw(), None);
    }

    #[test]
    fn log_events_are_tagged_json_lines() {
        let e = LogEvent::Choice { session: "s".into(), ordinal: 3, chose_bet: false, at_ms: None };
        let line = serde_json::to_string(&e).unwrap();
        assert_eq!(line, r#"{"type":"choice","session":"s","ordinal":3,"chose_bet":false}"#);
        assert_eq!(read_log(format!("{line}\n\n{line}\n").as_bytes()).unwrap(), vec![e.clone(), e]);
    }
}
