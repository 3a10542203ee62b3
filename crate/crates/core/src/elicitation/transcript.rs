//! Line-delimited session transcripts.
//!
//! Each session is written as its choice records, one JSON object per line,
//! followed by a single interval block line:
//!
//! ```text
//! {"kind":"choice","session":"r1-w1-…","ordinal":0,"event":"high","offered":0.5,"chose_bet":true}
//! …
//! {"kind":"intervals","session":"r1-w1-…","respondent":"r1","wave":1,"intervals":[…]}
//! ```
//!
//! Simulated panels use the same format, so downstream readers cannot tell
//! live and synthetic data apart.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChoiceRecord, MatchingInterval};
use crate::domain::{Event, RespondentId, WaveId};

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: choice for session `{found}` inside block of `{expected}`")]
    SessionMismatch { line: usize, expected: String, found: String },
    #[error("line {line}: interval block must hold all six events exactly once")]
    IncompleteBlock { line: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("trailing choices for session `{0}` without an interval block")]
    DanglingChoices(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub session: String,
    pub respondent: RespondentId,
    pub wave: WaveId,
    pub choices: Vec<ChoiceRecord>,
    pub intervals: Vec<MatchingInterval>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Choice(ChoiceRecord),
    Intervals {
        session: String,
        respondent: RespondentId,
        wave: WaveId,
        intervals: Vec<MatchingInterval>,
    },
}

pub fn write_transcripts<W: Write>(
    mut out: W,
    transcripts: &[SessionTranscript],
) -> Result<(), TranscriptError> {
    for t in transcripts {
        for c in &t.choices {
            serde_json::to_writer(&mut out, &Line::Choice(c.clone()))
                .map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        let block = Line::Intervals {
            session: t.session.clone(),
            respondent: t.respondent.clone(),
            wave: t.wave,
            intervals: t.intervals.clone(),
        };
        serde_json::to_writer(&mut out, &block).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_transcripts<R: BufRead>(input: R) -> Result<Vec<SessionTranscript>, TranscriptError> {
    let mut out = Vec::new();
    let mut pending: Vec<ChoiceRecord> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|source| TranscriptError::Parse { line: line_no, source })?;
        match parsed {
            Line::Choice(c) => {
                if let Some(first) = pending.first() {
                    if first.session != c.session {
                        return Err(TranscriptError::SessionMismatch {
                            line: line_no,
                            expected: first.session.clone(),
                            found: c.session,
                        });
                    }
                    if c.ordinal <= pending.last().map_or(0, |p| p.ordinal) {
                        return Err(TranscriptError::Invalid {
                            line: line_no,
                            message: "question ordinals must increase".into(),
                        });
                    }
                }
                if !(c.offered > 0.0 && c.offered < 1.0) {
                    return Err(TranscriptError::Invalid {
                        line: line_no,
                        message: format!("offered probability {} outside (0, 1)", c.offered),
                    });
                }
                pending.push(c);
            }
            Line::Intervals { session, respondent, wave, intervals } => {
                if let Some(first) = pending.first() {
                    if first.session != session {
                        return Err(TranscriptError::SessionMismatch {
                            line: line_no,
                            expected: first.session.clone(),
                            found: session,
                        });
                    }
                }
                let mut seen = [false; 6];
                for iv in &intervals {
                    iv.validate().map_err(|e| TranscriptError::Invalid {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                    if iv.wave != wave || std::mem::replace(&mut seen[iv.event.index()], true) {
                        return Err(TranscriptError::IncompleteBlock { line: line_no });
                    }
                }
                if intervals.len() != Event::ALL.len() {
                    return Err(TranscriptError::IncompleteBlock { line: line_no });
                }
                out.push(SessionTranscript {
                    session,
                    respondent,
                    wave,
                    choices: std::mem::take(&mut pending),
                    intervals,
                });
            }
        }
    }
    if let Some(c) = pending.first() {
        return Err(TranscriptError::DanglingChoices(c.session.clone()));
    }
    Ok(out)
}

/// Interval data keyed by respondent, then wave.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalPanel {
    pub respondents: BTreeMap<RespondentId, BTreeMap<WaveId, Vec<MatchingInterval>>>,
}

impl IntervalPanel {
    pub fn from_transcripts(transcripts: &[SessionTranscript]) -> Self {
        let mut panel = Self::default();
        for t in transcripts {
            panel
                .respondents
                .entry(t.respondent.clone())
                .or_default()
                .entry(t.wave)
                .or_default()
                .extend(t.intervals.iter().copied());
        }
        panel
    }

    pub fn len(&self) -> usize {
        self.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.respondents.is_empty()
    }
}
