//! Synthetic respondents with known structural parameters.
//!
//! An agent's realized matching value for an event in a wave is
//! `m = ℓ + s·p + e`, with `e ~ N(0, σ²)` drawn once per (event, wave) and no
//! clamping, so `m` may leave `[0, 1]`. The agent then answers every
//! bisection probe for that event with the same `m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    linear_matching_values, AmbiguityProfile, BeliefVector, DomainError, Event, EventMap,
    EventPartition, RespondentId, WaveId,
};
use crate::elicitation::{run_session, start_session, ElicitationError, SessionTranscript};
use crate::scalar::normal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("degenerate distribution for {name}: {reason}")]
    DegenerateDistribution { name: &'static str, reason: String },
    #[error("agent {agent} has no wave {wave}")]
    UnknownWave { agent: RespondentId, wave: WaveId },
    #[error("at least one wave is required")]
    NoWaves,
    #[error("offered probability {0} outside (0, 1)")]
    OfferedOutOfRange(f64),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Elicitation(#[from] ElicitationError),
}

/// SplitMix64 finalizer; used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed for `(base, parts…)`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Normal distribution truncated to `[lower, upper]`; `sd = 0` is a point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lower: f64, upper: f64) -> Self {
        Self { mean, sd, lower, upper }
    }

    pub fn point(value: f64) -> Self {
        Self { mean: value, sd: 0.0, lower: value, upper: value }
    }

    fn validate(&self, name: &'static str) -> Result<(), SimulationError> {
        let bad = |reason: String| Err(SimulationError::DegenerateDistribution { name, reason });
        if ![self.mean, self.sd, self.lower, self.upper].iter().all(|v| v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if self.sd < 0.0 {
            return bad(format!("negative sd {}", self.sd));
        }
        if self.sd == 0.0 {
            if self.mean < self.lower || self.mean > self.upper {
                return bad(format!(
                    "point mass {} outside [{}, {}]",
                    self.mean, self.lower, self.upper
                ));
            }
            return Ok(());
        }
        if self.lower >= self.upper {
            return bad(format!("zero-width truncation [{}, {}]", self.lower, self.upper));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        let lo = normal::cdf((self.lower - self.mean) / self.sd);
        let hi = normal::cdf((self.upper - self.mean) / self.sd);
        let u: f64 = rng.random();
        let x = self.mean + self.sd * normal::quantile(lo + (hi - lo) * u);
        x.clamp(self.lower, self.upper)
    }

    /// Mean of the truncated distribution.
    pub fn truncated_mean(&self) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        let a = (self.lower - self.mean) / self.sd;
        let b = (self.upper - self.mean) / self.sd;
        let z = normal::cdf(b) - normal::cdf(a);
        self.mean + self.sd * (normal::pdf(a) - normal::pdf(b)) / z
    }

    /// Standard deviation of the truncated distribution.
    pub fn truncated_sd(&self) -> f64 {
        if self.sd == 0.0 {
            return 0.0;
        }
        let a = (self.lower - self.mean) / self.sd;
        let b = (self.upper - self.mean) / self.sd;
        let z = normal::cdf(b) - normal::cdf(a);
        let (pa, pb) = (normal::pdf(a), normal::pdf(b));
        let term1 = (a * pa - b * pb) / z;
        let term2 = (pa - pb) / z;
        self.sd * (1.0 + term1 - term2 * term2).sqrt()
    }
}

/// How each wave's subjective beliefs are generated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BeliefRule {
    /// Independent Gamma(concentration) draws, normalized onto the simplex.
    Dirichlet { concentration: f64 },
    Fixed { p: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub count: usize,
    pub aversion: TruncatedNormal,
    pub sensitivity: TruncatedNormal,
    pub error_sd: TruncatedNormal,
    pub beliefs: BeliefRule,
    pub waves: u32,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            count: 200,
            aversion: TruncatedNormal::new(0.15, 0.25, -1.0, 1.0),
            sensitivity: TruncatedNormal::new(0.6, 0.3, 0.0, 1.5),
            error_sd: TruncatedNormal::new(0.1, 0.05, 0.005, 0.5),
            beliefs: BeliefRule::Dirichlet { concentration: 3.0 },
            waves: 2,
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        self.aversion.validate("aversion")?;
        self.sensitivity.validate("sensitivity")?;
        self.error_sd.validate("error_sd")?;
        if self.sensitivity.lower.min(self.sensitivity.mean) < 0.0 {
            return Err(SimulationError::DegenerateDistribution {
                name: "sensitivity",
                reason: "support must be non-negative".into(),
            });
        }
        let sd_floor = if self.error_sd.sd == 0.0 { self.error_sd.mean } else { self.error_sd.lower };
        if sd_floor < 0.0 || (self.error_sd.sd == 0.0 && sd_floor == 0.0) {
            return Err(SimulationError::DegenerateDistribution {
                name: "error_sd",
                reason: "support must be positive".into(),
            });
        }
        match self.beliefs {
            BeliefRule::Dirichlet { concentration } if !(concentration > 0.0) => {
                return Err(SimulationError::DegenerateDistribution {
                    name: "beliefs",
                    reason: format!("concentration {concentration} must be positive"),
                })
            }
            BeliefRule::Fixed { p } => {
                BeliefVector::new(p, WaveId(1))?;
            }
            _ => {}
        }
        if self.waves == 0 {
            return Err(SimulationError::NoWaves);
        }
        Ok(())
    }
}

/// A respondent whose structural parameters and beliefs are known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAgent {
    pub id: RespondentId,
    pub profile: AmbiguityProfile<f64>,
    pub beliefs: Vec<BeliefVector<f64>>,
    /// Realized matching value per wave, aligned with `beliefs`.
    pub matching: Vec<EventMap<f64>>,
    pub seed: u64,
}

fn draw_beliefs<R: Rng + ?Sized>(
    rule: &BeliefRule,
    wave: WaveId,
    rng: &mut R,
) -> Result<BeliefVector<f64>, SimulationError> {
    let p = match *rule {
        BeliefRule::Fixed { p } => p,
        BeliefRule::Dirichlet { concentration } => {
            let gamma = Gamma::new(concentration, 1.0).map_err(|e| {
                SimulationError::DegenerateDistribution { name: "beliefs", reason: e.to_string() }
            })?;
            let g: [f64; 3] = std::array::from_fn(|_| gamma.sample(rng).max(f64::MIN_POSITIVE));
            let total: f64 = g.iter().sum();
            let mut p = g.map(|x| x / total);
            // exact closure of the simplex
            p[2] = 1.0 - p[0] - p[1];
            p
        }
    };
    Ok(BeliefVector::new(p, wave)?)
}

impl SyntheticAgent {
    /// Builds an agent from given parameters and beliefs (wave ids taken from
    /// the belief vectors); decision errors come from `seed`.
    pub fn with_profile(
        id: RespondentId,
        profile: AmbiguityProfile<f64>,
        beliefs: Vec<BeliefVector<f64>>,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xE440]));
        let weighting = profile.weighting();
        let matching = beliefs
            .iter()
            .map(|b| {
                linear_matching_values(&weighting, b).map(|w| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w + profile.error_sd * z
                })
            })
            .collect();
        Self { id, profile, beliefs, matching, seed }
    }

    pub fn waves(&self) -> impl Iterator<Item = WaveId> + '_ {
        self.beliefs.iter().map(|b| b.wave())
    }

    pub fn matching_value(&self, event: Event, wave: WaveId) -> Result<f64, SimulationError> {
        self.beliefs
            .iter()
            .position(|b| b.wave() == wave)
            .and_then(|i| self.matching[i].get(event))
            .ok_or_else(|| SimulationError::UnknownWave { agent: self.id.clone(), wave })
    }

    /// Prefers the ambiguous bet iff `m > q`; ties go to the lottery.
    pub fn answer(&self, event: Event, wave: WaveId, offered: f64) -> Result<bool, SimulationError> {
        if !(offered > 0.0 && offered < 1.0) {
            return Err(SimulationError::OfferedOutOfRange(offered));
        }
        Ok(self.matching_value(event, wave)? > offered)
    }
}

/// Draws a reproducible population. Agent `i` uses its own stream derived from `(seed, i)`.
pub fn sample_population(spec: &PopulationSpec) -> Result<Vec<SyntheticAgent>, SimulationError> {
    spec.validate()?;
    (0..spec.count)
        .map(|i| {
            let agent_seed = derive_seed(spec.seed, &[i as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(agent_seed);
            let profile = AmbiguityProfile::new(
                spec.aversion.sample(&mut rng),
                spec.sensitivity.sample(&mut rng),
                spec.error_sd.sample(&mut rng),
            );
            let beliefs = (1..=spec.waves)
                .map(|w| draw_beliefs(&spec.beliefs, WaveId(w), &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SyntheticAgent::with_profile(
                RespondentId(format!("sim{i:05}")),
                profile,
                beliefs,
                agent_seed,
            ))
        })
        .collect()
}

/// Runs every agent through `waves` depth-`depth` sessions.
pub fn simulate_panel(
    agents: &[SyntheticAgent],
    waves: u32,
    depth: u32,
    seed: u64,
) -> Result<Vec<SessionTranscript>, SimulationError> {
    if waves == 0 {
        return Err(SimulationError::NoWaves);
    }
    let partition = EventPartition::default();
    let mut out = Vec::with_capacity(agents.len() * waves as usize);
    for (i, agent) in agents.iter().enumerate() {
        for w in 1..=waves {
            let wave = WaveId(w);
            // Validate up front so the responder closure cannot fail.
            agent.matching_value(Event::Low, wave)?;
            let session_seed = derive_seed(seed, &[i as u64, u64::from(w)]);
            let session =
                start_session(partition, depth, Some(session_seed), agent.id.clone(), wave)?;
            let done = run_session(session, |event, q| {
                agent.answer(event, wave, q).expect("wave validated above")
            });
            out.push(done.transcript()?);
        }
    }
    Ok(out)
}
