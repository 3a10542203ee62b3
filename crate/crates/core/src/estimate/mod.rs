//! Per-respondent maximum-likelihood estimation of ambiguity attitudes.

mod likelihood;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use likelihood::{
    interval_loglik, interval_loglik_gradient, ln_interval_mass, LoglikGradient, WeightLink,
};
use likelihood::{Natural, Prepared};

use crate::domain::{moment_indices, AmbiguityProfile, BeliefVector, Event, EventMap, RespondentId, WaveId};
use crate::elicitation::{IntervalPanel, MatchingInterval};
use crate::optim::{bfgs_minimize, BfgsOptions};
use crate::simulate::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no intervals supplied")]
    EmptyIntervals,
    #[error("error standard deviation must be positive, got {0}")]
    NonPositiveErrorSd(f64),
    #[error("no beliefs supplied for wave {0}")]
    MissingBeliefs(WaveId),
    #[error("at least one wave must hold all six events")]
    NoCompleteWave,
    #[error("malformed interval: {0}")]
    MalformedInterval(String),
    #[error("invalid estimation config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub aversion_bounds: [f64; 2],
    pub max_sensitivity: f64,
    pub error_sd_bounds: [f64; 2],
    pub belief_floor: f64,
    pub starts: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the jittered restarts.
    pub seed: u64,
    /// Standard deviation of restart jitter in transformed coordinates.
    pub jitter: f64,
    pub link: WeightLink,
    /// Boundary flag tolerance as a fraction of each parameter's range.
    pub boundary_tolerance: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            aversion_bounds: [-1.0, 1.0],
            max_sensitivity: 1.5,
            error_sd_bounds: [0.005, 0.5],
            belief_floor: 0.001,
            starts: 8,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-10,
            max_iterations: 500,
            seed: 0,
            jitter: 1.0,
            link: WeightLink::Linear,
            boundary_tolerance: 1e-4,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<(), EstimateError> {
        let bad = |m: &str| Err(EstimateError::InvalidConfig(m.to_string()));
        let [alo, ahi] = self.aversion_bounds;
        let [slo, shi] = self.error_sd_bounds;
        if !(alo < ahi) {
            return bad("aversion bounds must be increasing");
        }
        if !(self.max_sensitivity > 0.0) {
            return bad("max sensitivity must be positive");
        }
        if !(slo > 0.0 && slo < shi) {
            return bad("error sd bounds need 0 < min < max");
        }
        if !(self.belief_floor >= 0.0 && 3.0 * self.belief_floor < 1.0) {
            return bad("belief floor must lie in [0, 1/3)");
        }
        if self.starts == 0 {
            return bad("need at least one start");
        }
        if !(self.gradient_tolerance > 0.0 && self.step_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.jitter >= 0.0 && self.boundary_tolerance >= 0.0) {
            return bad("jitter and boundary tolerance must be non-negative");
        }
        Ok(())
    }

    fn bounds(&self) -> [[f64; 2]; 3] {
        [self.aversion_bounds, [0.0, self.max_sensitivity], self.error_sd_bounds]
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            step_tolerance: self.step_tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Lower,
    Upper,
}

impl Bound {
    pub fn as_str(self) -> &'static str {
        match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFlags {
    pub aversion: Option<Bound>,
    pub sensitivity: Option<Bound>,
    pub error_sd: Option<Bound>,
}

impl BoundaryFlags {
    pub fn any(&self) -> bool {
        self.aversion.is_some() || self.sensitivity.is_some() || self.error_sd.is_some()
    }
}

/// Spread of the multi-start optima.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostics {
    pub attempted: usize,
    pub converged: usize,
    /// Best minus worst finite log-likelihood over all starts.
    pub loglik_range: f64,
    /// Range of aversion estimates over converged starts.
    pub aversion_range: f64,
    pub sensitivity_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub profile: AmbiguityProfile<f64>,
    /// One belief vector per wave, ordered by wave id.
    pub beliefs: Vec<BeliefVector<f64>>,
    pub loglik: f64,
    pub converged: bool,
    pub boundary: BoundaryFlags,
    pub starts: StartDiagnostics,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn to_unbounded(v: f64, [lo, hi]: [f64; 2]) -> f64 {
    let margin = 1e-3 * (hi - lo);
    let t = ((v.clamp(lo + margin, hi - margin)) - lo) / (hi - lo);
    (t / (1.0 - t)).ln()
}

#[derive(Clone, Debug)]
struct Candidate {
    x: Natural,
    loglik: f64,
    converged: bool,
}

/// The likelihood in transformed coordinates with some structural parameters held fixed.
struct Problem<'a> {
    data: &'a Prepared,
    cfg: &'a EstimationConfig,
    fixed: [Option<f64>; 3],
}

impl Problem<'_> {
    fn free(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_none()).count()
    }

    fn pack(&self, x: &Natural) -> DVector<f64> {
        let bounds = self.cfg.bounds();
        let structural = [x.aversion, x.sensitivity, x.error_sd];
        let mut out = Vec::with_capacity(self.free() + 2 * x.beliefs.len());
        for k in 0..3 {
            if self.fixed[k].is_none() {
                out.push(to_unbounded(structural[k], bounds[k]));
            }
        }
        let eps = self.cfg.belief_floor;
        for p in &x.beliefs {
            let q = p.map(|v| ((v - eps) / (1.0 - 3.0 * eps)).max(1e-6));
            out.push((q[1] / q[0]).ln());
            out.push((q[2] / q[0]).ln());
        }
        DVector::from_vec(out)
    }

    /// Natural parameters plus the derivative of each structural one and the softmax weights.
    fn unpack(&self, u: &DVector<f64>) -> (Natural, [f64; 3], Vec<[f64; 3]>) {
        let bounds = self.cfg.bounds();
        let mut structural = [0.0; 3];
        let mut deriv = [0.0; 3];
        let mut i = 0;
        for k in 0..3 {
            match self.fixed[k] {
                Some(v) => structural[k] = v,
                None => {
                    let [lo, hi] = bounds[k];
                    let t = sigmoid(u[i]);
                    structural[k] = lo + (hi - lo) * t;
                    deriv[k] = (hi - lo) * t * (1.0 - t);
                    i += 1;
                }
            }
        }
        let eps = self.cfg.belief_floor;
        let mut beliefs = Vec::new();
        let mut softmax = Vec::new();
        while i < u.len() {
            let (v1, v2) = (u[i], u[i + 1]);
            let m = 0.0f64.max(v1).max(v2);
            let e = [(-m).exp(), (v1 - m).exp(), (v2 - m).exp()];
            let z = e[0] + e[1] + e[2];
            let q = e.map(|v| v / z);
            beliefs.push(q.map(|v| eps + (1.0 - 3.0 * eps) * v));
            softmax.push(q);
            i += 2;
        }
        let x = Natural {
            aversion: structural[0],
            sensitivity: structural[1],
            error_sd: structural[2],
            beliefs,
        };
        (x, deriv, softmax)
    }

    /// Negative log-likelihood and gradient in transformed coordinates.
    fn objective(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let (x, deriv, softmax) = self.unpack(u);
        let (ll, g) = self.data.evaluate(&x, self.cfg.link, true);
        let g = g.expect("gradient requested");
        let structural = [g.aversion, g.sensitivity, g.error_sd];
        let mut out = Vec::with_capacity(u.len());
        for k in 0..3 {
            if self.fixed[k].is_none() {
                out.push(-structural[k] * deriv[k]);
            }
        }
        let scale = 1.0 - 3.0 * self.cfg.belief_floor;
        for (gp, q) in g.beliefs.iter().zip(&softmax) {
            let mean: f64 = (0..3).map(|i| gp[i] * q[i]).sum();
            out.push(-scale * q[1] * (gp[1] - mean));
            out.push(-scale * q[2] * (gp[2] - mean));
        }
        (-ll, DVector::from_vec(out))
    }

    fn run(&self, start: DVector<f64>) -> Candidate {
        let m = bfgs_minimize(|u| self.objective(u), start, &self.cfg.bfgs());
        let (x, _, _) = self.unpack(&m.x);
        Candidate { x, loglik: -m.value, converged: m.converged }
    }
}

/// Validated intervals of one respondent in canonical wave order.
struct Dataset {
    waves: Vec<WaveId>,
    intervals: Vec<MatchingInterval>,
    midpoints: Vec<EventMap<f64>>,
}

fn prepare(waves: &BTreeMap<WaveId, Vec<MatchingInterval>>) -> Result<Dataset, EstimateError> {
    let mut complete = false;
    let mut keyed = Vec::new();
    for (&wave, ivs) in waves {
        let mut mids = EventMap::new();
        for iv in ivs {
            iv.validate().map_err(|e| EstimateError::MalformedInterval(e.to_string()))?;
            if iv.wave != wave {
                return Err(EstimateError::MalformedInterval(format!(
                    "interval for wave {} filed under wave {wave}",
                    iv.wave
                )));
            }
            if mids.get(iv.event).is_some() {
                return Err(EstimateError::MalformedInterval(format!(
                    "duplicate {} interval in wave {wave}",
                    iv.event
                )));
            }
            mids.insert(iv.event, iv.midpoint());
        }
        complete |= mids.is_complete();
        // Order waves by content so estimates do not depend on their labels.
        let key: Vec<(f64, f64)> = Event::ALL
            .iter()
            .map(|&e| {
                ivs.iter().find(|iv| iv.event == e).map_or((-1.0, -1.0), |iv| (iv.lb, iv.ub))
            })
            .collect();
        keyed.push((key, wave, mids));
    }
    if waves.values().all(Vec::is_empty) {
        return Err(EstimateError::EmptyIntervals);
    }
    if !complete {
        return Err(EstimateError::NoCompleteWave);
    }
    keyed.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let order: Vec<WaveId> = keyed.iter().map(|k| k.1).collect();
    let intervals = order.iter().flat_map(|w| waves[w].iter().copied()).collect();
    Ok(Dataset { waves: order, intervals, midpoints: keyed.into_iter().map(|k| k.2).collect() })
}

/// Starting point from hedge moments on interval midpoints.
fn moment_start(data: &Dataset, cfg: &EstimationConfig) -> Natural {
    let indices: Vec<_> =
        data.midpoints.iter().filter_map(|m| moment_indices(m).ok()).collect();
    let n = indices.len() as f64;
    let bounds = cfg.bounds();
    let interior = |v: f64, [lo, hi]: [f64; 2]| v.clamp(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo));
    let aversion = interior(indices.iter().map(|m| m.aversion).sum::<f64>() / n, bounds[0]);
    let sensitivity = interior(indices.iter().map(|m| m.sensitivity).sum::<f64>() / n, bounds[1]);
    let intercept = (1.0 - sensitivity) / 2.0 - aversion;

    let beliefs: Vec<[f64; 3]> = data
        .midpoints
        .iter()
        .map(|m| {
            if sensitivity < 0.05 {
                return [1.0 / 3.0; 3];
            }
            let mut p = [0.0; 3];
            for (i, e) in Event::SINGULAR.into_iter().enumerate() {
                let direct = m.get(e).map(|v| (v - intercept) / sensitivity);
                let via = m.get(e.complement()).map(|v| 1.0 - (v - intercept) / sensitivity);
                let est = match (direct, via) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => 1.0 / 3.0,
                };
                p[i] = est.clamp(0.02, 1.0);
            }
            let total: f64 = p.iter().sum();
            p.map(|v| v / total)
        })
        .collect();

    let mut sq = 0.0;
    let mut count = 0.0;
    for (m, p) in data.midpoints.iter().zip(&beliefs) {
        for (e, v) in m.iter() {
            let prob: f64 = e.members().iter().map(|&i| p[i]).sum();
            sq += (v - intercept - sensitivity * prob).powi(2);
            count += 1.0;
        }
    }
    let error_sd = interior((sq / count).sqrt().max(0.05), bounds[2]);
    Natural { aversion, sensitivity, error_sd, beliefs }
}

fn tie_key(x: &Natural) -> Vec<f64> {
    let mut k = vec![x.error_sd, x.aversion, x.sensitivity];
    k.extend(x.beliefs.iter().flatten());
    k
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Best of the candidates: highest log-likelihood, ties to smallest σ, then
/// lexicographic parameter order.
fn select(candidates: &[Candidate]) -> Option<&Candidate> {
    let best = candidates
        .iter()
        .map(|c| c.loglik)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return candidates.first();
    }
    let tol = 1e-9 * (1.0 + best.abs());
    candidates
        .iter()
        .filter(|c| c.loglik >= best - tol)
        .min_by(|a, b| lexicographic(&tie_key(&a.x), &tie_key(&b.x)))
}

/// Tries each structural parameter at its bounds with the rest re-optimized.
/// Lower bounds win ties, matching the tie-break order.
fn polish(data: &Prepared, cfg: &EstimationConfig, mut best: Candidate) -> Candidate {
    let bounds = cfg.bounds();
    let mut fixed = [None; 3];
    for k in 0..3 {
        for (side, accept_tie) in [(0, true), (1, false)] {
            let mut trial_fixed = fixed;
            trial_fixed[k] = Some(bounds[k][side]);
            let problem = Problem { data, cfg, fixed: trial_fixed };
            let cand = problem.run(problem.pack(&best.x));
            let better = cand.loglik > best.loglik || (accept_tie && cand.loglik >= best.loglik);
            if cand.loglik.is_finite() && better {
                best = Candidate { converged: cand.converged || best.converged, ..cand };
                fixed = trial_fixed;
                break;
            }
        }
    }
    best
}

fn flag(v: f64, [lo, hi]: [f64; 2], tol: f64) -> Option<Bound> {
    let t = tol * (hi - lo);
    if v - lo <= t {
        Some(Bound::Lower)
    } else if hi - v <= t {
        Some(Bound::Upper)
    } else {
        None
    }
}

/// Maximum-likelihood estimate of one respondent's profile and per-wave beliefs.
pub fn estimate_individual(
    waves: &BTreeMap<WaveId, Vec<MatchingInterval>>,
    cfg: &EstimationConfig,
) -> Result<EstimationResult, EstimateError> {
    cfg.validate()?;
    let data = prepare(waves)?;
    let prepared = Prepared::new(&data.waves, &data.intervals)?;
    let problem = Problem { data: &prepared, cfg, fixed: [None; 3] };

    let origin = problem.pack(&moment_start(&data, cfg));
    let candidates: Vec<Candidate> = (0..cfg.starts)
        .map(|k| {
            let mut start = origin.clone();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[k as u64]));
                for v in start.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += cfg.jitter * z;
                }
            }
            problem.run(start)
        })
        .collect();

    let finite: Vec<f64> = candidates.iter().map(|c| c.loglik).filter(|v| v.is_finite()).collect();
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi >= lo { hi - lo } else { 0.0 }
    };
    let starts = StartDiagnostics {
        attempted: candidates.len(),
        converged: candidates.iter().filter(|c| c.converged).count(),
        loglik_range: range(&mut finite.iter().copied()),
        aversion_range: range(&mut candidates.iter().filter(|c| c.converged).map(|c| c.x.aversion)),
        sensitivity_range: range(
            &mut candidates.iter().filter(|c| c.converged).map(|c| c.x.sensitivity),
        ),
    };

    let winner = select(&candidates).expect("at least one start").clone();
    let best = polish(&prepared, cfg, winner);

    let profile = AmbiguityProfile::new(best.x.aversion, best.x.sensitivity, best.x.error_sd);
    let mut beliefs: Vec<BeliefVector<f64>> = data
        .waves
        .iter()
        .zip(&best.x.beliefs)
        .map(|(&w, p)| {
            let total: f64 = p.iter().sum();
            BeliefVector::new(p.map(|v| v / total), w)
                .map_err(|e| EstimateError::MalformedInterval(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    beliefs.sort_by_key(|b| b.wave());
    let loglik = interval_loglik(&profile, &beliefs, &data.intervals, cfg.link)?;
    let bounds = cfg.bounds();
    let tol = cfg.boundary_tolerance;
    Ok(EstimationResult {
        boundary: BoundaryFlags {
            aversion: flag(profile.aversion, bounds[0], tol),
            sensitivity: flag(profile.sensitivity, bounds[1], tol),
            error_sd: flag(profile.error_sd, bounds[2], tol),
        },
        profile,
        beliefs,
        loglik,
        converged: best.converged,
        starts,
    })
}

/// Mean absolute errors against known profiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub compared: usize,
    pub failed: usize,
    pub mae_aversion: f64,
    pub mae_sensitivity: f64,
    pub mae_error_sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationRecovery {
    pub results: BTreeMap<RespondentId, Result<EstimationResult, EstimateError>>,
    /// Present when truths were supplied.
    pub summary: Option<RecoverySummary>,
}

/// Estimates every respondent independently, in parallel.
pub fn recover_population(
    panel: &IntervalPanel,
    cfg: &EstimationConfig,
    truths: Option<&BTreeMap<RespondentId, AmbiguityProfile<f64>>>,
) -> PopulationRecovery {
    let results: BTreeMap<_, _> = panel
        .respondents
        .par_iter()
        .map(|(id, waves)| (id.clone(), estimate_individual(waves, cfg)))
        .collect();
    let summary = truths.map(|truths| {
        let mut s = RecoverySummary {
            compared: 0,
            failed: 0,
            mae_aversion: 0.0,
            mae_sensitivity: 0.0,
            mae_error_sd: 0.0,
        };
        for (id, res) in &results {
            match (res, truths.get(id)) {
                (Ok(r), Some(t)) => {
                    s.compared += 1;
                    s.mae_aversion += (r.profile.aversion - t.aversion).abs();
                    s.mae_sensitivity += (r.profile.sensitivity - t.sensitivity).abs();
                    s.mae_error_sd += (r.profile.error_sd - t.error_sd).abs();
                }
                (Err(_), _) => s.failed += 1,
                (Ok(_), None) => {}
            }
        }
        if s.compared > 0 {
            let n = s.compared as f64;
            s.mae_aversion /= n;
            s.mae_sensitivity /= n;
            s.mae_error_sd /= n;
        }
        s
    });
    PopulationRecovery { results, summary }
}

/// One row of the estimates table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub respondent: RespondentId,
    pub aversion: Option<f64>,
    pub sensitivity: Option<f64>,
    pub error_sd: Option<f64>,
    pub loglik: Option<f64>,
    pub converged: Option<bool>,
    pub aversion_bound: Option<Bound>,
    pub sensitivity_bound: Option<Bound>,
    pub error_sd_bound: Option<Bound>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn new(respondent: RespondentId, res: &Result<EstimationResult, EstimateError>) -> Self {
        match res {
            Ok(r) => Self {
                respondent,
                aversion: Some(r.profile.aversion),
                sensitivity: Some(r.profile.sensitivity),
                error_sd: Some(r.profile.error_sd),
                loglik: Some(r.loglik),
                converged: Some(r.converged),
                aversion_bound: r.boundary.aversion,
                sensitivity_bound: r.boundary.sensitivity,
                error_sd_bound: r.boundary.error_sd,
                error: None,
            },
            Err(e) => Self {
                respondent,
                aversion: None,
                sensitivity: None,
                error_sd: None,
                loglik: None,
                converged: None,
                aversion_bound: None,
                sensitivity_bound: None,
                error_sd_bound: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn profile(&self) -> Option<AmbiguityProfile<f64>> {
        Some(AmbiguityProfile::new(self.aversion?, self.sensitivity?, self.error_sd?))
    }
}

pub fn write_results_table<W: Write>(
    out: W,
    results: &BTreeMap<RespondentId, Result<EstimationResult, EstimateError>>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for (id, res) in results {
        w.serialize(ResultRow::new(id.clone(), res))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_table<R: Read>(input: R) -> Result<Vec<ResultRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
