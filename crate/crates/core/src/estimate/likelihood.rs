use serde::{Deserialize, Serialize};

use super::EstimateError;
use crate::domain::{AmbiguityProfile, BeliefVector, Event, WaveId};
use crate::elicitation::MatchingInterval;
use crate::scalar::{normal, Real};

/// How the linear index `ℓ + s·p` maps to a decision weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLink {
    /// Unclamped `ℓ + s·p`; the latent matching value is unbounded anyway.
    #[default]
    Linear,
    /// `clamp(ℓ + s·p, 0, 1)`.
    Clamped,
}

impl WeightLink {
    fn apply<T: Real>(self, index: T) -> T {
        match self {
            WeightLink::Linear => index,
            WeightLink::Clamped => index.max(T::zero()).min(T::one()),
        }
    }
}

/// `ln(Φ(b) − Φ(a))`, stable in both tails.
pub fn ln_interval_mass<T: Real>(a: T, b: T) -> T {
    if !(a < b) {
        return T::neg_infinity();
    }
    let zero = T::zero();
    if a >= zero {
        ln_tail_difference(a, b)
    } else if b <= zero {
        ln_tail_difference(-b, -a)
    } else {
        (-(b.norm_sf() + (-a).norm_sf())).ln_1p()
    }
}

fn ln_tail_difference<T: Real>(lo: T, hi: T) -> T {
    let ln_lo = lo.ln_norm_sf();
    let ln_hi = hi.ln_norm_sf();
    if ln_hi == T::neg_infinity() {
        return ln_lo;
    }
    ln_lo + (-(ln_hi - ln_lo).exp()).ln_1p()
}

/// Standardized censoring bounds. An interval touching 0 or 1 is open on that side.
fn standardized<T: Real>(iv: &MatchingInterval, weight: T, sd: T) -> (T, T) {
    let a = if iv.lb <= 0.0 { T::neg_infinity() } else { (T::from_f64(iv.lb) - weight) / sd };
    let b = if iv.ub >= 1.0 { T::infinity() } else { (T::from_f64(iv.ub) - weight) / sd };
    (a, b)
}

/// Log-likelihood of interval-censored matching values.
pub fn interval_loglik<T: Real>(
    profile: &AmbiguityProfile<T>,
    beliefs: &[BeliefVector<T>],
    intervals: &[MatchingInterval],
    link: WeightLink,
) -> Result<T, EstimateError> {
    if intervals.is_empty() {
        return Err(EstimateError::EmptyIntervals);
    }
    if !(profile.error_sd > T::zero()) {
        return Err(EstimateError::NonPositiveErrorSd(profile.error_sd.to_f64()));
    }
    let weighting = profile.weighting();
    let mut total = T::zero();
    for iv in intervals {
        let b = beliefs
            .iter()
            .find(|b| b.wave() == iv.wave)
            .ok_or(EstimateError::MissingBeliefs(iv.wave))?;
        let w = link.apply(weighting.linear(b.probability(iv.event)));
        let (lo, hi) = standardized(iv, w, profile.error_sd);
        total = total + ln_interval_mass(lo, hi);
    }
    Ok(total)
}

/// Log-likelihood and its gradient in natural coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LoglikGradient {
    pub value: f64,
    pub aversion: f64,
    pub sensitivity: f64,
    pub error_sd: f64,
    /// Partial derivatives with respect to each wave's three singular
    /// probabilities, treated as unconstrained; order follows the beliefs passed in.
    pub beliefs: Vec<[f64; 3]>,
}

/// Analytic gradient of [`interval_loglik`] on `f64`.
pub fn interval_loglik_gradient(
    profile: &AmbiguityProfile<f64>,
    beliefs: &[BeliefVector<f64>],
    intervals: &[MatchingInterval],
    link: WeightLink,
) -> Result<LoglikGradient, EstimateError> {
    let waves: Vec<WaveId> = beliefs.iter().map(|b| b.wave()).collect();
    let data = Prepared::new(&waves, intervals)?;
    if !(profile.error_sd > 0.0) {
        return Err(EstimateError::NonPositiveErrorSd(profile.error_sd));
    }
    let p: Vec<[f64; 3]> = beliefs.iter().map(|b| b.singular()).collect();
    let params = Natural {
        aversion: profile.aversion,
        sensitivity: profile.sensitivity,
        error_sd: profile.error_sd,
        beliefs: p,
    };
    let (value, g) = data.evaluate(&params, link, true);
    let g = g.expect("gradient requested");
    Ok(LoglikGradient {
        value,
        aversion: g.aversion,
        sensitivity: g.sensitivity,
        error_sd: g.error_sd,
        beliefs: g.beliefs,
    })
}

/// Parameters in natural coordinates.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Natural {
    pub aversion: f64,
    pub sensitivity: f64,
    pub error_sd: f64,
    pub beliefs: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug)]
struct Obs {
    wave: usize,
    event: Event,
    lb: f64,
    ub: f64,
}

/// Intervals indexed against a fixed wave order.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    obs: Vec<Obs>,
    waves: usize,
}

impl Prepared {
    pub fn new(waves: &[WaveId], intervals: &[MatchingInterval]) -> Result<Self, EstimateError> {
        if intervals.is_empty() {
            return Err(EstimateError::EmptyIntervals);
        }
        let obs = intervals
            .iter()
            .map(|iv| {
                let wave = waves
                    .iter()
                    .position(|w| *w == iv.wave)
                    .ok_or(EstimateError::MissingBeliefs(iv.wave))?;
                Ok(Obs { wave, event: iv.event, lb: iv.lb, ub: iv.ub })
            })
            .collect::<Result<Vec<_>, EstimateError>>()?;
        Ok(Self { obs, waves: waves.len() })
    }

    pub fn evaluate(&self, x: &Natural, link: WeightLink, want_grad: bool) -> (f64, Option<Natural>) {
        let s = x.sensitivity;
        let sd = x.error_sd;
        let intercept = (1.0 - s) / 2.0 - x.aversion;
        let mut total = 0.0;
        let mut grad = want_grad.then(|| Natural {
            aversion: 0.0,
            sensitivity: 0.0,
            error_sd: 0.0,
            beliefs: vec![[0.0; 3]; self.waves],
        });
        for o in &self.obs {
            let members = o.event.members();
            let p: f64 = members.iter().map(|&i| x.beliefs[o.wave][i]).sum();
            let index = intercept + s * p;
            let w = link.apply(index);
            let iv = MatchingInterval { event: o.event, wave: WaveId(0), lb: o.lb, ub: o.ub };
            let (a, b) = standardized(&iv, w, sd);
            let ln_mass = ln_interval_mass(a, b);
            total += ln_mass;
            let Some(g) = grad.as_mut() else { continue };
            // φ(z)/M and z·φ(z)/M, both zero at infinite z.
            let ratio = |z: f64| {
                if z.is_infinite() {
                    (0.0, 0.0)
                } else {
                    let r = (normal::ln_pdf(z) - ln_mass).exp();
                    (r, z * r)
                }
            };
            let (ra, zra) = ratio(a);
            let (rb, zrb) = ratio(b);
            let d_w = -(rb - ra) / sd;
            g.error_sd += -(zrb - zra) / sd;
            let d_index = match link {
                WeightLink::Linear => d_w,
                WeightLink::Clamped if (0.0..=1.0).contains(&index) => d_w,
                WeightLink::Clamped => 0.0,
            };
            g.aversion -= d_index;
            g.sensitivity += d_index * (p - 0.5);
            for &i in members {
                g.beliefs[o.wave][i] += d_index * s;
            }
        }
        (total, grad)
    }
}
