//! Events, beliefs, neo-additive decision weights and the belief-hedge
//! identities that define the two ambiguity indices.
//!
//! With weights `W(p) = ℓ + s·p` and the expectation taken uniformly over the
//! six hedge events, the mean subjective probability is exactly 1/2, so
//! aversion `AA = E[p − W] = (1 − s)/2 − ℓ` and sensitivity is the slope `s`.
//! Both indices live on the unclipped linear parameters; clamping to `[0, 1]`
//! only happens when an actual decision weight is produced.

mod events;
mod hedge;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use events::{Event, EventMap, EventPartition};
pub use hedge::{
    hedge_pair_sums, linear_matching_values, moment_indices, HedgeSignal, MomentIndices,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },
    #[error("no value for event `{0}`")]
    MissingEvent(Event),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("beliefs sum to {sum}, not 1")]
    NotOnSimplex { sum: f64 },
    #[error("negative belief {value}")]
    NegativeBelief { value: f64 },
    #[error("cutoffs must be finite and strictly increasing (got {lower}, {upper})")]
    InvalidCutoffs { lower: f64, upper: f64 },
    #[error("sensitivity {value} outside [0, {max}]")]
    SensitivityOutOfRange { value: f64, max: f64 },
    #[error("decision-error sd must be positive (got {value})")]
    NonPositiveErrorSd { value: f64 },
    #[error("weights at equal beliefs cannot identify a slope")]
    DegenerateBeliefs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WaveId(pub u32);

impl fmt::Display for WaveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RespondentId(pub String);

impl fmt::Display for RespondentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RespondentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Subjective probabilities of the three singular events in one wave.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefVector<T> {
    p: [T; 3],
    wave: WaveId,
}

impl<T: Scalar> BeliefVector<T> {
    pub fn new(p: [T; 3], wave: WaveId) -> Result<Self, DomainError> {
        for &v in &p {
            if v < T::zero() {
                return Err(DomainError::NegativeBelief { value: v.to_f64() });
            }
        }
        let sum = p[0] + p[1] + p[2];
        let gap = if sum > T::one() { sum - T::one() } else { T::one() - sum };
        if gap > T::simplex_tolerance() {
            return Err(DomainError::NotOnSimplex { sum: sum.to_f64() });
        }
        Ok(Self { p, wave })
    }

    pub fn singular(&self) -> [T; 3] {
        self.p
    }

    pub fn wave(&self) -> WaveId {
        self.wave
    }

    /// Probability of any hedge event; composites add their two members.
    pub fn probability(&self, event: Event) -> T {
        event.members().iter().fold(T::zero(), |acc, &i| acc + self.p[i])
    }
}

/// Neo-additive weighting `W(p) = clamp(ℓ + s·p, 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeoAdditiveWeighting<T> {
    pub intercept: T,
    pub slope: T,
}

impl<T: Scalar> NeoAdditiveWeighting<T> {
    pub fn new(intercept: T, slope: T) -> Self {
        Self { intercept, slope }
    }

    pub fn identity() -> Self {
        Self { intercept: T::zero(), slope: T::one() }
    }

    /// Unclipped linear index `ℓ + s·p`.
    pub fn linear(&self, p: T) -> T {
        self.intercept + self.slope * p
    }

    pub fn weight(&self, p: T) -> Result<T, DomainError> {
        decision_weight(p, self)
    }

    /// The weighting passing through two (belief, weight) observations.
    pub fn through(first: (T, T), second: (T, T)) -> Result<Self, DomainError> {
        let dp = second.0 - first.0;
        if dp == T::zero() {
            return Err(DomainError::DegenerateBeliefs);
        }
        let slope = (second.1 - first.1) / dp;
        Ok(Self { intercept: first.1 - slope * first.0, slope })
    }

    /// Aversion and sensitivity implied by this weighting under the six-event hedge.
    pub fn indices(&self) -> (T, T) {
        ((T::one() - self.slope) / T::two() - self.intercept, self.slope)
    }
}

/// Decision weight of a subjective probability.
pub fn decision_weight<T: Scalar>(p: T, w: &NeoAdditiveWeighting<T>) -> Result<T, DomainError> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(DomainError::ProbabilityOutOfRange { value: p.to_f64() });
    }
    Ok(w.linear(p).clamp_unit())
}

/// Intercept `ℓ = (1 − s)/2 − AA` of the weighting with the given indices.
pub fn intercept_from_profile<T: Scalar>(aversion: T, sensitivity: T) -> T {
    (T::one() - sensitivity) / T::two() - aversion
}

/// Structural parameters of one decision maker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityProfile<T> {
    pub aversion: T,
    pub sensitivity: T,
    pub error_sd: T,
}

impl<T: Scalar> AmbiguityProfile<T> {
    pub fn new(aversion: T, sensitivity: T, error_sd: T) -> Self {
        Self { aversion, sensitivity, error_sd }
    }

    pub fn neutral(error_sd: T) -> Self {
        Self { aversion: T::zero(), sensitivity: T::one(), error_sd }
    }

    pub fn intercept(&self) -> T {
        intercept_from_profile(self.aversion, self.sensitivity)
    }

    pub fn weighting(&self) -> NeoAdditiveWeighting<T> {
        NeoAdditiveWeighting::new(self.intercept(), self.sensitivity)
    }

    pub fn from_weighting(w: &NeoAdditiveWeighting<T>, error_sd: T) -> Self {
        let (aversion, sensitivity) = w.indices();
        Self { aversion, sensitivity, error_sd }
    }

    /// Checks `0 ≤ s ≤ max_sensitivity` and `σ > 0`. The upper bound is a
    /// caller choice; nothing in the model forbids `s > 1`.
    pub fn validate(&self, max_sensitivity: T) -> Result<(), DomainError> {
        if self.sensitivity < T::zero() || self.sensitivity > max_sensitivity {
            return Err(DomainError::SensitivityOutOfRange {
                value: self.sensitivity.to_f64(),
                max: max_sensitivity.to_f64(),
            });
        }
        if !(self.error_sd > T::zero()) {
            return Err(DomainError::NonPositiveErrorSd { value: self.error_sd.to_f64() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn neutral_weighting_is_identity() {
        let w = NeoAdditiveWeighting::<f64>::identity();
        assert_eq!(decision_weight(0.4, &w).unwrap(), 0.4);
    }

    #[test]
    fn investor_weights_exact() {
        let a = NeoAdditiveWeighting::new(r(1, 10), r(1, 2));
        assert_eq!(a.weight(r(2, 5)).unwrap(), r(3, 10));
        assert_eq!(a.weight(r(3, 5)).unwrap(), r(2, 5));
        let b = NeoAdditiveWeighting::new(r(-1, 10), r(3, 4));
        assert_eq!(b.weight(r(2, 5)).unwrap(), r(1, 5));
        assert_eq!(b.weight(r(3, 5)).unwrap(), r(7, 20));
    }

    #[test]
    fn weight_rejects_out_of_range_and_clamps() {
        let w = NeoAdditiveWeighting::new(0.4, 1.0);
        assert!(decision_weight(1.2, &w).is_err());
        assert!(decision_weight(-0.1, &w).is_err());
        assert!(decision_weight(f64::NAN, &w).is_err());
        assert_eq!(decision_weight(0.9, &w).unwrap(), 1.0);
        let low = NeoAdditiveWeighting::new(-0.3, 0.5);
        assert_eq!(decision_weight(0.2, &low).unwrap(), 0.0);
    }

    #[test]
    fn intercepts_from_profiles() {
        assert_eq!(intercept_from_profile(r(0, 1), r(1, 1)), r(0, 1));
        assert_eq!(intercept_from_profile(r(3, 20), r(1, 2)), r(1, 10));
        assert_eq!(intercept_from_profile(r(9, 40), r(3, 4)), r(-1, 10));
    }

    #[test]
    fn beliefs_validate_simplex() {
        assert!(BeliefVector::new([0.2, 0.3, 0.5], WaveId(1)).is_ok());
        assert!(BeliefVector::new([0.2, 0.3, 0.6], WaveId(1)).is_err());
        assert!(BeliefVector::new([-0.1, 0.6, 0.5], WaveId(1)).is_err());
        let b = BeliefVector::new([r(1, 5), r(3, 10), r(1, 2)], WaveId(2)).unwrap();
        assert_eq!(b.probability(Event::LowHigh), r(7, 10));
        let composite_sum: Rational64 = Event::COMPOSITE.iter().map(|&e| b.probability(e)).sum();
        assert_eq!(composite_sum, r(2, 1));
    }

    #[test]
    fn profile_validation_bounds() {
        assert!(AmbiguityProfile::new(0.0, 1.2, 0.1).validate(1.5).is_ok());
        assert!(AmbiguityProfile::new(0.0, 1.2, 0.1).validate(1.0).is_err());
        assert!(AmbiguityProfile::new(0.0, -0.1, 0.1).validate(1.5).is_err());
        assert!(AmbiguityProfile::new(0.0, 0.5, 0.0).validate(1.5).is_err());
    }
}
