use serde::{Deserialize, Serialize};

use super::{BeliefVector, DomainError, Event, EventMap, NeoAdditiveWeighting};
use crate::scalar::Scalar;

/// Closed-form index estimates from one complete set of matching probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentIndices<T> {
    pub aversion: T,
    pub sensitivity: T,
}

/// Direction indicated by the matching probabilities of a complementary pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeSignal {
    Averse,
    Neutral,
    Seeking,
}

impl HedgeSignal {
    /// Pair sums below one (beyond `tolerance`) signal aversion, above one tolerance.
    pub fn classify<T: Scalar>(pair_sum: T, tolerance: T) -> Self {
        if pair_sum < T::one() - tolerance {
            HedgeSignal::Averse
        } else if pair_sum > T::one() + tolerance {
            HedgeSignal::Seeking
        } else {
            HedgeSignal::Neutral
        }
    }
}

fn checked<T: Scalar>(m: &EventMap<T>, event: Event) -> Result<T, DomainError> {
    let v = m.require(event)?;
    if !(v >= T::zero() && v <= T::one()) {
        return Err(DomainError::ProbabilityOutOfRange { value: v.to_f64() });
    }
    Ok(v)
}

fn all_six<T: Scalar>(m: &EventMap<T>) -> Result<[T; 6], DomainError> {
    let mut out = [T::zero(); 6];
    for e in Event::ALL {
        out[e.index()] = checked(m, e)?;
    }
    Ok(out)
}

/// `AA = 1/2 − mean(m)` and `s = Σ composite − Σ singular`.
///
/// Exact whenever `m` equals the unclipped linear weights of some belief
/// vector, whatever those beliefs are.
pub fn moment_indices<T: Scalar>(m: &EventMap<T>) -> Result<MomentIndices<T>, DomainError> {
    let v = all_six(m)?;
    let singular = v[0] + v[1] + v[2];
    let composite = v[3] + v[4] + v[5];
    let six = T::two() * (T::two() + T::one());
    Ok(MomentIndices {
        aversion: T::half() - (singular + composite) / six,
        sensitivity: composite - singular,
    })
}

/// `m(E) + m(not E)` for the low, medium and high singular events, in that order.
pub fn hedge_pair_sums<T: Scalar>(m: &EventMap<T>) -> Result<[T; 3], DomainError> {
    let v = all_six(m)?;
    Ok(Event::SINGULAR.map(|e| v[e.index()] + v[e.complement().index()]))
}

/// Noise-free, unclipped matching values `ℓ + s·p(E)` for every event.
pub fn linear_matching_values<T: Scalar>(
    weighting: &NeoAdditiveWeighting<T>,
    beliefs: &BeliefVector<T>,
) -> EventMap<T> {
    EventMap::from_fn(|e| weighting.linear(beliefs.probability(e)))
}
