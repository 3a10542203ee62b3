//! Belief-hedging ambiguity attitudes: adaptive elicitation, interval-censored
//! estimation, discrete-choice econometrics and the study pipeline.
//!
//! The algebra in [`domain`] and the likelihood in [`estimate`] are generic
//! over the scalar type. The aliases below fix the common choices.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod econometrics;
pub mod elicitation;
pub mod estimate;
pub mod optim;
pub mod pipeline;
pub mod scalar;
pub mod simulate;

use num_rational::Rational64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Profile = domain::AmbiguityProfile<f64>;
pub type Beliefs = domain::BeliefVector<f64>;
pub type Weighting = domain::NeoAdditiveWeighting<f64>;
pub type MatchingValues = domain::EventMap<f64>;
pub type Indices = domain::MomentIndices<f64>;

/// Exact-arithmetic counterparts for checking the hedge identities.
pub type ExactProfile = domain::AmbiguityProfile<Rational64>;
pub type ExactBeliefs = domain::BeliefVector<Rational64>;
pub type ExactMatchingValues = domain::EventMap<Rational64>;
pub type ExactIndices = domain::MomentIndices<Rational64>;
