//! Numeric abstractions shared by the domain math.
//!
//! [`Scalar`] is the minimal field-like bound the hedge identities need, so
//! they evaluate exactly over rationals as well as over floats. [`Real`] adds
//! the transcendental pieces (normal distribution function and friends) the
//! likelihood needs and is implemented for `f32` and `f64`.

use std::fmt;

use num_rational::Rational64;
use num_traits::{Float, FloatConst, Num, ToPrimitive};

pub trait Scalar:
    Num + Copy + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Nearest representable value; rationals use a continued-fraction approximation.
    fn from_f64(value: f64) -> Self;

    fn to_f64(self) -> f64;

    /// Slack allowed when checking that beliefs sum to one.
    fn simplex_tolerance() -> Self;

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn clamp_unit(self) -> Self {
        if self < Self::zero() {
            Self::zero()
        } else if self > Self::one() {
            Self::one()
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn simplex_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn from_f64(value: f64) -> Self {
        value as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn simplex_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for Rational64 {
    fn from_f64(value: f64) -> Self {
        Rational64::approximate_float(value).unwrap_or_else(|| Rational64::from_integer(0))
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
    fn simplex_tolerance() -> Self {
        Rational64::from_integer(0)
    }
}

/// Floating-point scalars with the standard normal distribution attached.
pub trait Real: Scalar + Float + FloatConst {
    fn norm_pdf(self) -> Self;
    fn norm_cdf(self) -> Self;
    /// Upper tail `1 - Φ(z)`, accurate far into the tail.
    fn norm_sf(self) -> Self;
    fn ln_norm_pdf(self) -> Self;
    /// `ln(1 - Φ(z))` without underflow for large `z`.
    fn ln_norm_sf(self) -> Self;
    fn norm_quantile(self) -> Self;
}

impl Real for f64 {
    fn norm_pdf(self) -> Self {
        normal::pdf(self)
    }
    fn norm_cdf(self) -> Self {
        normal::sf(-self)
    }
    fn norm_sf(self) -> Self {
        normal::sf(self)
    }
    fn ln_norm_pdf(self) -> Self {
        normal::ln_pdf(self)
    }
    fn ln_norm_sf(self) -> Self {
        normal::ln_sf(self)
    }
    fn norm_quantile(self) -> Self {
        normal::quantile(self)
    }
}

impl Real for f32 {
    fn norm_pdf(self) -> Self {
        normal::pdf(f64::from(self)) as f32
    }
    fn norm_cdf(self) -> Self {
        normal::sf(-f64::from(self)) as f32
    }
    fn norm_sf(self) -> Self {
        normal::sf(f64::from(self)) as f32
    }
    fn ln_norm_pdf(self) -> Self {
        normal::ln_pdf(f64::from(self)) as f32
    }
    fn ln_norm_sf(self) -> Self {
        normal::ln_sf(f64::from(self)) as f32
    }
    fn norm_quantile(self) -> Self {
        normal::quantile(f64::from(self)) as f32
    }
}

/// Standard normal helpers on `f64`.
pub mod normal {
    use statrs::distribution::{ContinuousCDF, Normal};
    use statrs::function::erf::erfc;

    const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

    pub fn pdf(z: f64) -> f64 {
        if z.is_infinite() {
            return 0.0;
        }
        (-0.5 * z * z - LN_SQRT_2PI).exp()
    }

    pub fn ln_pdf(z: f64) -> f64 {
        -0.5 * z * z - LN_SQRT_2PI
    }

    pub fn cdf(z: f64) -> f64 {
        sf(-z)
    }

    pub fn sf(z: f64) -> f64 {
        if z == f64::INFINITY {
            0.0
        } else if z == f64::NEG_INFINITY {
            1.0
        } else {
            0.5 * erfc(z * std::f64::consts::FRAC_1_SQRT_2)
        }
    }

    pub fn ln_sf(z: f64) -> f64 {
        if z == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        if z < 30.0 {
            return sf(z).ln();
        }
        // Asymptotic Mills-ratio expansion; erfc underflows past ~37.
        let inv2 = 1.0 / (z * z);
        let series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
        ln_pdf(z) - z.ln() + series.ln()
    }

    pub fn ln_cdf(z: f64) -> f64 {
        ln_sf(-z)
    }

    pub fn quantile(p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        Normal::standard().inverse_cdf(p)
    }

    /// `ln(Φ(b) - Φ(a))` for `a < b`, stable in both tails.
    pub fn ln_interval_mass(a: f64, b: f64) -> f64 {
        if a >= b {
            return f64::NEG_INFINITY;
        }
        if a >= 0.0 {
            ln_tail_difference(a, b)
        } else if b <= 0.0 {
            ln_tail_difference(-b, -a)
        } else {
            (-(sf(b) + sf(-a))).ln_1p()
        }
    }

    /// `ln(sf(lo) - sf(hi))` for `0 <= lo < hi`.
    fn ln_tail_difference(lo: f64, hi: f64) -> f64 {
        let ln_lo = ln_sf(lo);
        let ln_hi = ln_sf(hi);
        if ln_hi == f64::NEG_INFINITY {
            return ln_lo;
        }
        ln_lo + (-(ln_hi - ln_lo).exp()).ln_1p()
    }
}
