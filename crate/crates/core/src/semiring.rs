//! Log and tropical semiring arithmetic over natural-log weights.
//!
//! Weights are log-probabilities: larger is better, `0.0` is the multiplicative
//! identity and [`Weight::ZERO`] (negative infinity) is the additive identity.

use std::fmt;
use std::ops::{Add, AddAssign};

/// A natural-log weight. `Weight::ZERO` stands for log(0).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Weight(pub f64);

impl Weight {
    /// Additive identity of both semirings, log(0).
    pub const ZERO: Weight = Weight(f64::NEG_INFINITY);
    /// Multiplicative identity, log(1).
    pub const ONE: Weight = Weight(0.0);

    #[inline]
    pub fn new(value: f64) -> Self {
        Weight(value)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Log-semiring ⊕.
    #[inline]
    pub fn log_add(self, other: Weight) -> Weight {
        log_add(self, other)
    }

    /// Tropical ⊕ (max).
    #[inline]
    pub fn tropical_add(self, other: Weight) -> Weight {
        tropical_add(self, other)
    }

    /// ⊗ shared by both semirings.
    #[inline]
    pub fn times(self, other: Weight) -> Weight {
        times(self, other)
    }

    /// Probability `exp(w)`.
    #[inline]
    pub fn prob(self) -> f64 {
        self.0.exp()
    }
}

impl From<f64> for Weight {
    fn from(v: f64) -> Self {
        Weight(v)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Weight {
    type Output = Weight;

    /// `+` is ⊗ (log-domain multiplication).
    fn add(self, rhs: Weight) -> Weight {
        times(self, rhs)
    }
}

impl AddAssign for Weight {
    fn add_assign(&mut self, rhs: Weight) {
        *self = times(*self, rhs);
    }
}

/// `ln(e^a + e^b)` in the `max + log1p` form. Short-circuits on ZERO so that
/// `(-inf) - (-inf)` is never evaluated.
#[inline]
pub fn log_add(a: Weight, b: Weight) -> Weight {
    debug_assert!(!a.0.is_nan() && !b.0.is_nan(), "NaN weight");
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    let (hi, lo) = if a.0 >= b.0 { (a.0, b.0) } else { (b.0, a.0) };
    if hi == f64::INFINITY {
        return Weight(hi);
    }
    Weight(hi + (lo - hi).exp().ln_1p())
}

#[inline]
pub fn tropical_add(a: Weight, b: Weight) -> Weight {
    if a.0 >= b.0 {
        a
    } else {
        b
    }
}

/// Real addition, with ZERO as annihilator.
#[inline]
pub fn times(a: Weight, b: Weight) -> Weight {
    if a.is_zero() || b.is_zero() {
        Weight::ZERO
    } else {
        Weight(a.0 + b.0)
    }
}

/// ⊕-sum of an iterator of weights in the log semiring.
pub fn log_sum<I: IntoIterator<Item = Weight>>(weights: I) -> Weight {
    weights.into_iter().fold(Weight::ZERO, log_add)
}

/// Stable `log(sum(exp(row)))` for a slice of raw log values.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
