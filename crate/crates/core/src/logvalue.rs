//! Extended nonnegative reals stored as natural logarithms.
//!
//! Weights such as `2^((k*j)^i)` leave the range of `f64` at tiny indices, so
//! every weight, seminorm and ratio in the crate is carried as a [`LogValue`].
//! Zero is `NegInfinity`, `+∞` is `PosInfinity`, and every other value is the
//! finite natural logarithm of a positive real.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

/// A nonnegative extended real `x ∈ [0, +∞]` represented by `ln x`.
///
/// The derived ordering is the ordering of the represented values: variants
/// are declared in increasing order and `Finite` compares its logarithm.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "Repr", try_from = "Repr")]
pub enum LogValue {
    /// The value `0`.
    NegInfinity,
    /// A positive finite value with the given natural logarithm.
    Finite(f64),
    /// The value `+∞`.
    PosInfinity,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue::NegInfinity;
    pub const ONE: LogValue = LogValue::Finite(0.0);
    pub const INFINITY: LogValue = LogValue::PosInfinity;

    /// Builds a value from its logarithm. `±∞` map onto the tags.
    ///
    /// # Panics
    /// On NaN; a NaN log-magnitude always signals a bug upstream.
    pub fn from_log(log: f64) -> LogValue {
        assert!(!log.is_nan(), "LogValue::from_log: NaN log-magnitude");
        if log == f64::NEG_INFINITY {
            LogValue::NegInfinity
        } else if log == f64::INFINITY {
            LogValue::PosInfinity
        } else {
            LogValue::Finite(log)
        }
    }

    /// Builds a value from a nonnegative real. Returns `None` for negative or NaN input.
    pub fn from_value(x: f64) -> Option<LogValue> {
        if x.is_nan() || x < 0.0 {
            None
        } else if x == 0.0 {
            Some(LogValue::NegInfinity)
        } else {
            Some(LogValue::from_log(x.ln()))
        }
    }

    /// Natural logarithm of the value, with `0 ↦ -∞` and `+∞ ↦ +∞`.
    pub fn ln(self) -> f64 {
        match self {
            LogValue::NegInfinity => f64::NEG_INFINITY,
            LogValue::Finite(l) => l,
            LogValue::PosInfinity => f64::INFINITY,
        }
    }

    /// The represented value as a float (may overflow to `inf` or underflow to `0`).
    pub fn value(self) -> f64 {
        self.ln().exp()
    }

    pub fn is_zero(self) -> bool {
        matches!(self, LogValue::NegInfinity)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, LogValue::PosInfinity)
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    /// `self + other` computed with the log-sum-exp identity.
    pub fn add(self, other: LogValue) -> LogValue {
        match (self, other) {
            (LogValue::PosInfinity, _) | (_, LogValue::PosInfinity) => LogValue::PosInfinity,
            (LogValue::NegInfinity, x) | (x, LogValue::NegInfinity) => x,
            (LogValue::Finite(a), LogValue::Finite(b)) => {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                LogValue::from_log(hi + (lo - hi).exp().ln_1p())
            }
        }
    }

    /// `self - other` for `self ≥ other`; returns `None` when the difference would be negative.
    ///
    /// `∞ - ∞` is reported as `None` as well.
    pub fn checked_sub(self, other: LogValue) -> Option<LogValue> {
        match (self, other) {
            (x, LogValue::NegInfinity) => Some(x),
            (LogValue::PosInfinity, LogValue::Finite(_)) => Some(LogValue::PosInfinity),
            (LogValue::PosInfinity, LogValue::PosInfinity) => None,
            (LogValue::NegInfinity, _) | (LogValue::Finite(_), LogValue::PosInfinity) => None,
            (LogValue::Finite(a), LogValue::Finite(b)) => {
                if b > a {
                    None
                } else if a == b {
                    Some(LogValue::NegInfinity)
                } else {
                    Some(LogValue::from_log(a + (-(b - a).exp_m1()).ln()))
                }
            }
        }
    }

    /// `self^e` for a real exponent, with `0^0 = ∞^0 = 1`.
    pub fn powf(self, e: f64) -> LogValue {
        if e == 0.0 {
            return LogValue::ONE;
        }
        match self {
            LogValue::NegInfinity => {
                if e > 0.0 {
                    LogValue::NegInfinity
                } else {
                    LogValue::PosInfinity
                }
            }
            LogValue::PosInfinity => {
                if e > 0.0 {
                    LogValue::PosInfinity
                } else {
                    LogValue::NegInfinity
                }
            }
            LogValue::Finite(l) => LogValue::from_log(l * e),
        }
    }

    pub fn sqrt(self) -> LogValue {
        self.powf(0.5)
    }

    pub fn max(self, other: LogValue) -> LogValue {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: LogValue) -> LogValue {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Total ordering; the representation never holds NaN.
    pub fn total_cmp(&self, other: &LogValue) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    /// Sum of a sequence in a fixed left-to-right order.
    pub fn sum<I: IntoIterator<Item = LogValue>>(iter: I) -> LogValue {
        let mut acc = LogSumExp::default();
        for v in iter {
            acc.push(v);
        }
        acc.total()
    }

    /// Maximum of a sequence; `0` for an empty sequence.
    pub fn sup<I: IntoIterator<Item = LogValue>>(iter: I) -> LogValue {
        iter.into_iter().fold(LogValue::ZERO, LogValue::max)
    }
}

impl Default for LogValue {
    fn default() -> Self {
        LogValue::ZERO
    }
}

/// Streaming log-sum-exp accumulator with a running rescaling pivot.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    pivot: f64,
    scaled: f64,
    infinite: bool,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp { pivot: f64::NEG_INFINITY, scaled: 0.0, infinite: false }
    }
}

impl LogSumExp {
    pub fn push(&mut self, v: LogValue) {
        match v {
            LogValue::NegInfinity => {}
            LogValue::PosInfinity => self.infinite = true,
            LogValue::Finite(l) => {
                if self.pivot == f64::NEG_INFINITY {
                    self.pivot = l;
                    self.scaled = 1.0;
                } else if l <= self.pivot {
                    self.scaled += (l - self.pivot).exp();
                } else {
                    self.scaled = self.scaled * (self.pivot - l).exp() + 1.0;
                    self.pivot = l;
                }
            }
        }
    }

    pub fn total(&self) -> LogValue {
        if self.infinite {
            LogValue::PosInfinity
        } else if self.pivot == f64::NEG_INFINITY {
            LogValue::NegInfinity
        } else {
            LogValue::from_log(self.pivot + self.scaled.ln())
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    /// Product; `0 · ∞ = 0`.
    fn mul(self, rhs: LogValue) -> LogValue {
        match (self, rhs) {
            (LogValue::NegInfinity, _) | (_, LogValue::NegInfinity) => LogValue::NegInfinity,
            (LogValue::PosInfinity, _) | (_, LogValue::PosInfinity) => LogValue::PosInfinity,
            (LogValue::Finite(a), LogValue::Finite(b)) => LogValue::from_log(a + b),
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;

    /// Quotient with `a/0 = +∞` for every `a ≥ 0`, so that `a ≥ bc ⟺ a/b ≥ c`.
    /// `∞/∞` is `+∞`.
    fn div(self, rhs: LogValue) -> LogValue {
        match (self, rhs) {
            (_, LogValue::NegInfinity) => LogValue::PosInfinity,
            (LogValue::PosInfinity, _) => LogValue::PosInfinity,
            (_, LogValue::PosInfinity) => LogValue::NegInfinity,
            (LogValue::NegInfinity, _) => LogValue::NegInfinity,
            (LogValue::Finite(a), LogValue::Finite(b)) => LogValue::from_log(a - b),
        }
    }
}

impl fmt::Debug for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogValue::NegInfinity => write!(f, "exp(-inf)"),
            LogValue::Finite(l) => write!(f, "exp({l})"),
            LogValue::PosInfinity => write!(f, "exp(+inf)"),
        }
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogValue::NegInfinity => write!(f, "0"),
            LogValue::Finite(l) => write!(f, "e^{l}"),
            LogValue::PosInfinity => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Tag {
    Finite,
    NegInfinity,
    PosInfinity,
}

#[derive(Serialize, Deserialize)]
struct Repr {
    tag: Tag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_magnitude: Option<f64>,
}

impl From<LogValue> for Repr {
    fn from(v: LogValue) -> Repr {
        match v {
            LogValue::NegInfinity => Repr { tag: Tag::NegInfinity, log_magnitude: None },
            LogValue::Finite(l) => Repr { tag: Tag::Finite, log_magnitude: Some(l) },
            LogValue::PosInfinity => Repr { tag: Tag::PosInfinity, log_magnitude: None },
        }
    }
}

impl TryFrom<Repr> for LogValue {
    type Error = &'static str;

    fn try_from(r: Repr) -> Result<LogValue, Self::Error> {
        match (r.tag, r.log_magnitude) {
            (Tag::NegInfinity, _) => Ok(LogValue::NegInfinity),
            (Tag::PosInfinity, _) => Ok(LogValue::PosInfinity),
            (Tag::Finite, Some(l)) if l.is_finite() => Ok(LogValue::Finite(l)),
            (Tag::Finite, _) => Err("finite LogValue needs a finite log_magnitude"),
        }
    }
}
