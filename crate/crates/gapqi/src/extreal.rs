//! Arithmetic on `[0, +infinity]` with the convention `0 * inf = inf * 0 = 0`.
//!
//! IEEE doubles would turn `0.0 * INFINITY` into NaN, which silently poisons
//! every identity involving `zeta * zeta^{-1}`. The infinite value is therefore
//! a separate tag, never an IEEE infinity.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtRealError {
    /// Inversion of zero is excluded: partition functions are strictly positive.
    #[error("inverse of zero is undefined")]
    InverseOfZero,
}

/// A nonnegative extended real number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

pub use ExtReal::{Finite, Infinity};

impl ExtReal {
    pub const ZERO: ExtReal = Finite(0.0);
    pub const ONE: ExtReal = Finite(1.0);

    /// Wraps a finite nonnegative value.
    ///
    /// Panics on negative, NaN or IEEE-infinite input; those are construction
    /// bugs, not data.
    pub fn finite(v: f64) -> ExtReal {
        assert!(
            v.is_finite() && v >= 0.0,
            "ExtReal::finite requires a finite nonnegative value, got {v}"
        );
        Finite(v)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Infinity)
    }

    pub fn is_zero(self) -> bool {
        self == Finite(0.0)
    }

    /// The finite value, if any.
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Finite(v) => Some(v),
            Infinity => None,
        }
    }

    /// Multiplicative inverse with `inf^{-1} = 0`. Zero has no inverse.
    pub fn inv(self) -> Result<ExtReal, ExtRealError> {
        match self {
            Finite(v) if v == 0.0 => Err(ExtRealError::InverseOfZero),
            Finite(v) => Ok(Finite(1.0 / v)),
            Infinity => Ok(Finite(0.0)),
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (Finite(a), Finite(b)) => {
                let s = a + b;
                if s.is_finite() {
                    Finite(s)
                } else {
                    // Overflow of two finite summands saturates.
                    Infinity
                }
            }
            _ => Infinity,
        }
    }
}

impl Mul for ExtReal {
    type Output = ExtReal;

    fn mul(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (Finite(a), Finite(b)) => {
                let p = a * b;
                if p.is_finite() {
                    Finite(p)
                } else {
                    Infinity
                }
            }
            (Finite(v), Infinity) | (Infinity, Finite(v)) => {
                if v == 0.0 {
                    ExtReal::ZERO
                } else {
                    Infinity
                }
            }
            (Infinity, Infinity) => Infinity,
        }
    }
}

impl Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> ExtReal {
        iter.fold(ExtReal::ZERO, |acc, v| acc + v)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &ExtReal) -> Option<Ordering> {
        Some(self.cmp_ext(*other))
    }
}

impl ExtReal {
    /// Total order: infinity above every finite value; finite values by value.
    pub fn cmp_ext(self, other: ExtReal) -> Ordering {
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(&b).expect("no NaN in ExtReal"),
            (Finite(_), Infinity) => Ordering::Less,
            (Infinity, Finite(_)) => Ordering::Greater,
            (Infinity, Infinity) => Ordering::Equal,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> ExtReal {
        ExtReal::finite(v)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(v) => write!(f, "{v}"),
            Infinity => write!(f, "inf"),
        }
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`, with infinities equal only to each other.
pub fn approx_eq(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    match (a, b) {
        (Finite(x), Finite(y)) => approx_eq_f64(x, y, tol),
        (Infinity, Infinity) => true,
        _ => false,
    }
}

/// Mixed absolute/relative comparison used throughout the verification suite.
pub fn approx_eq_f64(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1.0_f64.max(a.abs()).max(b.abs())
}
