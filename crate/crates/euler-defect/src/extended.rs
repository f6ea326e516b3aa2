//! Values in `[0, +inf]`.
//!
//! Energies and relative energies take the value `+inf` outside their
//! domain (negative density, vacuum with leftover momentum, ...). That
//! infinity is structural, not a float overflow, so it gets a tag of its
//! own instead of riding on `f64::INFINITY`, and NaN is unrepresentable.

use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinity,
}

use ExtendedReal::{Finite, Infinity};

impl ExtendedReal {
    pub const ZERO: ExtendedReal = Finite(0.0);

    /// Wraps a finite nonnegative value. NaN, infinities and negative
    /// inputs are domain errors, not representable states.
    pub fn finite(v: f64) -> crate::Result<Self> {
        if v.is_nan() {
            return Err(crate::Error::Nan("extended real"));
        }
        if v.is_infinite() {
            return Err(crate::Error::InvalidState(
                "use ExtendedReal::Infinity for infinite values".into(),
            ));
        }
        if v < 0.0 {
            return Err(crate::Error::InvalidState(format!(
                "negative value {v} not in [0, inf]"
            )));
        }
        Ok(Finite(v))
    }

    /// For quantities that are nonnegative in exact arithmetic but may
    /// round to a tiny negative: values in `[-neg_tol, 0)` clamp to zero,
    /// anything below `-neg_tol` is a genuine violation and errors.
    pub fn finite_signed(v: f64, neg_tol: f64) -> crate::Result<Self> {
        if v.is_nan() {
            return Err(crate::Error::Nan("extended real"));
        }
        if v < -neg_tol {
            return Err(crate::Error::InvalidState(format!(
                "value {v} below -{neg_tol}; expected nonnegative"
            )));
        }
        Ok(Finite(v.max(0.0)))
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    /// Projects to `f64`, mapping the tag to `f64::INFINITY`. Intended
    /// for printing and comparisons against thresholds only.
    pub fn value(self) -> f64 {
        match self {
            Finite(v) => v,
            Infinity => f64::INFINITY,
        }
    }

    /// Measure-theoretic scaling: `w * inf = inf` for `w > 0`, and
    /// `0 * inf = 0`.
    pub fn scale(self, w: f64) -> Self {
        debug_assert!(w >= 0.0 && w.is_finite());
        match self {
            Finite(v) => Finite(w * v),
            Infinity if w == 0.0 => Finite(0.0),
            Infinity => Infinity,
        }
    }
}

impl std::ops::Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            _ => Infinity,
        }
    }
}

impl std::iter::Sum for ExtendedReal {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (Finite(_), Infinity) => Ordering::Less,
            (Infinity, Finite(_)) => Ordering::Greater,
            (Infinity, Infinity) => Ordering::Equal,
        })
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(v) => write!(f, "{v}"),
            Infinity => write!(f, "inf"),
        }
    }
}

impl serde::Serialize for ExtendedReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_negative() {
        assert!(ExtendedReal::finite(f64::NAN).is_err());
        assert!(ExtendedReal::finite(-1.0).is_err());
        assert!(ExtendedReal::finite(f64::INFINITY).is_err());
        assert!(ExtendedReal::finite(0.0).is_ok());
    }

    #[test]
    fn clamping_window() {
        assert_eq!(
            ExtendedReal::finite_signed(-1e-15, 1e-12).unwrap(),
            ExtendedReal::ZERO
        );
        assert!(ExtendedReal::finite_signed(-1e-6, 1e-12).is_err());
    }

    #[test]
    fn ordering_and_arithmetic() {
        let two = ExtendedReal::finite(2.0).unwrap();
        let three = ExtendedReal::finite(3.0).unwrap();
        assert!(two < three);
        assert!(two < Infinity);
        assert_eq!(two + three, ExtendedReal::finite(5.0).unwrap());
        assert_eq!(two + Infinity, Infinity);
        assert_eq!(Infinity.scale(0.0), ExtendedReal::ZERO);
        assert_eq!(Infinity.scale(0.5), Infinity);
        assert_eq!(two.scale(0.5), ExtendedReal::finite(1.0).unwrap());
    }
}
