//! Extended real numbers for energies with indicator terms.

use std::fmt;
use std::ops::{Add, Neg, Sub};

/// A value in `R ∪ {+∞, -∞}`.
///
/// Addition is total: `+∞` absorbs `-∞`, which is the convention for
/// minimization (a primal energy that is infeasible stays infeasible, and a
/// duality gap `I - D` with `I = +∞` or `D = -∞` is `+∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
    NegInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Lossy conversion to `f64` with infinities mapped to `±inf`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::NegInf => f64::NEG_INFINITY,
        }
    }

    /// `0` if `feasible`, `+∞` otherwise.
    pub fn indicator(feasible: bool) -> Self {
        if feasible {
            ExtReal::ZERO
        } else {
            ExtReal::PosInf
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, rhs) {
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Finite(a), Finite(b)) => Finite(a + b),
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::Finite(rhs)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::NegInf => ExtReal::PosInf,
        }
    }
}

impl Sub for ExtReal {
    type Output = ExtReal;

    fn sub(self, rhs: ExtReal) -> ExtReal {
        self + (-rhs)
    }
}

impl std::iter::Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> Self {
        iter.fold(ExtReal::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
            ExtReal::NegInf => write!(f, "-inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::ExtReal::{self, *};

    #[test]
    fn arithmetic_is_total() {
        assert_eq!(Finite(1.0) + Finite(2.0), Finite(3.0));
        assert_eq!(PosInf + NegInf, PosInf);
        assert_eq!(PosInf - PosInf, PosInf);
        assert_eq!(Finite(1.0) - NegInf, PosInf);
        assert_eq!(NegInf + Finite(-4.0), NegInf);
        assert_eq!(-NegInf, PosInf);
        let s: ExtReal = [Finite(1.0), Finite(2.5)].into_iter().sum();
        assert_eq!(s, Finite(3.5));
    }

    #[test]
    fn conversions() {
        assert_eq!(ExtReal::from(f64::INFINITY), PosInf);
        assert_eq!(NegInf.to_f64(), f64::NEG_INFINITY);
        assert_eq!(Finite(2.0).finite(), Some(2.0));
        assert_eq!(ExtReal::indicator(false), PosInf);
    }
}
