//! Log-domain reals with separately counted infinite contributions.
//!
//! A log of a ratio of products is represented as `(fin, inf)`: `inf` is the
//! number of zero factors in the denominator minus the number in the
//! numerator, `fin` the log of the product of the nonzero factors. Values
//! compare lexicographically on `(inf, fin)`, so any positive `inf` beats
//! every finite sum.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default)]
pub struct ExtendedReal {
    pub fin: f64,
    pub inf: i32,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal { fin: 0.0, inf: 0 };

    pub const fn new(fin: f64, inf: i32) -> Self {
        ExtendedReal { fin, inf }
    }

    pub const fn finite(fin: f64) -> Self {
        ExtendedReal { fin, inf: 0 }
    }

    /// `ln x` for `x >= 0`; `ln 0` is one unit of negative infinity.
    #[inline]
    pub fn ln(x: f64) -> Self {
        debug_assert!(x >= 0.0, "log of negative factor {x}");
        if x > 0.0 {
            ExtendedReal { fin: x.ln(), inf: 0 }
        } else {
            ExtendedReal { fin: 0.0, inf: -1 }
        }
    }

    /// `c * self`, counting infinite contributions `c` times.
    pub fn scale(self, c: i32) -> Self {
        ExtendedReal {
            fin: self.fin * f64::from(c),
            inf: self.inf * c,
        }
    }

    pub fn is_finite(self) -> bool {
        self.inf == 0
    }

    /// Plain real with each infinite unit replaced by `z_inf`.
    pub fn materialize(self, z_inf: f64) -> f64 {
        self.fin + f64::from(self.inf) * z_inf
    }
}

impl PartialEq for ExtendedReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// `fin` is never NaN (only logs of strictly positive factors are taken), so
// falling back to total_cmp only matters for malformed inputs.
impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.inf.cmp(&other.inf).then_with(|| {
            self.fin
                .partial_cmp(&other.fin)
                .unwrap_or_else(|| self.fin.total_cmp(&other.fin))
        })
    }
}

impl Add for ExtendedReal {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        ExtendedReal {
            fin: self.fin + rhs.fin,
            inf: self.inf + rhs.inf,
        }
    }
}

impl AddAssign for ExtendedReal {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.fin += rhs.fin;
        self.inf += rhs.inf;
    }
}

impl Sub for ExtendedReal {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl SubAssign for ExtendedReal {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.fin -= rhs.fin;
        self.inf -= rhs.inf;
    }
}

impl Neg for ExtendedReal {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        ExtendedReal {
            fin: -self.fin,
            inf: -self.inf,
        }
    }
}

impl Sum for ExtendedReal {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExtendedReal::ZERO, Add::add)
    }
}

impl From<f64> for ExtendedReal {
    fn from(fin: f64) -> Self {
        ExtendedReal::finite(fin)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.inf {
            0 => write!(f, "{}", self.fin),
            i => write!(f, "{}{:+}inf", self.fin, i),
        }
    }
}
