//! Double-double arithmetic for boundary-sensitive comparisons.
//!
//! Only the handful of operations needed to evaluate integer combinations
//! `sum_j a_j * n_j` (with `n_j` exact in f64) to ~106 bits are provided.

use std::ops::{Add, Mul, Neg, Sub};

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn floor(self) -> f64 {
        let f = self.hi.floor();
        if f == self.hi {
            f + self.lo.floor()
        } else {
            f
        }
    }

    pub fn ceil(self) -> f64 {
        -(-self).floor()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, rhs: f64) -> Dd {
        let (s, e) = two_sum(self.hi, rhs);
        let (hi, lo) = fast_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, rhs: f64) -> Dd {
        self + (-rhs)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, rhs: f64) -> Dd {
        let (p, e) = two_prod(self.hi, rhs);
        let (hi, lo) = fast_two_sum(p, e + self.lo * rhs);
        Dd { hi, lo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_times_three_is_below_one() {
        let x = Dd::prod(3.0, 1.0 / 3.0);
        // fl(1/3) < 1/3, so the exact product falls just short of 1.
        assert_eq!(x.hi, 1.0);
        assert!(x.lo < 0.0);
        assert_eq!(x.floor(), 0.0);
        assert_eq!(x.ceil(), 1.0);
    }

    #[test]
    fn cancellation_is_exact() {
        let s = 0.123_456_789_012_345_67_f64;
        let q = 1_234_567.0;
        let x = Dd::prod(q, s) - (q * s).floor();
        let direct = (q * s) - (q * s).floor();
        assert!((x.to_f64() - direct).abs() < 1e-9);
        assert!(x.to_f64() >= 0.0 && x.to_f64() < 1.0);
    }

    #[test]
    fn floor_of_integers() {
        assert_eq!(Dd::new(5.0).floor(), 5.0);
        assert_eq!((Dd::new(5.0) + (-1e-30)).floor(), 4.0);
        assert_eq!(Dd::new(-2.5).floor(), -3.0);
    }
}
