use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Points closer than `TIE_REL * side` to a face are treated as lying on
/// that face, and the face's open/closed flag decides membership.
pub const TIE_REL: f64 = 1e-9;

/// Axis-aligned box `∏ ⟨lower_i, upper_i⟩` with per-endpoint flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_closed: Vec<bool>,
    pub upper_closed: Vec<bool>,
}

impl AxisBox {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        lower_closed: Vec<bool>,
        upper_closed: Vec<bool>,
    ) -> Result<Self> {
        let n = lower.len();
        if n == 0 || upper.len() != n || lower_closed.len() != n || upper_closed.len() != n {
            return Err(Error::InvalidArgument(
                "box fields have inconsistent lengths".into(),
            ));
        }
        for i in 0..n {
            if !(lower[i] < upper[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "box side {i} is [{}, {}]; need finite lower < upper",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(AxisBox {
            lower,
            upper,
            lower_closed,
            upper_closed,
        })
    }

    pub fn closed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        AxisBox::new(lower, upper, vec![true; n], vec![true; n])
    }

    /// `[0, s)^n`-style cube `[lo, hi]^n` with every side closed.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        AxisBox::closed(vec![lo; n], vec![hi; n])
    }

    /// `R_k = [0, r)^d × (r/τ, r]`.
    pub fn block(d: usize, r: f64, tau: f64) -> Result<Self> {
        let mut lower = vec![0.0; d];
        let mut upper = vec![r; d];
        let mut lc = vec![true; d];
        let mut uc = vec![false; d];
        lower.push(r / tau);
        upper.push(r);
        lc.push(false);
        uc.push(true);
        AxisBox::new(lower, upper, lc, uc)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn side(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
            .collect()
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![0.0; self.dim()])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| self.coord_ok(i, x[i] - self.lower[i], x[i] - self.upper[i]))
    }

    /// Membership for a point given in double-double precision.
    pub fn contains_dd(&self, x: &[Dd]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| {
                self.coord_ok(
                    i,
                    (x[i] - self.lower[i]).to_f64(),
                    (x[i] - self.upper[i]).to_f64(),
                )
            })
    }

    fn coord_ok(&self, i: usize, from_lower: f64, from_upper: f64) -> bool {
        let tol = TIE_REL * self.side(i);
        let lower_ok = if self.lower_closed[i] {
            from_lower >= -tol
        } else {
            from_lower > tol
        };
        let upper_ok = if self.upper_closed[i] {
            from_upper <= tol
        } else {
            from_upper < -tol
        };
        lower_ok && upper_ok
    }
}

/// Parses `lo,hi x lo,hi x …` into a closed box.
impl FromStr for AxisBox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for side in s.split(['x', 'X']) {
            let (a, b) = side.split_once(',').ok_or_else(|| {
                Error::InvalidArgument(format!("box side `{side}` is not `lo,hi`"))
            })?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad box bound `{v}`")))
            };
            lower.push(parse(a)?);
            upper.push(parse(b)?);
        }
        AxisBox::closed(lower, upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_are_honored() {
        let b = AxisBox::block(1, 1.0, 2.0).unwrap();
        assert!(b.contains(&[0.0, 1.0]));
        assert!(!b.contains(&[1.0, 1.0]));
        assert!(!b.contains(&[0.0, 0.5]));
        assert!(b.contains(&[0.999, 0.5000001]));
        // within the tie tolerance of a face counts as on the face
        assert!(b.contains(&[-1e-12, 1.0 + 1e-12]));
        assert!(!b.contains(&[1.0 - 1e-12, 0.7]));
    }

    #[test]
    fn parse_and_volume() {
        let b: AxisBox = "0,1.5x0,1.5".parse().unwrap();
        assert_eq!(b.dim(), 2);
        assert!((b.volume() - 2.25).abs() < 1e-15);
        assert!("0,1x2".parse::<AxisBox>().is_err());
        assert!(AxisBox::closed(vec![1.0], vec![1.0]).is_err());
    }
}
