//! Exact Haar sampling on `SL_2(R)/SL_2(Z)`.
//!
//! A coset `Γh` with `h = n(x) a(y) k(θ)` is determined by `z = h·i = x + iy`
//! in the modular fundamental domain `{|x| <= 1/2, x² + y² >= 1}` and `θ`.
//! Haar measure in these coordinates is `y^{-2} dx dy dθ`. The lattice
//! representative returned is `h^{-1}`, whose coset in `G/Γ` is then Haar
//! distributed.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use super::group::GroupElement;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Draws one Haar element and reports how many proposals were needed.
pub fn haar_sample_sl2_counting<R: Rng + ?Sized>(rng: &mut R) -> (GroupElement, usize) {
    let y0 = 3f64.sqrt() / 2.0;
    let mut proposals = 0;
    let (x, y) = loop {
        proposals += 1;
        let x: f64 = rng.random::<f64>() - 0.5;
        // density ∝ y^{-2} on [√3/2, ∞): inverse CDF y = y0 / U
        let u: f64 = 1.0 - rng.random::<f64>();
        let y = y0 / u;
        if x * x + y * y >= 1.0 {
            break (x, y);
        }
    };
    let theta: f64 = rng.random::<f64>() * 2.0 * PI;
    let (sn, cs) = theta.sin_cos();
    let sy = y.sqrt();
    // h^{-1} = k(-θ) a(y)^{-1} n(-x)
    let k_inv = DMatrix::from_row_slice(2, 2, &[cs, sn, -sn, cs]);
    let a_inv = DMatrix::from_row_slice(2, 2, &[1.0 / sy, 0.0, 0.0, sy]);
    let n_inv = DMatrix::from_row_slice(2, 2, &[1.0, -x, 0.0, 1.0]);
    (GroupElement::from_raw(k_inv * a_inv * n_inv), proposals)
}

pub fn haar_sample_sl2(seed: u64) -> GroupElement {
    haar_sample_sl2_counting(&mut rng_from_seed(seed)).0
}

/// Exact Haar sampling exists only for `d = 1`; larger `d` should use a long
/// random-walk burn-in instead.
pub fn haar_sample(d: usize, seed: u64) -> Result<GroupElement> {
    if d != 1 {
        return Err(Error::Unsupported(format!(
            "exact Haar sampling only for d = 1 (requested d = {d}); use a long walk burn-in"
        )));
    }
    Ok(haar_sample_sl2(seed))
}
