use super::boxes::AxisBox;
use super::enumerate::enumerate_in_box;
use super::group::GroupElement;
use super::lattice::LatticeBasis;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Siegel transform of the box indicator: nonzero lattice points in `bx`.
pub fn siegel_transform(basis: &LatticeBasis, bx: &AxisBox) -> Result<u64> {
    Ok(enumerate_in_box(basis, bx)?
        .iter()
        .filter(|p| !p.is_zero())
        .count() as u64)
}

pub fn gcd_of(v: &[i64]) -> u64 {
    v.iter().fold(0u64, |g, &x| gcd(g, x.unsigned_abs()))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Counts nonzero lattice points `g v` in `bx` whose coordinate vector `v`
/// has gcd at most `m`. `None` means no restriction.
pub fn restricted_siegel_transform(
    basis: &LatticeBasis,
    bx: &AxisBox,
    m: Option<u64>,
) -> Result<u64> {
    if m == Some(0) {
        return Err(Error::InvalidArgument(
            "restriction level m must be at least 1".into(),
        ));
    }
    let pts = enumerate_in_box(basis, bx)?;
    Ok(pts
        .iter()
        .filter(|p| !p.is_zero())
        .filter(|p| m.is_none_or(|m| gcd_of(&p.coeffs) <= m))
        .count() as u64)
}

/// One instance of the counting lemma for `g Z^{d+1}` in a box `R` with
/// side lengths `T_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingLemmaCheck {
    pub count: u64,
    pub volume: f64,
    /// `2^{d+1} √(d+1) max_i (‖g‖_op / T_i) Leb(R)`
    pub bound: f64,
    pub holds: bool,
}

/// Compares `|g Z^{d+1} ∩ R|` with `Leb(R)`. Returns `None` when the
/// hypothesis `‖g‖_op <= min_i T_i / √(d+1)` fails.
pub fn counting_lemma_check(g: &GroupElement, bx: &AxisBox) -> Result<Option<CountingLemmaCheck>> {
    let n = bx.dim();
    if g.matrix().nrows() != n {
        return Err(Error::InvalidArgument(
            "box and group dimensions differ".into(),
        ));
    }
    let norm = g.op_norm();
    let min_side = (0..n).map(|i| bx.side(i)).fold(f64::INFINITY, f64::min);
    if norm > min_side / (n as f64).sqrt() {
        return Ok(None);
    }
    let count = enumerate_in_box(&LatticeBasis::from_group(g), bx)?.len() as u64;
    let volume = bx.volume();
    let bound = 2f64.powi(n as i32) * (n as f64).sqrt() * (norm / min_side) * volume;
    Ok(Some(CountingLemmaCheck {
        count,
        volume,
        bound,
        holds: (count as f64 - volume).abs() <= bound,
    }))
}

/// Riemann zeta for real `s > 1` (Euler–Maclaurin after 64 terms).
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    const N: usize = 64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let n = N as f64;
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // Bernoulli corrections B2/2!, B4/4!, B6/6!
    let mut rising = s;
    let mut pow = n.powf(-s - 1.0);
    let coeffs = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0];
    for (k, c) in coeffs.iter().enumerate() {
        tail += c * rising * pow;
        rising *= (s + 2.0 * k as f64 + 1.0) * (s + 2.0 * k as f64 + 2.0);
        pow /= n * n;
    }
    head + tail
}

/// `ζ(d+1)^{-1} Σ_{t ≤ m} t^{-(d+1)}`: the Haar density of lattice points
/// whose coordinate gcd is at most `m`. `None` gives 1.
pub fn restricted_density(d: usize, m: Option<u64>) -> Result<f64> {
    let Some(m) = m else {
        return Ok(1.0);
    };
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let s = (d + 1) as f64;
    let z = if d == 1 {
        std::f64::consts::PI.powi(2) / 6.0
    } else {
        zeta(s)
    };
    if m > 10_000_000 {
        return Ok(1.0 - (m as f64).powf(1.0 - s) / ((s - 1.0) * z));
    }
    let partial: f64 = (1..=m).rev().map(|t| (t as f64).powf(-s)).sum();
    Ok(partial / z)
}

/// `c_m = ζ(2)^{-1} Σ_{t=1}^m t^{-2}`.
pub fn c_m(m: u64) -> Result<f64> {
    restricted_density(1, Some(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homspace::GroupElement;
    use rand::SeedableRng;

    #[test]
    fn c_m_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((c_m(1).unwrap() - 6.0 / pi2).abs() < 1e-15);
        assert!((c_m(1).unwrap() - 0.607927).abs() < 1e-6);
        assert!((c_m(2).unwrap() - 0.759909).abs() < 1e-6);
        assert!((1.0 - c_m(1_000_000).unwrap()).abs() < 1e-6);
        assert!(c_m(0).is_err());
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-13);
        assert!((zeta(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-13);
    }

    #[test]
    fn standard_lattice_counts() {
        let x0 = LatticeBasis::standard(1);
        let bx = AxisBox::cube(2, 0.0, 2.5).unwrap();
        assert_eq!(siegel_transform(&x0, &bx).unwrap(), 8);
        // (2,0), (0,2) and (2,2) all have gcd 2
        assert_eq!(restricted_siegel_transform(&x0, &bx, Some(1)).unwrap(), 5);
        assert_eq!(restricted_siegel_transform(&x0, &bx, None).unwrap(), 8);
        assert!(restricted_siegel_transform(&x0, &bx, Some(0)).is_err());
        for d in 1..=3 {
            for n in 0..4 {
                let bx = AxisBox::cube(d + 1, 0.0, n as f64 + 0.5).unwrap();
                let expect = (n + 1u64).pow(d as u32 + 1) - 1;
                assert_eq!(
                    siegel_transform(&LatticeBasis::standard(d), &bx).unwrap(),
                    expect
                );
            }
        }
    }

    #[test]
    fn restriction_is_monotone_in_m() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let b = LatticeBasis::from_group(&GroupElement::random(1, &mut rng));
            let bx = AxisBox::cube(2, -3.0, 3.0).unwrap();
            let counts: Vec<u64> = (1..6)
                .map(|m| restricted_siegel_transform(&b, &bx, Some(m)).unwrap())
                .collect();
            assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            assert!(*counts.last().unwrap() <= siegel_transform(&b, &bx).unwrap());
        }
    }

    #[test]
    fn small_box_misses_sparse_lattice() {
        let x0 = LatticeBasis::standard(2);
        let bx = AxisBox::cube(3, -0.4, 0.4).unwrap();
        assert_eq!(siegel_transform(&x0, &bx).unwrap(), 0);
    }
}
