use nalgebra::{DMatrix, DVector};

use super::boxes::AxisBox;
use super::lattice::{lll_in_place, LatticeBasis, LLL_DELTA};
use crate::error::{Error, Result};

/// Enumerations predicted to visit more points than this are refused.
pub const ENUMERATION_LIMIT: f64 = 1e8;

/// A lattice point `g c` together with its integer coordinates `c`
/// relative to the lattice generator.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePoint {
    pub coeffs: Vec<i64>,
    pub point: Vec<f64>,
}

impl LatticePoint {
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// All integer `y` with `|b y - center| <= radius`, for a square basis `b`.
pub(crate) fn enumerate_ball(
    b: &DMatrix<f64>,
    center: &DVector<f64>,
    radius: f64,
) -> Result<Vec<Vec<i64>>> {
    let n = b.ncols();
    let qr = b.clone().qr();
    let r = qr.r();
    let z = qr.q().transpose() * center;
    for i in 0..n {
        if r[(i, i)].abs() == 0.0 || !r[(i, i)].is_finite() {
            return Err(Error::SingularBasis);
        }
    }
    let mut out = Vec::new();
    let mut y = vec![0i64; n];
    let r2 = radius * radius;
    descend(&r, &z, r2, n - 1, 0.0, &mut y, &mut out);
    Ok(out)
}

fn descend(
    r: &DMatrix<f64>,
    z: &DVector<f64>,
    r2: f64,
    i: usize,
    partial: f64,
    y: &mut [i64],
    out: &mut Vec<Vec<i64>>,
) {
    let n = y.len();
    let mut s = z[i];
    for j in i + 1..n {
        s -= r[(i, j)] * y[j] as f64;
    }
    let rii = r[(i, i)];
    let rem = r2 - partial;
    if rem < 0.0 {
        return;
    }
    let c = s / rii;
    let half = rem.sqrt() / rii.abs();
    let lo = (c - half).ceil() as i64;
    let hi = (c + half).floor() as i64;
    for v in lo..=hi {
        let t = rii * v as f64 - s;
        let p = partial + t * t;
        if p > r2 {
            continue;
        }
        y[i] = v;
        if i == 0 {
            out.push(y.to_vec());
        } else {
            descend(r, z, r2, i - 1, p, y, out);
        }
    }
    y[i] = 0;
}

/// Upper estimate of the number of candidate points visited by
/// [`enumerate_in_box`].
pub fn predicted_box_points(basis: &LatticeBasis, bx: &AxisBox) -> f64 {
    let n = basis.dim();
    let radius = (n as f64).sqrt() / 2.0;
    unit_ball_volume(n) * radius.powi(n as i32) * bx.volume() / basis.det().abs() + 1.0
}

/// Exactly the lattice points inside `bx`, honoring endpoint flags.
///
/// Coordinates are rescaled so the box becomes a unit cube, the rescaled
/// generator is LLL-reduced, the circumscribed ball is enumerated on its
/// Gram–Schmidt data, and every candidate is tested against the box with
/// its coordinates evaluated in double-double precision. Points are
/// returned sorted by their integer coordinates.
pub fn enumerate_in_box(basis: &LatticeBasis, bx: &AxisBox) -> Result<Vec<LatticePoint>> {
    let n = basis.dim();
    if bx.dim() != n {
        return Err(Error::InvalidArgument(format!(
            "box has dimension {}, lattice {}",
            bx.dim(),
            n
        )));
    }
    let predicted = predicted_box_points(basis, bx);
    if !(predicted <= ENUMERATION_LIMIT) {
        return Err(Error::EnumerationTooLarge {
            predicted,
            limit: ENUMERATION_LIMIT,
        });
    }
    let gen = basis.generator();
    let inv_side: Vec<f64> = (0..n).map(|i| 1.0 / bx.side(i)).collect();
    let mut scaled = DMatrix::from_fn(n, n, |i, j| gen[(i, j)] * inv_side[i]);
    let mut u = DMatrix::<i64>::identity(n, n);
    lll_in_place(&mut scaled, &mut u, LLL_DELTA)?;
    let center = DVector::from_iterator(
        n,
        bx.center().into_iter().zip(&inv_side).map(|(c, s)| c * s),
    );
    let radius = (n as f64).sqrt() / 2.0 * (1.0 + 1e-7) + 1e-9;
    let mut points: Vec<LatticePoint> = enumerate_ball(&scaled, &center, radius)?
        .into_iter()
        .filter_map(|y| {
            let coeffs: Vec<i64> = (0..n)
                .map(|i| (0..n).map(|j| u[(i, j)] * y[j]).sum())
                .collect();
            let p = basis.point_dd(&coeffs);
            bx.contains_dd(&p).then(|| LatticePoint {
                point: p.iter().map(|x| x.to_f64()).collect(),
                coeffs,
            })
        })
        .collect();
    points.sort_by(|a, b| a.coeffs.cmp(&b.coeffs));
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homspace::{make_a, make_u};

    #[test]
    fn grid_fixtures() {
        let b = LatticeBasis::standard(1);
        let bx = AxisBox::cube(2, 0.0, 2.5).unwrap();
        let pts = enumerate_in_box(&b, &bx).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts.iter().filter(|p| !p.is_zero()).count(), 8);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn refuses_huge_boxes() {
        let b = LatticeBasis::standard(3);
        let bx = AxisBox::cube(4, 0.0, 1000.0).unwrap();
        assert!(matches!(
            enumerate_in_box(&b, &bx),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn stretched_lattice_finds_every_point() {
        let b = LatticeBasis::from_factors(&[make_a(1e9, 1).unwrap(), make_u(&[0.123456789])]);
        let bx = AxisBox::closed(vec![-3.0, 0.0], vec![3.0, 5.0]).unwrap();
        let pts = enumerate_in_box(&b, &bx).unwrap();
        // oracle: loop over q directly, p = nearest integers
        let up = 1e9f64.sqrt();
        let mut count = 0;
        for q in 0..=(5.0 * up) as i64 {
            let qs = q as f64 * 0.123456789;
            for p in (qs.floor() as i64 - 1)..=(qs.ceil() as i64 + 1) {
                let x = up * (q as f64 * 0.123456789 - p as f64);
                if x.abs() <= 3.0 {
                    count += 1;
                }
            }
        }
        assert_eq!(pts.len(), count);
    }
}
