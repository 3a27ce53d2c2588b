use nalgebra::{DMatrix, DVector};

use super::enumerate::enumerate_ball;
use super::group::GroupElement;
use crate::dd::Dd;
use crate::error::{Error, Result};

pub const LLL_DELTA: f64 = 0.99;

const DET_TOL: f64 = 1e-6;
const RENORM_TOL: f64 = 1e-9;
const MAX_LLL_ITERS: usize = 100_000;

/// A basis of the lattice `g Z^{d+1}`.
///
/// The lattice is generated by the product of `factors` (kept unmultiplied
/// so that boundary-sensitive points can be evaluated in double-double
/// arithmetic), and `columns = (∏ factors) · unimodular` is the current,
/// possibly reduced, basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeBasis {
    columns: DMatrix<f64>,
    factors: Vec<DMatrix<f64>>,
    unimodular: DMatrix<i64>,
    reduced: bool,
}

impl LatticeBasis {
    /// `x_0 = Z^{d+1}`.
    pub fn standard(d: usize) -> Self {
        LatticeBasis::from_group(&GroupElement::identity(d))
    }

    pub fn from_group(g: &GroupElement) -> Self {
        LatticeBasis::from_factors(std::slice::from_ref(g))
    }

    /// Lattice generated by `g_1 g_2 … g_m`.
    pub fn from_factors(factors: &[GroupElement]) -> Self {
        assert!(!factors.is_empty(), "at least one factor");
        let mats: Vec<DMatrix<f64>> = factors.iter().map(|g| g.matrix().clone()).collect();
        let columns = mats.iter().skip(1).fold(mats[0].clone(), |acc, m| acc * m);
        let n = columns.nrows();
        LatticeBasis {
            columns,
            factors: mats,
            unimodular: DMatrix::identity(n, n),
            reduced: false,
        }
    }

    pub fn from_columns(columns: DMatrix<f64>) -> Result<Self> {
        let n = columns.nrows();
        if n != columns.ncols() || !(2..=5).contains(&n) {
            return Err(Error::InvalidArgument(format!(
                "basis must be square of size 2..=5, got {}x{}",
                n,
                columns.ncols()
            )));
        }
        let det = columns.determinant();
        if (det.abs() - 1.0).abs() > DET_TOL {
            return Err(Error::InvalidArgument(format!(
                "basis determinant {det} is not ±1"
            )));
        }
        Ok(LatticeBasis {
            factors: vec![columns.clone()],
            columns,
            unimodular: DMatrix::identity(n, n),
            reduced: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn d(&self) -> usize {
        self.dim() - 1
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Integer matrix `U` with `columns = generator · U`.
    pub fn unimodular(&self) -> &DMatrix<i64> {
        &self.unimodular
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn generator(&self) -> DMatrix<f64> {
        self.factors
            .iter()
            .skip(1)
            .fold(self.factors[0].clone(), |acc, m| acc * m)
    }

    pub fn det(&self) -> f64 {
        self.columns.determinant()
    }

    /// `g · (current basis)`; the result is generated by its own columns.
    pub fn left_mul(&self, g: &GroupElement) -> LatticeBasis {
        let columns = g.matrix() * &self.columns;
        let n = columns.nrows();
        LatticeBasis {
            factors: vec![columns.clone()],
            columns,
            unimodular: DMatrix::identity(n, n),
            reduced: false,
        }
    }

    /// Rescales to determinant ±1 when the drift exceeds 1e-9.
    pub fn renormalize(&mut self) {
        let det = self.det();
        if (det.abs() - 1.0).abs() > RENORM_TOL && det != 0.0 {
            let c = det.abs().powf(-1.0 / self.dim() as f64);
            self.columns *= c;
            self.factors = vec![self.columns.clone()];
            self.unimodular = DMatrix::identity(self.dim(), self.dim());
        }
    }

    /// `generator · coeffs` evaluated factor by factor in double-double.
    pub fn point_dd(&self, coeffs: &[i64]) -> Vec<Dd> {
        let mut v: Vec<Dd> = coeffs.iter().map(|&c| Dd::new(c as f64)).collect();
        for f in self.factors.iter().rev() {
            v = (0..f.nrows())
                .map(|i| {
                    (0..f.ncols()).fold(Dd::ZERO, |acc, j| {
                        let a = f[(i, j)];
                        if a == 0.0 {
                            acc
                        } else {
                            acc + Dd::prod(a, v[j].hi) + a * v[j].lo
                        }
                    })
                })
                .collect();
        }
        v
    }

    pub fn point(&self, coeffs: &[i64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.point_dd(coeffs).into_iter().map(Dd::to_f64),
        )
    }

    /// Row-major text block, one matrix row per line.
    pub fn to_csv_block(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:e}", self.columns[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_block(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|x| {
                        x.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidArgument(format!("bad number `{x}` in basis block"))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("basis block is not square".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        LatticeBasis::from_columns(DMatrix::from_row_slice(n, n, &flat))
    }
}

/// Gram–Schmidt data: `mu[(i, j)]` for `j < i` and squared norms `|b*_i|^2`.
fn gram_schmidt(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = b.ncols();
    let mut mu = DMatrix::zeros(n, n);
    let mut star: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut norms: Vec<f64> = Vec::with_capacity(n);
    let scale = b
        .column_iter()
        .map(|c| c.norm_squared())
        .fold(0.0, f64::max);
    for i in 0..n {
        let bi = b.column(i).into_owned();
        let mut v = bi.clone();
        for j in 0..i {
            let m: f64 = bi.dot(&star[j]) / norms[j];
            mu[(i, j)] = m;
            v.axpy(-m, &star[j], 1.0);
        }
        let nn = v.norm_squared();
        if !(nn > 1e-28 * scale) || !nn.is_finite() {
            return Err(Error::SingularBasis);
        }
        norms.push(nn);
        star.push(v);
    }
    Ok((mu, norms))
}

/// In-place LLL with parameter `delta`, tracking the integer transform.
pub(crate) fn lll_in_place(b: &mut DMatrix<f64>, u: &mut DMatrix<i64>, delta: f64) -> Result<()> {
    let n = b.ncols();
    let mut k = 1;
    let mut iters = 0;
    while k < n {
        iters += 1;
        if iters > MAX_LLL_ITERS {
            return Err(Error::SingularBasis);
        }
        for _pass in 0..8 {
            let (mut mu, _) = gram_schmidt(b)?;
            let mut changed = false;
            for j in (0..k).rev() {
                let q = mu[(k, j)].round();
                if q != 0.0 {
                    changed = true;
                    let bj = b.column(j).into_owned();
                    b.column_mut(k).axpy(-q, &bj, 1.0);
                    let qi = q as i64;
                    for r in 0..n {
                        u[(r, k)] -= qi * u[(r, j)];
                    }
                    for i in 0..j {
                        mu[(k, i)] -= q * mu[(j, i)];
                    }
                    mu[(k, j)] -= q;
                }
            }
            if !changed {
                break;
            }
        }
        let (mu, norms) = gram_schmidt(b)?;
        let m = mu[(k, k - 1)];
        if norms[k] >= (delta - m * m) * norms[k - 1] {
            k += 1;
        } else {
            b.swap_columns(k, k - 1);
            u.swap_columns(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    Ok(())
}

/// Checks size reduction (`|mu| <= 1/2 + 1e-9`) and the Lovász condition.
pub fn is_lll_reduced(b: &DMatrix<f64>, delta: f64) -> bool {
    let Ok((mu, norms)) = gram_schmidt(b) else {
        return false;
    };
    let n = b.ncols();
    for i in 1..n {
        for j in 0..i {
            if mu[(i, j)].abs() > 0.5 + 1e-9 {
                return false;
            }
        }
        let m = mu[(i, i - 1)];
        if norms[i] < (delta - m * m) * norms[i - 1] * (1.0 - 1e-12) {
            return false;
        }
    }
    true
}

/// LLL reduction with `δ = 0.99`. The returned basis records the
/// unimodular change of basis relative to the generator.
pub fn lll_reduce(basis: &LatticeBasis) -> Result<LatticeBasis> {
    let det = basis.det();
    if !det.is_finite() || (det.abs() - 1.0).abs() > DET_TOL {
        return Err(Error::SingularBasis);
    }
    let mut out = basis.clone();
    lll_in_place(&mut out.columns, &mut out.unimodular, LLL_DELTA)?;
    out.reduced = true;
    Ok(out)
}

/// Exact shortest nonzero vector by LLL followed by sphere enumeration.
pub fn shortest_vector(basis: &LatticeBasis) -> Result<(DVector<f64>, f64)> {
    let reduced = if basis.is_reduced() {
        basis.clone()
    } else {
        lll_reduce(basis)?
    };
    let b = reduced.columns();
    let first = b.column(0).norm();
    let n = b.ncols();
    let candidates = enumerate_ball(b, &DVector::zeros(n), first * (1.0 + 1e-9))?;
    let mut best = (b.column(0).into_owned(), first);
    for y in candidates {
        if y.iter().all(|&c| c == 0) {
            continue;
        }
        let yf = DVector::from_iterator(n, y.iter().map(|&c| c as f64));
        let v = b * yf;
        let norm = v.norm();
        if norm < best.1 {
            best = (v, norm);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homspace::{make_a, make_u};
    use rand::{Rng, SeedableRng};

    fn brute_lambda1(b: &DMatrix<f64>, bound: i64) -> f64 {
        let mut best = f64::INFINITY;
        for x in -bound..=bound {
            for y in -bound..=bound {
                if x == 0 && y == 0 {
                    continue;
                }
                let v = b.column(0) * x as f64 + b.column(1) * y as f64;
                best = best.min(v.norm());
            }
        }
        best
    }

    #[test]
    fn identity_is_reduced() {
        let r = lll_reduce(&LatticeBasis::standard(2)).unwrap();
        assert_eq!(r.columns(), &DMatrix::identity(3, 3));
        assert!(is_lll_reduced(r.columns(), LLL_DELTA));
    }

    #[test]
    fn sheared_diagonal_matches_brute_force() {
        // columns of diag(1e6, 1e-6) u(0.3) re-based by a unimodular matrix
        let g = make_a(1e12, 1).unwrap().mul(&make_u(&[0.3]));
        let skew = DMatrix::from_row_slice(2, 2, &[7.0, 3.0, 2.0, 1.0]);
        let b = LatticeBasis::from_columns(g.matrix() * skew).unwrap();
        let r = lll_reduce(&b).unwrap();
        assert!(is_lll_reduced(r.columns(), LLL_DELTA));
        let oracle = brute_lambda1(r.columns(), 50);
        assert!((r.columns().column(0).norm() - oracle).abs() <= 1e-9 * oracle);
        let (_, l1) = shortest_vector(&b).unwrap();
        assert!((l1 - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn transform_reproduces_input() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for d in 1..=4 {
            for _ in 0..20 {
                let g = GroupElement::random(d, &mut rng)
                    .mul(&make_a(rng.random_range(1.0..1e6), d).unwrap());
                let b = LatticeBasis::from_group(&g);
                let r = lll_reduce(&b).unwrap();
                assert!(is_lll_reduced(r.columns(), LLL_DELTA));
                let uf = r.unimodular().map(|x| x as f64);
                assert_eq!(uf.determinant().abs().round(), 1.0);
                let back = g.matrix() * uf;
                let err = (back - r.columns()).amax() / g.matrix().amax();
                assert!(err < 1e-9, "relative error {err}");
            }
        }
    }

    #[test]
    fn shortest_vector_fixtures() {
        for d in 1..=4 {
            let (_, l1) = shortest_vector(&LatticeBasis::standard(d)).unwrap();
            assert!((l1 - 1.0).abs() < 1e-12);
        }
        let b = LatticeBasis::from_group(&make_a(16.0, 1).unwrap());
        let (_, l1) = shortest_vector(&b).unwrap();
        assert!((l1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn csv_block_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let b = LatticeBasis::from_group(&GroupElement::random(2, &mut rng));
        let back = LatticeBasis::from_csv_block(&b.to_csv_block()).unwrap();
        assert!((back.columns() - b.columns()).amax() < 1e-15);
        assert!(LatticeBasis::from_csv_block("1,2\n3").is_err());
    }

    #[test]
    fn double_double_points() {
        let b = LatticeBasis::from_factors(&[make_a(1e9, 1).unwrap(), make_u(&[1.0 / 3.0])]);
        let p = b.point_dd(&[-1, 3]);
        // 3 * fl(1/3) - 1 is a tiny negative number, scaled by sqrt(1e9)
        assert!(p[0].to_f64() < 0.0 && p[0].to_f64() > -1e-11);
    }

    #[test]
    fn singular_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(LatticeBasis::from_columns(m).is_err());
    }
}
