use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest supported `d`; matrices are at most `(MAX_D + 1) x (MAX_D + 1)`.
pub const MAX_D: usize = 4;

const DET_TOL: f64 = 1e-9;

/// An element of `SL_{d+1}(R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
}

impl GroupElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_shape(&matrix)?;
        let det = matrix.determinant();
        if (det - 1.0).abs() > DET_TOL {
            return Err(Error::InvalidArgument(format!(
                "determinant {det} is not 1"
            )));
        }
        Ok(GroupElement { matrix })
    }

    /// Scales a matrix with positive determinant onto `SL_{d+1}(R)`.
    pub fn normalized(matrix: DMatrix<f64>) -> Result<Self> {
        check_shape(&matrix)?;
        let n = matrix.nrows();
        let det = matrix.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize determinant {det}"
            )));
        }
        Ok(GroupElement {
            matrix: matrix * det.powf(-1.0 / n as f64),
        })
    }

    pub(crate) fn from_raw(matrix: DMatrix<f64>) -> Self {
        GroupElement { matrix }
    }

    pub fn identity(d: usize) -> Self {
        GroupElement {
            matrix: DMatrix::identity(d + 1, d + 1),
        }
    }

    /// Gaussian entries, column sign fixed so that `det > 0`, then normalized.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let n = d + 1;
        loop {
            let mut m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let det = m.determinant();
            if det.abs() < 1e-3 {
                continue;
            }
            if det < 0.0 {
                m.column_mut(0).neg_mut();
            }
            return GroupElement::normalized(m).expect("positive determinant");
        }
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn mul(&self, rhs: &GroupElement) -> GroupElement {
        GroupElement {
            matrix: &self.matrix * &rhs.matrix,
        }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            matrix: self
                .matrix
                .clone()
                .try_inverse()
                .expect("determinant one matrices are invertible"),
        }
    }

    pub fn transpose(&self) -> GroupElement {
        GroupElement {
            matrix: self.matrix.transpose(),
        }
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    /// Rescales by `det^{-1/(d+1)}` when the determinant drifted past 1e-9.
    pub fn renormalize(&mut self) {
        let det = self.det();
        if (det - 1.0).abs() > DET_TOL && det > 0.0 {
            let n = self.matrix.nrows() as f64;
            self.matrix *= det.powf(-1.0 / n);
        }
    }

    /// Operator 2-norm.
    pub fn op_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.max()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

fn check_shape(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, not square",
            n,
            m.ncols()
        )));
    }
    if !(2..=MAX_D + 1).contains(&n) {
        return Err(Error::Unsupported(format!(
            "matrix size {n}; supported sizes are 2..={}",
            MAX_D + 1
        )));
    }
    Ok(())
}

/// `a(t) = diag(t^{1/(d+1)}, …, t^{1/(d+1)}, t^{-d/(d+1)})`.
pub fn make_a(t: f64, d: usize) -> Result<GroupElement> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("a(t) needs t > 0, got {t}")));
    }
    if d == 0 || d > MAX_D {
        return Err(Error::Unsupported(format!("d = {d}")));
    }
    let n = d + 1;
    let up = t.powf(1.0 / n as f64);
    let down = t.powf(-(d as f64) / n as f64);
    let mut m = DMatrix::identity(n, n);
    for i in 0..d {
        m[(i, i)] = up;
    }
    m[(d, d)] = down;
    Ok(GroupElement { matrix: m })
}

/// Upper unipotent matrix with `s` in the first `d` entries of the last column.
pub fn make_u(s: &[f64]) -> GroupElement {
    let d = s.len();
    let mut m = DMatrix::identity(d + 1, d + 1);
    for (i, &x) in s.iter().enumerate() {
        m[(i, d)] = x;
    }
    GroupElement { matrix: m }
}

/// `diag(rotation, 1)`.
pub fn make_k(rotation: &DMatrix<f64>) -> GroupElement {
    let d = rotation.nrows();
    let mut m = DMatrix::identity(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(rotation);
    GroupElement { matrix: m }
}

/// `a(t) u(s) (-p, q)`, which equals `(t^{1/(d+1)} (q s - p), t^{-d/(d+1)} q)`.
pub fn dani_vector(t: f64, s: &[f64], p: &[i64], q: i64) -> Result<DVector<f64>> {
    let d = s.len();
    if p.len() != d {
        return Err(Error::InvalidArgument("p and s differ in length".into()));
    }
    let g = make_a(t, d)?.mul(&make_u(s));
    let mut v = DVector::zeros(d + 1);
    for i in 0..d {
        v[i] = -(p[i] as f64);
    }
    v[d] = q as f64;
    let via_matrix = g.apply(&v);
    let up = t.powf(1.0 / (d + 1) as f64);
    let closed = DVector::from_fn(d + 1, |i, _| {
        if i < d {
            up * (q as f64 * s[i] - p[i] as f64)
        } else {
            t.powf(-(d as f64) / (d + 1) as f64) * q as f64
        }
    });
    debug_assert!(via_matrix
        .iter()
        .zip(closed.iter())
        .enumerate()
        .all(|(i, (a, b))| {
            let scale = if i < d {
                up * (q.unsigned_abs() as f64 * s[i].abs() + p[i].unsigned_abs() as f64)
            } else {
                b.abs()
            };
            (a - b).abs() <= 1e-12 * scale.max(1.0)
        }));
    Ok(via_matrix)
}
