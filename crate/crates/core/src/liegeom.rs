//! Geometry of `sl_{d+1}`: weight spaces of the diagonal flow, the random
//! subspaces `V_1(g)`, `V_2(g)`, wedge norms, the obstruction subspace and
//! staircase subspaces, and randomized transversality witnesses.
//!
//! The metric makes `{E_ij}` orthonormal, i.e. `<A, B> = tr(A^T B)`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homspace::{make_u, GroupElement, MAX_D};
use crate::ifs::{orthonormal_column_span, IfsModel, Similarity};
use crate::seed::{par_items, rng_from_seed};
use crate::stats::Estimate;

/// Numerical rank tolerance for intersections and direct sums.
pub const RANK_TOL: f64 = 1e-8;
/// A witness tuple is accepted once its wedge norm reaches this value.
pub const WITNESS_THRESHOLD: f64 = 0.01;

const TRACE_TOL: f64 = 1e-12;

fn check_d(d: usize) -> Result<()> {
    if d == 0 || d > MAX_D {
        return Err(Error::Unsupported(format!("d = {d}")));
    }
    Ok(())
}

/// `dim sl_{d+1} = d(d+2)`.
pub fn lie_dim(d: usize) -> usize {
    d * (d + 2)
}

/// An element of `sl_{d+1}`, stored by its coordinates in `{E_ij}`
/// (row-major, all `(d+1)^2` entries).
#[derive(Clone, Debug, PartialEq)]
pub struct LieVector {
    d: usize,
    coords: DVector<f64>,
}

impl LieVector {
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() || n < 2 {
            return Err(Error::InvalidArgument(
                "expected a square matrix of size >= 2".into(),
            ));
        }
        if m.trace().abs() > TRACE_TOL * m.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "trace {} is not zero",
                m.trace()
            )));
        }
        Ok(LieVector {
            d: n - 1,
            coords: DVector::from_iterator(n * n, m.transpose().iter().copied()),
        })
    }

    /// `E_ij` with 1-based indices, `i != j`.
    pub fn elementary(d: usize, i: usize, j: usize) -> Self {
        assert!(i != j && (1..=d + 1).contains(&i) && (1..=d + 1).contains(&j));
        let n = d + 1;
        let mut coords = DVector::zeros(n * n);
        coords[(i - 1) * n + (j - 1)] = 1.0;
        LieVector { d, coords }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.d + 1;
        DMatrix::from_row_slice(n, n, self.coords.as_slice())
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.len(), m.transpose().iter().copied())
}

fn unflatten(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

fn elementary_matrix(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i - 1, j - 1)] = 1.0;
    m
}

/// `g v g^{-1}`.
pub fn adjoint_action(g: &GroupElement, v: &LieVector) -> LieVector {
    let m = g.matrix() * v.to_matrix() * g.inverse().matrix();
    LieVector {
        d: v.d,
        coords: flatten(&m),
    }
}

/// A linear subspace of `sl_{d+1}` with an orthonormal basis (columns, in
/// flattened `E_ij` coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    d: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Span of the given matrices, orthonormalized; dependent directions
    /// are dropped.
    pub fn span(d: usize, matrices: &[DMatrix<f64>]) -> Result<Self> {
        check_d(d)?;
        let n = d + 1;
        let mut cols = Vec::with_capacity(matrices.len());
        for m in matrices {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidArgument(
                    "matrix size does not match d".into(),
                ));
            }
            cols.push(LieVector::from_matrix(m)?.coords);
        }
        Ok(Subspace::from_coords(d, &cols))
    }

    fn from_coords(d: usize, cols: &[DVector<f64>]) -> Self {
        let n2 = (d + 1) * (d + 1);
        let basis = if cols.is_empty() {
            DMatrix::zeros(n2, 0)
        } else {
            orthonormal_column_span(&DMatrix::from_columns(cols), 1e-10)
        };
        Subspace { d, basis }
    }

    pub fn zero(d: usize) -> Self {
        Subspace {
            d,
            basis: DMatrix::zeros((d + 1) * (d + 1), 0),
        }
    }

    /// Span of `E_ij` over the given 1-based pairs.
    pub fn elementary(d: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = d + 1;
        let mats: Vec<_> = pairs
            .iter()
            .map(|&(i, j)| elementary_matrix(n, i, j))
            .collect();
        Subspace::span(d, &mats)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Basis vectors as matrices.
    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        let n = self.d + 1;
        self.basis
            .column_iter()
            .map(|c| unflatten(c.as_slice(), n))
            .collect()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `Ad(g) F`.
    pub fn adjoint(&self, g: &GroupElement) -> Subspace {
        let gi = g.inverse();
        let cols: Vec<_> = self
            .matrices()
            .iter()
            .map(|m| flatten(&(g.matrix() * m * gi.matrix())))
            .collect();
        Subspace::from_coords(self.d, &cols)
    }

    /// Elementwise transpose `F^T = {X^T : X ∈ F}`.
    pub fn transpose(&self) -> Subspace {
        let cols: Vec<_> = self
            .matrices()
            .iter()
            .map(|m| flatten(&m.transpose()))
            .collect();
        Subspace::from_coords(self.d, &cols)
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let cols: Vec<_> = self
            .basis
            .column_iter()
            .chain(other.basis.column_iter())
            .map(|c| c.into_owned())
            .collect();
        Subspace::from_coords(self.d, &cols)
    }

    /// Orthogonal complement inside `sl_{d+1}`.
    pub fn complement(&self) -> Subspace {
        let sl = sl(self.d);
        let p = DMatrix::identity(self.basis.nrows(), self.basis.nrows()) - self.projector();
        Subspace {
            d: self.d,
            basis: orthonormal_column_span(&(p * sl.basis), 1e-10),
        }
    }

    /// Largest singular value of the difference of the two projectors; zero
    /// iff the subspaces coincide.
    pub fn gap(&self, other: &Subspace) -> f64 {
        (self.projector() - other.projector()).norm()
    }
}

fn sl(d: usize) -> Subspace {
    let n = d + 1;
    let mut mats = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                mats.push(elementary_matrix(n, i, j));
            }
        }
    }
    for i in 1..n {
        mats.push(elementary_matrix(n, i, i) - elementary_matrix(n, n, n));
    }
    Subspace::span(d, &mats).expect("valid d")
}

/// The weight-space decomposition of `a(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSpaces {
    /// `span{E_{d+1,j} : j <= d}`
    pub minus: Subspace,
    /// the centralizer of `a(t)` in `sl_{d+1}`
    pub zero: Subspace,
    /// `span{E_{j,d+1} : j <= d}`
    pub plus: Subspace,
}

impl WeightSpaces {
    /// `g_{<=0} = g_- ⊕ g_0`.
    pub fn non_positive(&self) -> Subspace {
        self.minus.sum(&self.zero)
    }
}

pub fn weight_spaces(d: usize) -> Result<WeightSpaces> {
    check_d(d)?;
    let n = d + 1;
    let minus = Subspace::elementary(d, &(1..=d).map(|j| (n, j)).collect::<Vec<_>>())?;
    let plus = Subspace::elementary(d, &(1..=d).map(|j| (j, n)).collect::<Vec<_>>())?;
    let mut mats = Vec::new();
    for i in 1..=d {
        for j in 1..=d {
            if i != j {
                mats.push(elementary_matrix(n, i, j));
            }
        }
        mats.push(elementary_matrix(n, i, i) - elementary_matrix(n, n, n));
    }
    let zero = Subspace::span(d, &mats)?;
    Ok(WeightSpaces { minus, zero, plus })
}

/// `V_1(g) = Ad(u(-b_g)) g_-`.
pub fn v1_of(phi: &Similarity) -> Result<Subspace> {
    let b: Vec<f64> = phi.translation().iter().map(|x| -x).collect();
    Ok(weight_spaces(phi.dim())?.minus.adjoint(&make_u(&b)))
}

/// `V_2(g) = Ad(u(-b_g)) g_{<=0}`.
pub fn v2_of(phi: &Similarity) -> Result<Subspace> {
    let b: Vec<f64> = phi.translation().iter().map(|x| -x).collect();
    Ok(weight_spaces(phi.dim())?
        .non_positive()
        .adjoint(&make_u(&b)))
}

/// `‖F_1 ∧ … ∧ F_k‖`: square root of the Gram determinant of the
/// concatenated orthonormal bases.
pub fn wedge_norm(subspaces: &[&Subspace]) -> Result<f64> {
    let Some(first) = subspaces.first() else {
        return Ok(1.0);
    };
    let d = first.d;
    if subspaces.iter().any(|s| s.d != d) {
        return Err(Error::InvalidArgument(
            "subspaces live in different algebras".into(),
        ));
    }
    let total: usize = subspaces.iter().map(|s| s.dim()).sum();
    if total > lie_dim(d) {
        return Err(Error::InvalidArgument(format!(
            "total dimension {total} exceeds {}",
            lie_dim(d)
        )));
    }
    if total == 0 {
        return Ok(1.0);
    }
    let cols: Vec<DVector<f64>> = subspaces
        .iter()
        .flat_map(|s| s.basis.column_iter().map(|c| c.into_owned()))
        .collect();
    // sqrt(det(M^T M)) as the product of the singular values of M
    let sv = DMatrix::from_columns(&cols)
        .svd(false, false)
        .singular_values;
    Ok(sv.iter().product::<f64>().min(1.0))
}

fn wedge_of_owned(subspaces: &[Subspace]) -> Result<f64> {
    wedge_norm(&subspaces.iter().collect::<Vec<_>>())
}

/// Numerical rank of a matrix: singular values above `RANK_TOL`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL)
        .count()
}

/// `dim(A ∩ B) = dim A - rank((I - P_B) Q_A)`.
pub fn intersection_dim(a: &Subspace, b: &Subspace) -> usize {
    let n = a.basis.nrows();
    let residual = (DMatrix::identity(n, n) - b.projector()) * &a.basis;
    a.dim() - numerical_rank(&residual)
}

/// `W = {M ∈ sl_{d+1} : M e_1 = 0}`.
pub fn obstruction_subspace(d: usize) -> Result<Subspace> {
    check_d(d)?;
    let n = d + 1;
    let mut mats = Vec::new();
    for i in 1..=n {
        for j in 2..=n {
            if i != j {
                mats.push(elementary_matrix(n, i, j));
            }
        }
    }
    for i in 2..n {
        mats.push(elementary_matrix(n, i, i) - elementary_matrix(n, n, n));
    }
    Subspace::span(d, &mats)
}

/// `dim(Ad(g) g_- ∩ W)` with `W` the obstruction subspace.
pub fn obstruction_check(g: &GroupElement) -> Result<usize> {
    let d = g.d();
    let v = weight_spaces(d)?.minus.adjoint(g);
    Ok(intersection_dim(&v, &obstruction_subspace(d)?))
}

/// A set `S` of strict upper-triangular positions (1-based), closed under
/// `(i,j) -> (i-1,j)` and `(i,j) -> (i,j+1)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StaircaseSet {
    pub d: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl StaircaseSet {
    pub fn new(d: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let s = StaircaseSet {
            d,
            pairs: pairs.into_iter().collect(),
        };
        if !s.is_valid() {
            return Err(Error::InvalidArgument(format!(
                "{:?} is not a staircase",
                s.pairs
            )));
        }
        Ok(s)
    }

    /// The top row `{(1,2), …, (1,d+1)}`, of size `d`.
    pub fn top_row(d: usize) -> Self {
        StaircaseSet {
            d,
            pairs: (2..=d + 1).map(|j| (1, j)).collect(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let n = self.d + 1;
        self.pairs.len() <= self.d
            && self.pairs.iter().all(|&(i, j)| {
                1 <= i
                    && i < j
                    && j <= n
                    && (i == 1 || self.pairs.contains(&(i - 1, j)))
                    && (j == n || self.pairs.contains(&(i, j + 1)))
            })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subspace(&self) -> Result<Subspace> {
        Subspace::elementary(self.d, &self.pairs.iter().copied().collect::<Vec<_>>())
    }
}

/// All staircases of size at most `d`, ordered by size then contents.
pub fn enumerate_staircases(d: usize) -> Result<Vec<StaircaseSet>> {
    check_d(d)?;
    let n = d + 1;
    let positions: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
        .collect();
    let mut out: Vec<StaircaseSet> = (0u32..1 << positions.len())
        .filter(|mask| mask.count_ones() as usize <= d)
        .map(|mask| StaircaseSet {
            d,
            pairs: positions
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &p)| p)
                .collect(),
        })
        .filter(StaircaseSet::is_valid)
        .collect();
    out.sort_by(|a, b| (a.len(), &a.pairs).cmp(&(b.len(), &b.pairs)));
    Ok(out)
}

/// `‖Ad(g_1) g_- ∧ … ∧ Ad(g_k) g_- ∧ W‖`.
pub fn tuple_wedge(elements: &[GroupElement], w: &Subspace) -> Result<f64> {
    let minus = weight_spaces(w.d)?.minus;
    let mut spaces: Vec<Subspace> = elements.iter().map(|g| minus.adjoint(g)).collect();
    spaces.push(w.clone());
    wedge_of_owned(&spaces)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessMode {
    /// Only `u(s)` with Gaussian `s`.
    UnipotentOnly,
    /// Gaussian matrices normalized into `SL_{d+1}`.
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub elements: Vec<GroupElement>,
    pub wedge: f64,
    pub tries: usize,
}

/// Searches for `g_1, …, g_{d+1}` with
/// `‖Ad(g_1) g_- ∧ … ∧ Ad(g_{d+1}) g_- ∧ W‖ >= 0.01`.
pub fn find_transversal_witness(
    w: &Subspace,
    mode: WitnessMode,
    seed: u64,
    max_tries: usize,
) -> Result<Witness> {
    let d = w.d;
    if w.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "W must have dimension d = {d}, got {}",
            w.dim()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut best = 0.0f64;
    for tries in 1..=max_tries {
        let elements: Vec<GroupElement> = (0..=d)
            .map(|_| match mode {
                WitnessMode::General => GroupElement::random(d, &mut rng),
                WitnessMode::UnipotentOnly => {
                    let s: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    make_u(&s)
                }
            })
            .collect();
        let wedge = tuple_wedge(&elements, w)?;
        if wedge >= WITNESS_THRESHOLD {
            return Ok(Witness {
                elements,
                wedge,
                tries,
            });
        }
        best = best.max(wedge);
    }
    Err(Error::WitnessNotFound {
        tries: max_tries,
        best,
    })
}

/// `(Id, Id + E_12)` against `W = R E_12` in `sl_2`.
pub fn sl2_base_case() -> Witness {
    let elements = vec![GroupElement::identity(1), make_u(&[1.0])];
    let w = Subspace::elementary(1, &[(1, 2)]).expect("d = 1");
    let wedge = tuple_wedge(&elements, &w).expect("dimensions add up");
    Witness {
        elements,
        wedge,
        tries: 0,
    }
}

/// An explicit witness for each size-2 staircase in `sl_3`, built from
/// `g_0 = (Id + E_31) ω` with `ω` the signed permutation exchanging `e_1`
/// and `e_3`.
pub fn d2_constructed_witness(s: &StaircaseSet) -> Result<Witness> {
    if s.d != 2 || s.len() != 2 {
        return Err(Error::InvalidArgument(
            "expected a size-2 staircase in sl_3".into(),
        ));
    }
    let mut omega = DMatrix::zeros(3, 3);
    omega[(0, 2)] = 1.0;
    omega[(1, 1)] = -1.0;
    omega[(2, 0)] = 1.0;
    let g0 = GroupElement::new((DMatrix::identity(3, 3) + elementary_matrix(3, 3, 1)) * omega)?;
    let unip = make_u(&[0.0, 1.0]);
    let second = if s.pairs.contains(&(2, 3)) {
        GroupElement::identity(2)
    } else {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 0)] = 1.0;
        w[(1, 2)] = 1.0;
        w[(2, 1)] = -1.0;
        GroupElement::new(w)?
    };
    let elements = vec![g0, second, unip];
    let wedge = tuple_wedge(&elements, &s.subspace()?)?;
    Ok(Witness {
        elements,
        wedge,
        tries: 0,
    })
}

/// For each `r`, the fraction of `(d+1)`-tuples of independent `μ^{*n}`
/// elements with `‖V_1(g_1) ∧ … ∧ V_1(g_{d+1}) ∧ W‖ <= r`.
pub fn mnc_statistic(
    model: &IfsModel,
    n: usize,
    w: &Subspace,
    r_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, Estimate)>> {
    let wedges = mnc_wedges(model, n, w, samples, seed)?;
    Ok(r_grid
        .iter()
        .map(|&r| {
            (
                r,
                Estimate::proportion(wedges.iter().filter(|&&x| x <= r).count(), samples),
            )
        })
        .collect())
}

/// The raw wedge norms behind `mnc_statistic`.
pub fn mnc_wedges(
    model: &IfsModel,
    n: usize,
    w: &Subspace,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = model.dimension();
    if w.d != d || w.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "W must be a {d}-dimensional subspace of sl_{}",
            d + 1
        )));
    }
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument(
            "need n >= 1 and samples >= 1".into(),
        ));
    }
    par_items(seed, samples, |_, s| -> Result<f64> {
        let mut rng = rng_from_seed(s);
        let mut spaces = Vec::with_capacity(d + 2);
        for _ in 0..=d {
            let path = model.sample_path(n, &mut rng);
            spaces.push(v1_of(&model.composite(&path))?);
        }
        spaces.push(w.clone());
        wedge_of_owned(&spaces)
    })
    .into_iter()
    .collect()
}
