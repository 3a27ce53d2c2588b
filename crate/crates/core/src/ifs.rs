//! Randomized self-similar iterated function systems and their stationary
//! measures, realized through finite-depth approximations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{par_items, rng_from_seed};
use crate::stats::Estimate;

const ORTHO_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

/// `s -> ratio * rotation * s + translation` with `rotation` in SO(d).
#[derive(Clone, Debug, PartialEq)]
pub struct Similarity {
    ratio: f64,
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl Similarity {
    pub fn new(ratio: f64, rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let d = translation.len();
        if d == 0 {
            return Err(Error::InvalidModel("similarity of dimension 0".into()));
        }
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "ratio must be positive, got {ratio}"
            )));
        }
        if rotation.nrows() != d || rotation.ncols() != d {
            return Err(Error::InvalidModel(format!(
                "rotation is {}x{}, expected {d}x{d}",
                rotation.nrows(),
                rotation.ncols()
            )));
        }
        let defect = (rotation.transpose() * &rotation - DMatrix::identity(d, d)).amax();
        if defect > ORTHO_TOL {
            return Err(Error::InvalidModel(format!(
                "rotation not orthogonal (defect {defect:.2e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidModel(format!(
                "improper rotation (det {det}); only orientation-preserving similarities are supported"
            )));
        }
        Ok(Similarity {
            ratio,
            rotation,
            translation,
        })
    }

    /// A similarity without rotation part.
    pub fn homothety(ratio: f64, translation: &[f64]) -> Result<Self> {
        let d = translation.len();
        Similarity::new(
            ratio,
            DMatrix::identity(d, d),
            DVector::from_column_slice(translation),
        )
    }

    pub fn identity(d: usize) -> Self {
        Similarity {
            ratio: 1.0,
            rotation: DMatrix::identity(d, d),
            translation: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn apply(&self, s: &DVector<f64>) -> DVector<f64> {
        (&self.rotation * s) * self.ratio + &self.translation
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Similarity) -> Similarity {
        Similarity {
            ratio: self.ratio * inner.ratio,
            rotation: &self.rotation * &inner.rotation,
            translation: self.apply(&inner.translation),
        }
    }
}

/// Serializable description of one weighted map, rotation given row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub weight: f64,
    pub ratio: f64,
    #[serde(default)]
    pub rotation: Option<Vec<f64>>,
    pub translation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    #[serde(default)]
    pub label: String,
    pub maps: Vec<MapConfig>,
}

/// A finitely supported probability measure on orientation-preserving
/// similarities that contracts on average.
#[derive(Clone, Debug, PartialEq)]
pub struct IfsModel {
    dimension: usize,
    weights: Vec<f64>,
    maps: Vec<Similarity>,
    cumulative: Vec<f64>,
    label: String,
}

impl IfsModel {
    pub fn new(
        dimension: usize,
        maps: Vec<(f64, Similarity)>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if maps.is_empty() {
            return Err(Error::InvalidModel("no maps".into()));
        }
        let mut weights = Vec::with_capacity(maps.len());
        let mut sims = Vec::with_capacity(maps.len());
        for (w, phi) in maps {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "weights must be positive, got {w}"
                )));
            }
            if phi.dim() != dimension {
                return Err(Error::InvalidModel(format!(
                    "map of dimension {} in a model of dimension {dimension}",
                    phi.dim()
                )));
            }
            weights.push(w);
            sims.push(phi);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidModel(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let drift: f64 = weights
            .iter()
            .zip(&sims)
            .map(|(w, p)| w * p.ratio.ln())
            .sum();
        if drift >= 0.0 {
            return Err(Error::InvalidModel(format!(
                "not contracting on average: sum w log r = {drift}"
            )));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(IfsModel {
            dimension,
            weights,
            maps: sims,
            cumulative,
            label: label.into(),
        })
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.dimension;
        let maps = cfg
            .maps
            .iter()
            .map(|m| {
                let rotation = match &m.rotation {
                    Some(r) => {
                        if r.len() != d * d {
                            return Err(Error::InvalidModel(format!(
                                "rotation has {} entries, expected {}",
                                r.len(),
                                d * d
                            )));
                        }
                        DMatrix::from_row_slice(d, d, r)
                    }
                    None => DMatrix::identity(d, d),
                };
                let phi = Similarity::new(
                    m.ratio,
                    rotation,
                    DVector::from_column_slice(&m.translation),
                )?;
                Ok((m.weight, phi))
            })
            .collect::<Result<Vec<_>>>()?;
        IfsModel::new(d, maps, cfg.label.clone())
    }

    /// Looks up a named preset. `bernoulli-lambda` takes an optional
    /// contraction parameter, e.g. `bernoulli-lambda:0.7`.
    pub fn preset(name: &str) -> Result<Self> {
        let (base, param) = match name.split_once([':', '=']) {
            Some((b, p)) => (b, Some(p)),
            None => (name, None),
        };
        let uniform = |maps: Vec<Similarity>, label: &str| {
            let w = 1.0 / maps.len() as f64;
            let d = maps[0].dim();
            IfsModel::new(d, maps.into_iter().map(|m| (w, m)).collect(), label)
        };
        let h = Similarity::homothety;
        match (base, param) {
            ("cantor3", None) => uniform(
                vec![h(1.0 / 3.0, &[0.0])?, h(1.0 / 3.0, &[2.0 / 3.0])?],
                "cantor3",
            ),
            ("cantor5-missing", None) => uniform(
                vec![h(0.2, &[0.0])?, h(0.2, &[0.4])?, h(0.2, &[0.8])?],
                "cantor5-missing",
            ),
            ("cantor3-power-d2", None) => {
                let mut maps = Vec::new();
                for a in [0.0, 2.0 / 3.0] {
                    for b in [0.0, 2.0 / 3.0] {
                        maps.push(h(1.0 / 3.0, &[a, b])?);
                    }
                }
                uniform(maps, "cantor3-power-d2")
            }
            ("sierpinski-triangle", None) => uniform(
                vec![
                    h(0.5, &[0.0, 0.0])?,
                    h(0.5, &[0.5, 0.0])?,
                    h(0.5, &[0.25, 3f64.sqrt() / 4.0])?,
                ],
                "sierpinski-triangle",
            ),
            ("sierpinski-carpet", None) => {
                let mut maps = Vec::new();
                for i in 0..3 {
                    for j in 0..3 {
                        if i == 1 && j == 1 {
                            continue;
                        }
                        maps.push(h(1.0 / 3.0, &[i as f64 / 3.0, j as f64 / 3.0])?);
                    }
                }
                uniform(maps, "sierpinski-carpet")
            }
            ("bernoulli-lambda", p) => {
                let lambda = match p {
                    Some(p) => p.parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!("bad bernoulli parameter `{p}`"))
                    })?,
                    None => 0.6,
                };
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "bernoulli parameter must lie in (0,1), got {lambda}"
                    )));
                }
                uniform(
                    vec![h(lambda, &[-1.0])?, h(lambda, &[1.0])?],
                    &format!("bernoulli-lambda:{lambda}"),
                )
            }
            _ => Err(Error::UnknownPreset(name.to_string())),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "cantor3",
            "cantor5-missing",
            "cantor3-power-d2",
            "sierpinski-triangle",
            "sierpinski-carpet",
            "bernoulli-lambda",
        ]
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    /// `-sum w_i log r_i`.
    pub fn lyapunov_exponent(&self) -> f64 {
        -self
            .weights
            .iter()
            .zip(&self.maps)
            .map(|(w, p)| w * p.ratio.ln())
            .sum::<f64>()
    }

    /// Depth at which the expected contraction reaches `e^{-40}`.
    pub fn default_depth(&self) -> usize {
        (40.0 / self.lyapunov_exponent()).ceil() as usize
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.maps.len() - 1)
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.choose(rng)).collect()
    }

    /// `φ_{i_1} ∘ … ∘ φ_{i_n}(0)`.
    pub fn point_from_path(&self, path: &[usize]) -> DVector<f64> {
        let mut x = DVector::zeros(self.dimension);
        for &i in path.iter().rev() {
            x = self.maps[i].apply(&x);
        }
        x
    }

    /// `φ_{i_1} ∘ … ∘ φ_{i_n}` as a single similarity.
    pub fn composite(&self, path: &[usize]) -> Similarity {
        path.iter()
            .fold(Similarity::identity(self.dimension), |acc, &i| {
                acc.compose(&self.maps[i])
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub point: DVector<f64>,
    pub depth: usize,
    pub path: Vec<usize>,
}

/// One draw from `σ^{(n)} = λ^{*n} * δ_0`.
pub fn sample_sigma_n(model: &IfsModel, n: usize, seed: u64) -> SamplePoint {
    let mut rng = rng_from_seed(seed);
    let path = model.sample_path(n, &mut rng);
    SamplePoint {
        point: model.point_from_path(&path),
        depth: n,
        path,
    }
}

/// `samples` independent draws from `σ^{(n)}`, item `i` seeded by
/// `item_seed(seed, i)`.
pub fn sample_points(model: &IfsModel, n: usize, samples: usize, seed: u64) -> Vec<DVector<f64>> {
    par_items(seed, samples, |_, s| sample_sigma_n(model, n, s).point)
}

/// Monte Carlo estimate of `∫ |s|^γ dσ^{(n)}`.
pub fn empirical_moment(
    model: &IfsModel,
    gamma: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let vals: Vec<f64> = sample_points(model, n, samples, seed)
        .iter()
        .map(|p| p.norm().powf(gamma))
        .collect();
    Ok(Estimate::from_values(&vals))
}

/// `point + span(directions)` with a proper direction space.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSubspace {
    point: DVector<f64>,
    /// Orthonormal basis of the direction space, `d x k`.
    basis: DMatrix<f64>,
}

impl AffineSubspace {
    pub fn new(point: DVector<f64>, directions: DMatrix<f64>) -> Result<Self> {
        let d = point.len();
        if directions.ncols() > 0 && directions.nrows() != d {
            return Err(Error::InvalidArgument(format!(
                "direction matrix has {} rows, expected {d}",
                directions.nrows()
            )));
        }
        let basis = if directions.ncols() == 0 {
            DMatrix::zeros(d, 0)
        } else {
            orthonormal_column_span(&directions, 1e-10)
        };
        if basis.ncols() >= d {
            return Err(Error::InvalidArgument(
                "direction space has full rank; subspace is not proper".into(),
            ));
        }
        Ok(AffineSubspace { point, basis })
    }

    pub fn point(p: &[f64]) -> Self {
        let d = p.len();
        AffineSubspace {
            point: DVector::from_column_slice(p),
            basis: DMatrix::zeros(d, 0),
        }
    }

    pub fn distance(&self, s: &DVector<f64>) -> f64 {
        let v = s - &self.point;
        if self.basis.ncols() == 0 {
            return v.norm();
        }
        let proj = &self.basis * (self.basis.transpose() * &v);
        (v - proj).norm()
    }
}

/// Orthonormal basis of the column span via SVD, dropping directions whose
/// singular value falls below `tol` times the largest.
pub(crate) fn orthonormal_column_span(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > tol * smax.max(1.0))
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn threshold_profile(values: &[f64], epsilons: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len() as f64;
    epsilons
        .iter()
        .map(|&eps| (eps, values.iter().filter(|&&v| v <= eps).count() as f64 / n))
        .collect()
}

/// Fraction of `σ^{(n)}` samples within distance `ε` of `subspace`, for each
/// `ε`. All thresholds share one sample set.
pub fn affine_nonconcentration(
    model: &IfsModel,
    subspace: &AffineSubspace,
    epsilons: &[f64],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if subspace.point.len() != model.dimension() {
        return Err(Error::InvalidArgument(
            "subspace dimension does not match model".into(),
        ));
    }
    let dists: Vec<f64> = sample_points(model, n, samples, seed)
        .iter()
        .map(|p| subspace.distance(p))
        .collect();
    Ok(threshold_profile(&dists, epsilons))
}

/// A real polynomial in `d` variables given as `(exponents, coefficient)`
/// terms, normalized so the largest coefficient has absolute value 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let p = Polynomial::unchecked(dim, terms)?;
        let norm = p.max_coefficient();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero polynomial".into()));
        }
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "coefficient max-norm is {norm}, expected 1"
            )));
        }
        Ok(p)
    }

    /// Rescales the coefficients to max-norm 1.
    pub fn normalized(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let p = Polynomial::unchecked(dim, terms)?;
        let norm = p.max_coefficient();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero polynomial".into()));
        }
        Polynomial::new(
            dim,
            p.terms.into_iter().map(|(e, c)| (e, c / norm)).collect(),
        )
    }

    fn unchecked(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        if let Some((e, _)) = terms.iter().find(|(e, _)| e.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "monomial with {} exponents in a {dim}-variable polynomial",
                e.len()
            )));
        }
        Ok(Polynomial { dim, terms })
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }

    pub fn eval(&self, s: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(s.iter())
                    .map(|(&k, &x)| x.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

/// Fraction of `σ^{(n)}` samples with `|P(s)| <= ε`, for each `ε`.
pub fn polynomial_nonconcentration(
    model: &IfsModel,
    poly: &Polynomial,
    epsilons: &[f64],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if poly.dim != model.dimension() {
        return Err(Error::InvalidArgument(
            "polynomial dimension does not match model".into(),
        ));
    }
    let vals: Vec<f64> = sample_points(model, n, samples, seed)
        .iter()
        .map(|p| poly.eval(p).abs())
        .collect();
    Ok(threshold_profile(&vals, epsilons))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilizationRow {
    pub depth: usize,
    /// Mean of `min(|s|, 1)` under `σ^{(n)}`.
    pub mean_n: f64,
    /// Same under `σ^{(2n)}`, on paths extending the depth-`n` ones.
    pub mean_2n: f64,
    /// Estimate of `|σ^{(n)}(f) - σ^{(2n)}(f)|` from the coupled pairs.
    pub gap: Estimate,
}

/// Compares `σ^{(n)}` with `σ^{(2n)}` on `f(s) = min(|s|, 1)`. Each sample
/// draws a path of length `2n` and evaluates both its prefix and the full
/// path, so the gap estimate has small variance.
pub fn stabilization_profile(
    model: &IfsModel,
    depths: &[usize],
    samples: usize,
    seed: u64,
) -> Vec<StabilizationRow> {
    depths
        .iter()
        .map(|&n| {
            let pairs: Vec<(f64, f64)> = par_items(seed, samples, |_, s| {
                let mut rng = rng_from_seed(s);
                let path = model.sample_path(2 * n, &mut rng);
                let f = |x: DVector<f64>| x.norm().min(1.0);
                (
                    f(model.point_from_path(&path[..n])),
                    f(model.point_from_path(&path)),
                )
            });
            let m = samples as f64;
            let mean_n = pairs.iter().map(|p| p.0).sum::<f64>() / m;
            let mean_2n = pairs.iter().map(|p| p.1).sum::<f64>() / m;
            let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
            let mut gap = Estimate::from_values(&diffs);
            gap.mean = gap.mean.abs();
            StabilizationRow {
                depth: n,
                mean_n,
                mean_2n,
                gap,
            }
        })
        .collect()
}

/// Where the base points `s` of a counting or equidistribution experiment
/// come from.
#[derive(Clone, Debug, PartialEq)]
pub enum PointMeasure {
    /// `σ^{(depth)}` of the model.
    SelfSimilar { model: IfsModel, depth: usize },
    /// Uniform on `[0,1]^d`, the absolutely continuous control.
    Lebesgue { d: usize },
}

impl PointMeasure {
    pub fn self_similar(model: IfsModel) -> Self {
        let depth = model.default_depth();
        PointMeasure::SelfSimilar { model, depth }
    }

    pub fn dimension(&self) -> usize {
        match self {
            PointMeasure::SelfSimilar { model, .. } => model.dimension(),
            PointMeasure::Lebesgue { d } => *d,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PointMeasure::SelfSimilar { model, depth } => format!("{}@{}", model.label(), depth),
            PointMeasure::Lebesgue { d } => format!("lebesgue-d{d}"),
        }
    }

    pub fn sample(&self, seed: u64) -> DVector<f64> {
        match self {
            PointMeasure::SelfSimilar { model, depth } => sample_sigma_n(model, *depth, seed).point,
            PointMeasure::Lebesgue { d } => {
                let mut rng = rng_from_seed(seed);
                DVector::from_fn(*d, |_, _| rng.random::<f64>())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> IfsModel {
        IfsModel::preset("cantor3").unwrap()
    }

    #[test]
    fn depth_zero_is_origin() {
        let p = sample_sigma_n(&cantor(), 0, 11);
        assert_eq!(p.point[0], 0.0);
        assert!(p.path.is_empty());
    }

    #[test]
    fn composition_order_outer_first() {
        // Path (2, 1): the map with b = 2/3 is applied last.
        let m = cantor();
        let x = m.point_from_path(&[1, 0]);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
        let y = m.point_from_path(&[0, 1]);
        assert!((y[0] - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = IfsModel::preset("sierpinski-triangle").unwrap();
        let a = sample_sigma_n(&m, 30, 99);
        let b = sample_sigma_n(&m, 30, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn path_replay_matches_point() {
        let m = IfsModel::preset("sierpinski-carpet").unwrap();
        let p = sample_sigma_n(&m, 25, 5);
        let replay = m.composite(&p.path).apply(&DVector::zeros(2));
        assert!((replay - &p.point).norm() <= 1e-9 * p.point.norm().max(1.0));
    }

    #[test]
    fn lyapunov_values() {
        assert!((cantor().lyapunov_exponent() - 3f64.ln()).abs() < 1e-15);
        let h = Similarity::homothety;
        let m = IfsModel::new(
            1,
            vec![
                (0.5, h(0.5, &[0.0]).unwrap()),
                (0.5, h(0.25, &[1.0]).unwrap()),
            ],
            "x",
        )
        .unwrap();
        assert!((m.lyapunov_exponent() - 1.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_contracting_model() {
        let h = Similarity::homothety;
        let err = IfsModel::new(
            1,
            vec![
                (0.5, h(2.0, &[0.0]).unwrap()),
                (0.5, h(0.5, &[1.0]).unwrap()),
            ],
            "x",
        );
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn rejects_bad_weights_and_improper_rotation() {
        let h = Similarity::homothety;
        let err = IfsModel::new(
            1,
            vec![
                (0.4, h(0.5, &[0.0]).unwrap()),
                (0.5, h(0.5, &[1.0]).unwrap()),
            ],
            "x",
        );
        assert!(err.is_err());
        let reflect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Similarity::new(0.5, reflect, DVector::zeros(2)).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Similarity::new(0.5, skew, DVector::zeros(2)).is_err());
    }

    #[test]
    fn presets_are_valid() {
        for name in IfsModel::preset_names() {
            let m = IfsModel::preset(name).unwrap();
            assert!(m.lyapunov_exponent() > 0.0, "{name}");
        }
        assert_eq!(
            IfsModel::preset("sierpinski-triangle").unwrap().dimension(),
            2
        );
        assert!(IfsModel::preset("bernoulli-lambda:0.7").is_ok());
        assert!(IfsModel::preset("bernoulli-lambda:1.5").is_err());
        assert!(matches!(
            IfsModel::preset("nope"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn config_roundtrip_builds_same_model() {
        let cfg = ModelConfig {
            dimension: 2,
            label: "rot".into(),
            maps: vec![
                MapConfig {
                    weight: 0.5,
                    ratio: 0.5,
                    rotation: Some(vec![0.0, -1.0, 1.0, 0.0]),
                    translation: vec![0.0, 0.0],
                },
                MapConfig {
                    weight: 0.5,
                    ratio: 0.5,
                    rotation: None,
                    translation: vec![1.0, 0.0],
                },
            ],
        };
        let m = IfsModel::from_config(&cfg).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.lyapunov_exponent() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_depth_moment_vanishes() {
        let e = empirical_moment(&cantor(), 1.0, 0, 100, 1).unwrap();
        assert_eq!(e.mean, 0.0);
        assert!(empirical_moment(&cantor(), 0.0, 5, 10, 1).is_err());
    }

    #[test]
    fn cantor_mean_is_one_half() {
        let e = empirical_moment(&cantor(), 1.0, 40, 100_000, 3).unwrap();
        assert!(e.within(0.5, 3.0, 0.0), "{e:?}");
    }

    #[test]
    fn middle_gap_is_empty() {
        let prof = affine_nonconcentration(
            &cantor(),
            &AffineSubspace::point(&[0.5]),
            &[0.1],
            40,
            20_000,
            2,
        )
        .unwrap();
        assert_eq!(prof[0].1, 0.0);
        let prof = affine_nonconcentration(
            &cantor(),
            &AffineSubspace::point(&[0.5]),
            &[1.0],
            40,
            1000,
            2,
        )
        .unwrap();
        assert_eq!(prof[0].1, 1.0);
    }

    #[test]
    fn full_rank_direction_rejected() {
        let err = AffineSubspace::new(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0));
        assert!(err.is_err());
        let line = AffineSubspace::new(
            DVector::zeros(2),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        assert!((line.distance(&DVector::from_column_slice(&[5.0, -2.0])) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_fixtures() {
        let m = IfsModel::preset("cantor3-power-d2").unwrap();
        let one = Polynomial::new(2, vec![(vec![0, 0], 1.0)]).unwrap();
        let prof = polynomial_nonconcentration(&m, &one, &[0.5, 0.99], 20, 500, 4).unwrap();
        assert!(prof.iter().all(|&(_, f)| f == 0.0));
        assert!(Polynomial::new(2, vec![(vec![1, 0], 0.0)]).is_err());
        assert!(Polynomial::new(2, vec![(vec![1, 0], 2.0)]).is_err());
        let p = Polynomial::normalized(2, vec![(vec![1, 1], 2.0), (vec![0, 1], -2.0)]).unwrap();
        let prof = polynomial_nonconcentration(&m, &p, &[10.0], 20, 500, 4).unwrap();
        assert_eq!(prof[0].1, 1.0);
    }

    #[test]
    fn default_depth_reaches_e_minus_40() {
        let m = cantor();
        assert_eq!(m.default_depth(), 37);
        assert!((m.default_depth() as f64) * m.lyapunov_exponent() >= 40.0);
    }
}
