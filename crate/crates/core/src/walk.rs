//! The random walk on the space of lattices driven by an IFS, and the
//! expanding translates `a(t) u(s) x_0` for `s` drawn from a measure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homspace::{
    haar_sample_sl2, lll_reduce, make_a, make_k, make_u, restricted_density,
    restricted_siegel_transform, shortest_vector, AxisBox, GroupElement, LatticeBasis,
};
use crate::ifs::{IfsModel, PointMeasure, Similarity};
use crate::seed::{par_items, rng_from_seed};
use crate::stats::Estimate;

/// Steps used when a long walk stands in for Haar measure (`d >= 2`).
pub const BURN_IN_STEPS: usize = 200;

/// `k_φ^{-1} a(r_φ^{-1}) u(b_φ)` with `k_φ = diag(O_φ, 1)`.
pub fn mu_element(phi: &Similarity) -> Result<GroupElement> {
    let k_inv = make_k(&phi.rotation().transpose());
    let a = make_a(1.0 / phi.ratio(), phi.dim())?;
    let u = make_u(phi.translation().as_slice());
    Ok(k_inv.mul(&a).mul(&u))
}

/// Largest entrywise difference between `k_g a(t r_g) u(s) g` and
/// `a(t) u(φ_g(s))`, where `g` is the walk element of `φ`.
pub fn cocycle_defect(phi: &Similarity, t: f64, s: &[f64]) -> Result<f64> {
    if s.len() != phi.dim() {
        return Err(Error::InvalidArgument("s has the wrong dimension".into()));
    }
    let g = mu_element(phi)?;
    let d = phi.dim();
    let lhs = make_k(phi.rotation())
        .mul(&make_a(t * phi.ratio(), d)?)
        .mul(&make_u(s))
        .mul(&g);
    let image = phi.apply(&DVector::from_column_slice(s));
    let rhs = make_a(t, d)?.mul(&make_u(image.as_slice()));
    Ok((lhs.matrix() - rhs.matrix()).amax())
}

pub fn cocycle_identity_check(phi: &Similarity, t: f64, s: &[f64], tol: f64) -> Result<bool> {
    Ok(cocycle_defect(phi, t, s)? <= tol)
}

/// A lattice visited by the walk, with its step count and `Σ log r`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    pub basis: LatticeBasis,
    pub steps: usize,
    pub log_r_sum: f64,
}

impl WalkState {
    pub fn new(basis: LatticeBasis) -> Self {
        WalkState {
            basis,
            steps: 0,
            log_r_sum: 0.0,
        }
    }

    pub fn standard(d: usize) -> Self {
        WalkState::new(LatticeBasis::standard(d))
    }

    /// Applies `g` on the left and re-reduces the basis.
    pub fn apply(&mut self, g: &GroupElement) -> Result<()> {
        let mut next = self.basis.left_mul(g);
        next.renormalize();
        self.basis = lll_reduce(&next)?;
        Ok(())
    }

    /// One step: `φ ~ λ`, then `x ↦ mu_element(φ) x`.
    pub fn step<R: Rng + ?Sized>(&mut self, model: &IfsModel, rng: &mut R) -> Result<()> {
        let phi = &model.maps()[model.choose(rng)];
        self.apply(&mu_element(phi)?)?;
        self.steps += 1;
        self.log_r_sum += phi.ratio().ln();
        Ok(())
    }

    pub fn run<R: Rng + ?Sized>(&mut self, model: &IfsModel, n: usize, rng: &mut R) -> Result<()> {
        for _ in 0..n {
            self.step(model, rng)?;
        }
        Ok(())
    }

    /// Length of the shortest nonzero vector.
    pub fn lambda1(&self) -> Result<f64> {
        Ok(shortest_vector(&self.basis)?.1)
    }
}

pub fn walk_step<R: Rng + ?Sized>(
    state: &WalkState,
    model: &IfsModel,
    rng: &mut R,
) -> Result<WalkState> {
    let mut next = state.clone();
    next.step(model, rng)?;
    Ok(next)
}

/// A function on the space of lattices with an exactly known Haar mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// Nonzero lattice points in `bx` with coordinate gcd at most `m`.
    RestrictedSiegel {
        bx: AxisBox,
        m: Option<u64>,
    },
}

impl TestFunction {
    pub fn siegel(bx: AxisBox, m: Option<u64>) -> Self {
        TestFunction::RestrictedSiegel { bx, m }
    }

    pub fn eval(&self, basis: &LatticeBasis) -> Result<f64> {
        match self {
            TestFunction::Constant { value } => Ok(*value),
            TestFunction::RestrictedSiegel { bx, m } => {
                if bx.dim() != basis.dim() {
                    return Err(Error::InvalidArgument(
                        "box and lattice dimensions differ".into(),
                    ));
                }
                Ok(restricted_siegel_transform(basis, bx, *m)? as f64)
            }
        }
    }

    /// `∫_X f dm_X`, which for the restricted Siegel transform is
    /// `ζ(d+1)^{-1} Σ_{t<=m} t^{-(d+1)} · Leb(bx)`.
    pub fn haar_mean(&self, d: usize) -> Result<f64> {
        match self {
            TestFunction::Constant { value } => Ok(*value),
            TestFunction::RestrictedSiegel { bx, m } => {
                Ok(restricted_density(d, *m)? * bx.volume())
            }
        }
    }
}

/// Terminal summary of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub id: usize,
    pub seed: u64,
    pub n: usize,
    pub lambda1: f64,
    pub log_lambda1: f64,
    pub statistics: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub master_seed: u64,
    pub size: usize,
    pub trajectories: Vec<TrajectorySummary>,
}

impl EnsembleStats {
    pub fn lambda1(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.lambda1).collect()
    }

    /// Mean of the `j`-th statistic over the ensemble.
    pub fn statistic(&self, j: usize) -> Estimate {
        let v: Vec<f64> = self.trajectories.iter().map(|t| t.statistics[j]).collect();
        Estimate::from_values(&v)
    }

    /// Fraction of trajectories with `λ_1 <= ρ`, for each `ρ`.
    pub fn cusp_fractions(&self, rhos: &[f64]) -> Vec<(f64, Estimate)> {
        let l = self.lambda1();
        rhos.iter()
            .map(|&rho| {
                (
                    rho,
                    Estimate::proportion(l.iter().filter(|&&x| x <= rho).count(), l.len()),
                )
            })
            .collect()
    }
}

fn check_ensemble(size: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::InvalidArgument("ensemble must be nonempty".into()));
    }
    Ok(())
}

/// Terminal states of `ensemble` independent `n`-step walks from `start`.
pub fn run_ensemble(
    model: &IfsModel,
    start: &LatticeBasis,
    n: usize,
    functions: &[TestFunction],
    ensemble: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    check_ensemble(ensemble)?;
    if start.d() != model.dimension() {
        return Err(Error::InvalidArgument(
            "start lattice and model dimensions differ".into(),
        ));
    }
    let rows = par_items(seed, ensemble, |id, s| -> Result<TrajectorySummary> {
        let mut st = WalkState::new(lll_reduce(start)?);
        st.run(model, n, &mut rng_from_seed(s))?;
        let lambda1 = st.lambda1()?;
        let statistics = functions
            .iter()
            .map(|f| f.eval(&st.basis))
            .collect::<Result<_>>()?;
        Ok(TrajectorySummary {
            id,
            seed: s,
            n,
            lambda1,
            log_lambda1: lambda1.ln(),
            statistics,
        })
    });
    Ok(EnsembleStats {
        master_seed: seed,
        size: ensemble,
        trajectories: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `λ_1` along each trajectory at every checkpoint (increasing step counts).
/// The same paths are followed for all checkpoints.
pub fn lambda1_paths(
    model: &IfsModel,
    start: &LatticeBasis,
    checkpoints: &[usize],
    ensemble: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_ensemble(ensemble)?;
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "checkpoints must be increasing".into(),
        ));
    }
    par_items(seed, ensemble, |_, s| -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(s);
        let mut st = WalkState::new(lll_reduce(start)?);
        checkpoints
            .iter()
            .map(|&n| {
                st.run(model, n - st.steps, &mut rng)?;
                st.lambda1()
            })
            .collect()
    })
    .into_iter()
    .collect()
}

/// Fraction of `n`-step trajectories with `λ_1 <= ρ`, for each `ρ`.
pub fn recurrence_profile(
    model: &IfsModel,
    start: &LatticeBasis,
    n: usize,
    rhos: &[f64],
    ensemble: usize,
    seed: u64,
) -> Result<Vec<(f64, Estimate)>> {
    Ok(run_ensemble(model, start, n, &[], ensemble, seed)?.cusp_fractions(rhos))
}

/// Fraction with `λ_1 <= ρ` at each checkpoint `n`, along shared paths.
pub fn cusp_decay(
    model: &IfsModel,
    start: &LatticeBasis,
    checkpoints: &[usize],
    rho: f64,
    ensemble: usize,
    seed: u64,
) -> Result<Vec<(usize, Estimate)>> {
    let paths = lambda1_paths(model, start, checkpoints, ensemble, seed)?;
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            (
                n,
                Estimate::proportion(paths.iter().filter(|p| p[j] <= rho).count(), ensemble),
            )
        })
        .collect())
}

fn signed_permutations(n: usize) -> Vec<DMatrix<f64>> {
    fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            perms(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut ps = Vec::new();
    perms(&mut (0..n).collect(), 0, &mut ps);
    let mut out = Vec::with_capacity(ps.len() << n);
    for p in &ps {
        for signs in 0..(1u32 << n) {
            let mut m = DMatrix::zeros(n, n);
            for (j, &i) in p.iter().enumerate() {
                m[(i, j)] = if signs >> j & 1 == 1 { -1.0 } else { 1.0 };
            }
            out.push(m);
        }
    }
    out
}

/// Distance proxy between two lattices: `min_P ‖B_x P B_y^{-1} - I‖_F` over
/// signed permutations `P`, with `B_x`, `B_y` LLL-reduced bases. Zero for
/// equal lattices with equal reduced bases; only meaningful comparatively.
pub fn lattice_distance(x: &LatticeBasis, y: &LatticeBasis) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::InvalidArgument(
            "lattices of different dimension".into(),
        ));
    }
    let bx = lll_reduce(x)?;
    let by = lll_reduce(y)?;
    let by_inv = by
        .columns()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularBasis)?;
    let n = x.dim();
    let id = DMatrix::<f64>::identity(n, n);
    Ok(signed_permutations(n)
        .iter()
        .map(|p| (bx.columns() * p * &by_inv - &id).norm())
        .fold(f64::INFINITY, f64::min))
}

/// For each target, the fraction of `n`-step trajectories ending within
/// proxy distance `rho` of it.
pub fn ball_mass_profile(
    model: &IfsModel,
    start: &LatticeBasis,
    n: usize,
    rho: f64,
    targets: &[LatticeBasis],
    ensemble: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    Ok(
        ball_mass_distances(model, start, n, targets, ensemble, seed)?
            .iter()
            .map(|ds| Estimate::proportion(ds.iter().filter(|&&d| d <= rho).count(), ds.len()))
            .collect(),
    )
}

/// Proxy distances from each terminal lattice to each target, grouped by
/// target.
pub fn ball_mass_distances(
    model: &IfsModel,
    start: &LatticeBasis,
    n: usize,
    targets: &[LatticeBasis],
    ensemble: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_ensemble(ensemble)?;
    let rows: Vec<Vec<f64>> = par_items(seed, ensemble, |_, s| -> Result<Vec<f64>> {
        let mut st = WalkState::new(lll_reduce(start)?);
        st.run(model, n, &mut rng_from_seed(s))?;
        targets
            .iter()
            .map(|y| lattice_distance(&st.basis, y))
            .collect()
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((0..targets.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect())
}

/// A lattice approximately Haar distributed: exact for `d = 1`, otherwise
/// the end point of a `BURN_IN_STEPS`-step walk from `Z^{d+1}`. The flag
/// says whether the sample is exact.
pub fn haar_reference_sample(model: &IfsModel, seed: u64) -> Result<(LatticeBasis, bool)> {
    let d = model.dimension();
    if d == 1 {
        return Ok((
            lll_reduce(&LatticeBasis::from_group(&haar_sample_sl2(seed)))?,
            true,
        ));
    }
    let mut st = WalkState::standard(d);
    st.run(model, BURN_IN_STEPS, &mut rng_from_seed(seed))?;
    Ok((st.basis, false))
}

/// The lattice `a(t) u(s) Z^{d+1}`.
pub fn translate_lattice(t: f64, s: &[f64]) -> Result<LatticeBasis> {
    Ok(LatticeBasis::from_factors(&[
        make_a(t, s.len())?,
        make_u(s),
    ]))
}

/// Monte Carlo mean of `f(a(t) u(s) x_0)` for `s` drawn from `measure`.
pub fn expanding_translate_statistic(
    measure: &PointMeasure,
    t: f64,
    f: &TestFunction,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_ensemble(samples)?;
    let values = par_items(seed, samples, |_, s| {
        f.eval(&translate_lattice(t, measure.sample(s).as_slice())?)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_values(&values))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleCorrelation {
    /// `∫ f_1(a(t_1)u(s)x_0) f_2(a(t_2)u(s)x_0) dσ(s)`
    pub product: Estimate,
    /// `m_X(f_1) m_X(f_2)`
    pub haar_product: f64,
    pub deviation: f64,
}

/// `|∫ f_1(a(t_1)u(s)x_0) f_2(a(t_2)u(s)x_0) dσ(s) - m_X(f_1) m_X(f_2)|`.
pub fn double_correlation(
    measure: &PointMeasure,
    t1: f64,
    t2: f64,
    f1: &TestFunction,
    f2: &TestFunction,
    samples: usize,
    seed: u64,
) -> Result<DoubleCorrelation> {
    if !(t2 >= t1 && t1 > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need t2 >= t1 > 1, got t1={t1}, t2={t2}"
        )));
    }
    check_ensemble(samples)?;
    let values = par_items(seed, samples, |_, s| -> Result<f64> {
        let s = measure.sample(s);
        Ok(f1.eval(&translate_lattice(t1, s.as_slice())?)?
            * f2.eval(&translate_lattice(t2, s.as_slice())?)?)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let d = measure.dimension();
    let product = Estimate::from_values(&values);
    let haar_product = f1.haar_mean(d)? * f2.haar_mean(d)?;
    Ok(DoubleCorrelation {
        product,
        haar_product,
        deviation: (product.mean - haar_product).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn third(b: f64) -> Similarity {
        Similarity::homothety(1.0 / 3.0, &[b]).unwrap()
    }

    #[test]
    fn mu_element_fixtures() {
        let g = mu_element(&third(0.0)).unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(
            g.matrix(),
            &DMatrix::from_row_slice(2, 2, &[s3, 0.0, 0.0, 1.0 / s3]),
            epsilon = 1e-14
        );
        let g = mu_element(&third(2.0 / 3.0)).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[s3, s3 * 2.0 / 3.0, 0.0, 1.0 / s3]);
        assert_relative_eq!(g.matrix(), &want, epsilon = 1e-14);
        let g = mu_element(&Similarity::identity(2)).unwrap();
        assert_relative_eq!(g.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn cocycle_detects_perturbation() {
        let phi = third(2.0 / 3.0);
        assert!(cocycle_identity_check(&phi, 7.0, &[0.25], 1e-10).unwrap());
        let g = mu_element(&phi).unwrap();
        let mut lhs = make_k(phi.rotation())
            .mul(&make_a(7.0 * phi.ratio(), 1).unwrap())
            .mul(&make_u(&[0.25]))
            .mul(&g);
        let rhs = make_a(7.0, 1)
            .unwrap()
            .mul(&make_u(&[phi.apply(&DVector::from_element(1, 0.25))[0]]));
        let mut m = lhs.matrix().clone();
        m[(0, 1)] += 1e-6;
        lhs = GroupElement::normalized(m).unwrap();
        assert!((lhs.matrix() - rhs.matrix()).amax() > 1e-10);
    }

    #[test]
    fn one_step_from_origin() {
        let model = IfsModel::new(1, vec![(1.0, third(0.0))], "third").unwrap();
        let mut st = WalkState::standard(1);
        st.step(&model, &mut rng_from_seed(1)).unwrap();
        assert_relative_eq!(st.lambda1().unwrap(), 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_eq!(st.steps, 1);
        assert_relative_eq!(st.log_r_sum, -(3f64.ln()), epsilon = 1e-15);
    }

    #[test]
    fn steps_compose_to_product() {
        let model = IfsModel::preset("sierpinski-triangle").unwrap();
        let mut rng = rng_from_seed(5);
        let mut st = WalkState::standard(2);
        let mut prod = DMatrix::<f64>::identity(3, 3);
        for _ in 0..30 {
            let phi = &model.maps()[model.choose(&mut rng)];
            let g = mu_element(phi).unwrap();
            st.apply(&g).unwrap();
            prod = g.matrix() * prod;
        }
        // same lattice: prod^{-1} B is an integer matrix
        let coeffs = prod.try_inverse().unwrap() * st.basis.columns();
        for c in coeffs.iter() {
            assert!((c - c.round()).abs() < 1e-8 * c.abs().max(1.0), "{coeffs}");
        }
    }

    #[test]
    fn determinism_and_cusp_monotone() {
        let model = IfsModel::preset("cantor3").unwrap();
        let x0 = LatticeBasis::standard(1);
        // Hermite's bound in the plane: λ_1 <= (4/3)^{1/4}
        let hermite = (4.0f64 / 3.0).powf(0.25) + 1e-12;
        let a = recurrence_profile(&model, &x0, 12, &[0.05, 0.2, hermite], 64, 9).unwrap();
        let b = recurrence_profile(&model, &x0, 12, &[0.05, 0.2, hermite], 64, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].1.mean <= w[1].1.mean));
        assert_eq!(a[2].1.mean, 1.0);
    }

    #[test]
    fn distance_proxy() {
        let x = LatticeBasis::from_group(&GroupElement::random(2, &mut rng_from_seed(3)));
        assert!(lattice_distance(&x, &x).unwrap() < 1e-9);
        let skew = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0]);
        let y = LatticeBasis::from_columns(x.columns() * skew).unwrap();
        assert!(lattice_distance(&x, &y).unwrap() < 1e-6);
        let model = IfsModel::preset("cantor3").unwrap();
        let x0 = LatticeBasis::standard(1);
        let m = ball_mass_profile(&model, &x0, 0, 1e-3, std::slice::from_ref(&x0), 4, 1).unwrap();
        assert_eq!(m[0].mean, 1.0);
    }

    #[test]
    fn constant_function_correlation() {
        let m = PointMeasure::Lebesgue { d: 1 };
        let one = TestFunction::Constant { value: 1.0 };
        let f = TestFunction::siegel(AxisBox::cube(2, 0.0, 1.5).unwrap(), Some(1));
        let single = expanding_translate_statistic(&m, 50.0, &f, 200, 4).unwrap();
        let dc = double_correlation(&m, 50.0, 50.0, &f, &one, 200, 4).unwrap();
        assert_relative_eq!(dc.product.mean, single.mean, epsilon = 1e-12);
        assert_relative_eq!(dc.haar_product, f.haar_mean(1).unwrap(), epsilon = 1e-15);
    }
}
