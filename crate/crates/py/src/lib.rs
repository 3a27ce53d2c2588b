//! Python bindings: models, approximation functions, lattices and the
//! main experiments.

use fractal_khintchine::dioph::{count_all, dani_cross_check, ApproxFunction};
use fractal_khintchine::homspace::{
    c_m, restricted_siegel_transform, shortest_vector, AxisBox, GroupElement, LatticeBasis,
};
use fractal_khintchine::ifs::{sample_sigma_n, IfsModel, ModelConfig, PointMeasure};
use fractal_khintchine::liegeom::{
    enumerate_staircases, find_transversal_witness, mnc_statistic, obstruction_check,
    sl2_base_case, StaircaseSet, WitnessMode,
};
use fractal_khintchine::seed::rng_from_seed;
use fractal_khintchine::walk::{expanding_translate_statistic, run_ensemble, TestFunction};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A self-similar measure given by weighted similarities.
#[pyclass(name = "Model", frozen)]
struct PyModel(IfsModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        IfsModel::preset(name).map(PyModel).map_err(err)
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        IfsModel::preset_names().to_vec()
    }

    /// Builds a model from `{"dimension": d, "maps": [{"weight", "ratio", "translation"}, ...]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(err)?;
        IfsModel::from_config(&cfg).map(PyModel).map_err(err)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    fn lyapunov_exponent(&self) -> f64 {
        self.0.lyapunov_exponent()
    }

    fn default_depth(&self) -> usize {
        self.0.default_depth()
    }

    fn sample(&self, depth: usize, seed: u64) -> Vec<f64> {
        sample_sigma_n(&self.0, depth, seed)
            .point
            .iter()
            .copied()
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({:?}, d={}, maps={})",
            self.0.label(),
            self.0.dimension(),
            self.0.len()
        )
    }
}

/// Approximation function, parsed from strings like `power:a=0.5`.
#[pyclass(name = "Psi", frozen)]
struct PyPsi(ApproxFunction);

#[pymethods]
impl PyPsi {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(PyPsi).map_err(err)
    }

    fn __call__(&self, q: u64) -> f64 {
        self.0.eval(q)
    }

    fn sum_pow(&self, d: usize, n: u64) -> f64 {
        self.0.sum_pow(d, n)
    }
}

/// A unimodular lattice in `R^{d+1}`.
#[pyclass(name = "Lattice", frozen)]
struct PyLattice(LatticeBasis);

#[pymethods]
impl PyLattice {
    #[staticmethod]
    fn standard(d: usize) -> Self {
        PyLattice(LatticeBasis::standard(d))
    }

    /// The lattice spanned by the columns of `rows`, rescaled to covolume one.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(err("need a square matrix of size at least 2"));
        }
        let g =
            GroupElement::normalized(DMatrix::from_row_slice(n, n, &rows.concat())).map_err(err)?;
        Ok(PyLattice(LatticeBasis::from_group(&g)))
    }

    #[staticmethod]
    fn random(d: usize, seed: u64) -> Self {
        PyLattice(LatticeBasis::from_group(&GroupElement::random(
            d,
            &mut rng_from_seed(seed),
        )))
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    /// Basis matrix; column `j` is the `j`-th basis vector.
    fn rows(&self) -> Vec<Vec<f64>> {
        self.0
            .columns()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    fn lambda1(&self) -> PyResult<f64> {
        shortest_vector(&self.0).map(|v| v.1).map_err(err)
    }

    /// Nonzero lattice points in the box `"lo,hi x lo,hi ..."` whose
    /// coordinate gcd is at most `m`.
    #[pyo3(signature = (bx, m=None))]
    fn siegel(&self, bx: &str, m: Option<u64>) -> PyResult<u64> {
        let bx: AxisBox = bx.parse().map_err(err)?;
        restricted_siegel_transform(&self.0, &bx, m).map_err(err)
    }
}

fn measure(model: Option<&PyModel>, d: usize) -> PointMeasure {
    match model {
        Some(m) => PointMeasure::self_similar(m.0.clone()),
        None => PointMeasure::Lebesgue { d },
    }
}

fn parse_pairs(d: usize, pairs: Option<Vec<(usize, usize)>>) -> PyResult<StaircaseSet> {
    match pairs {
        Some(p) => StaircaseSet::new(d, p).map_err(err),
        None => Ok(StaircaseSet::top_row(d)),
    }
}

/// Two-sided, one-sided and primitive counts up to `n`.
#[pyfunction]
fn count<'py>(py: Python<'py>, s: Vec<f64>, psi: &PyPsi, n: u64) -> PyResult<Bound<'py, PyDict>> {
    let c = count_all(&s, &psi.0, n).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("two_sided", c.two_sided)?;
    out.set_item("one_sided", c.one_sided)?;
    out.set_item("primitive", c.primitive)?;
    out.set_item("boundary_risk", c.boundary_risk)?;
    Ok(out)
}

/// Direct and lattice counts of the `k`-th block.
#[pyfunction]
fn dani_check(s: Vec<f64>, psi: &PyPsi, tau: f64, k: u32) -> PyResult<(u64, u64)> {
    let c = dani_cross_check(&s, &psi.0, tau, k).map_err(err)?;
    Ok((c.direct, c.lattice))
}

/// `λ_1` after `n` walk steps from `Z^{d+1}`, one value per trajectory.
#[pyfunction]
fn walk_lambda1(model: &PyModel, n: usize, ensemble: usize, seed: u64) -> PyResult<Vec<f64>> {
    let start = LatticeBasis::standard(model.0.dimension());
    Ok(run_ensemble(&model.0, &start, n, &[], ensemble, seed)
        .map_err(err)?
        .lambda1())
}

/// `(ρ, fraction, se)` of trajectories with `λ_1 <= ρ` after `n` steps.
#[pyfunction]
fn recurrence(
    model: &PyModel,
    n: usize,
    rhos: Vec<f64>,
    ensemble: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let start = LatticeBasis::standard(model.0.dimension());
    let stats = run_ensemble(&model.0, &start, n, &[], ensemble, seed).map_err(err)?;
    Ok(stats
        .cusp_fractions(&rhos)
        .into_iter()
        .map(|(r, e)| (r, e.mean, e.se))
        .collect())
}

/// Mean and standard error of the restricted Siegel transform over
/// `a(t) u(s) Z^{d+1}`; `model=None` draws `s` uniformly from `[0,1]^d`.
#[pyfunction]
#[pyo3(signature = (t, bx, model=None, d=1, m=Some(1), samples=10000, seed=0))]
fn equidist(
    t: f64,
    bx: &str,
    model: Option<PyRef<'_, PyModel>>,
    d: usize,
    m: Option<u64>,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let ms = measure(model.as_deref(), d);
    let f = TestFunction::siegel(bx.parse().map_err(err)?, m);
    let e = expanding_translate_statistic(&ms, t, &f, samples, seed).map_err(err)?;
    Ok((e.mean, e.se))
}

/// Haar mean of the restricted Siegel transform of a box.
#[pyfunction]
#[pyo3(signature = (bx, d, m=Some(1)))]
fn haar_mean(bx: &str, d: usize, m: Option<u64>) -> PyResult<f64> {
    TestFunction::siegel(bx.parse().map_err(err)?, m)
        .haar_mean(d)
        .map_err(err)
}

#[pyfunction]
#[pyo3(name = "c_m")]
fn py_c_m(m: u64) -> PyResult<f64> {
    c_m(m).map_err(err)
}

/// Dimension of the obstruction intersection at a random group element.
#[pyfunction]
fn obstruction_dim(d: usize, seed: u64) -> PyResult<usize> {
    obstruction_check(&GroupElement::random(d, &mut rng_from_seed(seed))).map_err(err)
}

#[pyfunction]
fn staircases(d: usize) -> PyResult<Vec<Vec<(usize, usize)>>> {
    Ok(enumerate_staircases(d)
        .map_err(err)?
        .into_iter()
        .map(|s| s.pairs.into_iter().collect())
        .collect())
}

/// Wedge norm of a transversal witness for the staircase `pairs`
/// (default: the top row). `d = 1` with no pairs returns the explicit base case.
#[pyfunction]
#[pyo3(signature = (d, pairs=None, seed=0, max_tries=100, unipotent_only=false))]
fn witness(
    d: usize,
    pairs: Option<Vec<(usize, usize)>>,
    seed: u64,
    max_tries: usize,
    unipotent_only: bool,
) -> PyResult<f64> {
    if d == 1 && pairs.is_none() {
        return Ok(sl2_base_case().wedge);
    }
    let w = parse_pairs(d, pairs)?.subspace().map_err(err)?;
    let mode = if unipotent_only {
        WitnessMode::UnipotentOnly
    } else {
        WitnessMode::General
    };
    Ok(find_transversal_witness(&w, mode, seed, max_tries)
        .map_err(err)?
        .wedge)
}

/// `(r, fraction, se)` of depth-`n` words whose wedge with `W` is below `r`.
#[pyfunction]
#[pyo3(signature = (model, n, r_grid, pairs=None, samples=10000, seed=0))]
fn mnc(
    model: &PyModel,
    n: usize,
    r_grid: Vec<f64>,
    pairs: Option<Vec<(usize, usize)>>,
    samples: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let w = parse_pairs(model.0.dimension(), pairs)?
        .subspace()
        .map_err(err)?;
    let prof = mnc_statistic(&model.0, n, &w, &r_grid, samples, seed).map_err(err)?;
    Ok(prof.into_iter().map(|(r, e)| (r, e.mean, e.se)).collect())
}

#[pymodule]
#[pyo3(name = "fractal_khintchine")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyPsi>()?;
    m.add_class::<PyLattice>()?;
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(dani_check, m)?)?;
    m.add_function(wrap_pyfunction!(walk_lambda1, m)?)?;
    m.add_function(wrap_pyfunction!(recurrence, m)?)?;
    m.add_function(wrap_pyfunction!(equidist, m)?)?;
    m.add_function(wrap_pyfunction!(haar_mean, m)?)?;
    m.add_function(wrap_pyfunction!(py_c_m, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction_dim, m)?)?;
    m.add_function(wrap_pyfunction!(staircases, m)?)?;
    m.add_function(wrap_pyfunction!(witness, m)?)?;
    m.add_function(wrap_pyfunction!(mnc, m)?)?;
    Ok(())
}
