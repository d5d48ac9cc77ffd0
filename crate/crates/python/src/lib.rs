//! Python module `pyshapley`: input laws, the analytic test models, Shapley
//! and RT-Sobol' estimation, kriging metamodels and their Shapley effects.
//!
//! Models are either the built-in classes or any callable taking a list of
//! floats and returning a float. The GIL is released while estimating;
//! callables reacquire it for each evaluation.

use std::sync::Mutex;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use shapley_gsa::kriging::{self, GpOptions, GpShapleyOptions, RealizationMethod};
use shapley_gsa::shapley::{self as sh, ShapleyConfig, ShapleyResult};
use shapley_gsa::sobol_rt::{estimate_sobol_rt, PickFreezeEstimator};
use shapley_gsa::test_models as tm;
use shapley_gsa::uncertainty::{bootstrap_exact, bootstrap_random, IntervalEstimate, ShapleyIntervals};
use shapley_gsa::{CorrelationMatrix, GsaError, MarginSpec, Model, Ordering, SampleMatrix};

fn to_py(e: GsaError) -> PyErr {
    match e {
        GsaError::InvalidArgument(_)
        | GsaError::NotPositiveDefinite(_)
        | GsaError::OutsideSupport { .. }
        | GsaError::BudgetExceeded(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<SampleMatrix> {
    SampleMatrix::from_rows(&rows).map_err(to_py)
}

fn rows(x: &SampleMatrix) -> Vec<Vec<f64>> {
    x.rows().map(<[f64]>::to_vec).collect()
}

fn correlation(d: usize, c: Option<Vec<Vec<f64>>>) -> PyResult<CorrelationMatrix> {
    match c {
        None => Ok(CorrelationMatrix::identity(d)),
        Some(c) => {
            if c.len() != d || c.iter().any(|r| r.len() != d) {
                return Err(PyValueError::new_err(format!("correlation must be {d} x {d}")));
            }
            CorrelationMatrix::from_row_major(d, &c.concat()).map_err(to_py)
        }
    }
}

fn margin(spec: &Bound<'_, PyDict>) -> PyResult<MarginSpec> {
    let get = |key: &str| -> PyResult<f64> {
        spec.get_item(key)?
            .ok_or_else(|| PyValueError::new_err(format!("margin is missing `{key}`")))?
            .extract()
    };
    let kind: String = spec
        .get_item("kind")?
        .ok_or_else(|| PyValueError::new_err("margin is missing `kind`"))?
        .extract()?;
    match kind.as_str() {
        "uniform" => MarginSpec::uniform(get("lower")?, get("upper")?),
        "normal" => MarginSpec::normal(get("mean")?, get("std")?),
        other => return Err(PyValueError::new_err(format!("unknown margin kind {other:?}"))),
    }
    .map_err(to_py)
}

/// Margins plus Gaussian-copula correlation.
#[pyclass(name = "InputDistribution", module = "pyshapley", frozen)]
struct PyDistribution {
    inner: shapley_gsa::InputDistribution,
}

#[pymethods]
impl PyDistribution {
    /// `margins`: dicts such as `{"kind": "uniform", "lower": 0, "upper": 1}`
    /// or `{"kind": "normal", "mean": 0, "std": 1}`.
    #[new]
    #[pyo3(signature = (margins, correlation = None))]
    fn new(margins: Vec<Bound<'_, PyDict>>, correlation: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let margins = margins.iter().map(margin).collect::<PyResult<Vec<_>>>()?;
        let copula = self::correlation(margins.len(), correlation)?;
        Ok(Self { inner: shapley_gsa::InputDistribution::new(margins, copula).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn correlation(&self) -> Vec<Vec<f64>> {
        let d = self.inner.dim();
        self.inner.copula().to_row_major().chunks(d).map(<[f64]>::to_vec).collect()
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        rows(&self.inner.sample(n, &mut shapley_gsa::rng::substream(seed, &[])))
    }

    /// Uniform coordinates of `x` along `ordering`.
    fn rosenblatt(&self, x: Vec<f64>, ordering: Vec<usize>) -> PyResult<Vec<f64>> {
        let ord = Ordering::new(ordering).map_err(to_py)?;
        self.inner.rosenblatt(&x, &ord).map_err(to_py)
    }

    fn inverse_rosenblatt(&self, u: Vec<f64>, ordering: Vec<usize>) -> PyResult<Vec<f64>> {
        let ord = Ordering::new(ordering).map_err(to_py)?;
        self.inner.inverse_rosenblatt(&u, &ord).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))? })
    }

    fn __repr__(&self) -> String {
        format!("InputDistribution(dim={})", self.inner.dim())
    }
}

fn index_dict<'py>(py: Python<'py>, set: &tm::IndexSet) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("variance", set.variance)?;
    d.set_item("sh", &set.sh)?;
    d.set_item("s_full", &set.s_full)?;
    d.set_item("st_full", &set.st_full)?;
    d.set_item("s_ind", &set.s_ind)?;
    d.set_item("st_ind", &set.st_ind)?;
    Ok(d)
}

/// `Y = βᵀX` with three correlated Gaussian inputs.
#[pyclass(name = "LinearGaussian", module = "pyshapley", frozen)]
struct PyLinear {
    inner: tm::LinearGaussianParams,
}

#[pymethods]
impl PyLinear {
    #[new]
    #[pyo3(signature = (sigma, beta = [1.0; 3], alpha = 0.0, rho = 0.0, gamma = 0.0))]
    fn new(sigma: [f64; 3], beta: [f64; 3], alpha: f64, rho: f64, gamma: f64) -> PyResult<Self> {
        Ok(Self { inner: tm::LinearGaussianParams::new(beta, sigma, alpha, rho, gamma).map_err(to_py)? })
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        tm::eval_linear(&self.inner, &x)
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn distribution(&self) -> PyResult<PyDistribution> {
        Ok(PyDistribution { inner: self.inner.distribution().map_err(to_py)? })
    }

    fn analytic_indices<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        index_dict(py, &tm::analytic_indices_linear(&self.inner).map_err(to_py)?)
    }

    /// Output variance after scaling `σ_target` by `shrink`.
    fn variance_reduction(&self, shrink: f64, target: usize) -> PyResult<f64> {
        tm::variance_reduction_table(&self.inner, shrink, target).map_err(to_py)
    }
}

/// `Y = β₁β₂X₁X₂` with two correlated centred Gaussian inputs.
#[pyclass(name = "InteractiveGaussian", module = "pyshapley", frozen)]
struct PyInteractive {
    inner: tm::InteractiveParams,
}

#[pymethods]
impl PyInteractive {
    #[new]
    #[pyo3(signature = (sigma, beta = [1.0; 2], rho = 0.0))]
    fn new(sigma: [f64; 2], beta: [f64; 2], rho: f64) -> PyResult<Self> {
        Ok(Self { inner: tm::InteractiveParams::new(beta, sigma, rho).map_err(to_py)? })
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        tm::eval_interactive(&self.inner, &x)
    }

    fn distribution(&self) -> PyResult<PyDistribution> {
        Ok(PyDistribution { inner: self.inner.distribution().map_err(to_py)? })
    }

    fn analytic_indices<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        index_dict(py, &tm::analytic_indices_interactive(&self.inner))
    }
}

/// The Ishigami function on `U[−π, π]³`.
#[pyclass(name = "Ishigami", module = "pyshapley", frozen)]
struct PyIshigami {
    copula: CorrelationMatrix,
}

#[pymethods]
impl PyIshigami {
    #[new]
    #[pyo3(signature = (correlation = None))]
    fn new(correlation: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        Ok(Self { copula: self::correlation(3, correlation)? })
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        tm::eval_ishigami(&x)
    }

    fn distribution(&self) -> PyResult<PyDistribution> {
        Ok(PyDistribution { inner: tm::ishigami_distribution(self.copula.clone()).map_err(to_py)? })
    }

    /// Closed-form indices; `None` unless the inputs are independent.
    fn analytic_indices<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        self.copula.is_identity().then(|| index_dict(py, &tm::oracle_ishigami_independent())).transpose()
    }
}

/// A Python callable seen as a model. The first exception raised is kept
/// and re-raised once the estimation returns.
struct Callable {
    f: Py<PyAny>,
    error: Mutex<Option<PyErr>>,
}

impl Model for Callable {
    fn eval(&self, x: &[f64]) -> f64 {
        Python::attach(|py| match self.f.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)) {
            Ok(v) => v,
            Err(e) => {
                self.error.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        })
    }
}

enum AnyModel {
    Linear(tm::LinearGaussianParams),
    Interactive(tm::InteractiveParams),
    Ishigami,
    Callable(Callable),
}

impl AnyModel {
    fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Self> {
        if let Ok(m) = obj.extract::<PyRef<PyLinear>>() {
            return Ok(AnyModel::Linear(m.inner));
        }
        if let Ok(m) = obj.extract::<PyRef<PyInteractive>>() {
            return Ok(AnyModel::Interactive(m.inner));
        }
        if obj.extract::<PyRef<PyIshigami>>().is_ok() {
            return Ok(AnyModel::Ishigami);
        }
        if obj.is_callable() {
            return Ok(AnyModel::Callable(Callable { f: obj.clone().unbind(), error: Mutex::new(None) }));
        }
        Err(PyValueError::new_err("model must be a built-in model or a callable"))
    }

    fn as_model(&self) -> &dyn Model {
        match self {
            AnyModel::Linear(p) => p,
            AnyModel::Interactive(p) => p,
            AnyModel::Ishigami => &tm::Ishigami,
            AnyModel::Callable(c) => c,
        }
    }

    /// The callable's own exception wins over the evaluation error it caused.
    fn finish<T>(self, r: shapley_gsa::Result<T>) -> PyResult<T> {
        if let AnyModel::Callable(c) = self {
            if let Some(e) = c.error.into_inner().unwrap() {
                return Err(e);
            }
        }
        r.map_err(to_py)
    }
}

fn shapley_config(method: &str, nv: usize, no: usize, ni: usize, m: Option<usize>) -> PyResult<ShapleyConfig> {
    match (method, m) {
        ("exact", _) => Ok(ShapleyConfig::exact(nv, no, ni)),
        ("random", Some(m)) => Ok(ShapleyConfig::random(nv, no, ni, m)),
        ("random", None) => Err(PyValueError::new_err("the random method needs m")),
        (other, _) => Err(PyValueError::new_err(format!("method must be \"exact\" or \"random\", got {other:?}"))),
    }
}

fn interval_dict<'py>(py: Python<'py>, ci: &IntervalEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("point", ci.point)?;
    d.set_item("lo", ci.lo)?;
    d.set_item("hi", ci.hi)?;
    d.set_item("level", ci.level)?;
    d.set_item("method", ci.method.name())?;
    Ok(d)
}

fn intervals_list<'py>(py: Python<'py>, cis: &[IntervalEstimate]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    cis.iter().map(|ci| interval_dict(py, ci)).collect()
}

/// Shapley effects with the extracted full first-order and independent
/// total Sobol' indices. `b > 0` adds bootstrap intervals.
#[pyfunction]
#[pyo3(signature = (model, distribution, nv, no, ni, method = "exact", m = None, seed = 0, b = 0, alpha = 0.1))]
#[allow(clippy::too_many_arguments)]
fn shapley_effects<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyAny>,
    distribution: &PyDistribution,
    nv: usize,
    no: usize,
    ni: usize,
    method: &str,
    m: Option<usize>,
    seed: u64,
    b: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = shapley_config(method, nv, no, ni, m)?;
    let model = AnyModel::from_py(model)?;
    let dist = &distribution.inner;
    let out: shapley_gsa::Result<(ShapleyResult, Option<ShapleyIntervals>)> = py.detach(|| {
        let res = sh::shapley_effects(model.as_model(), dist, &config, seed)?;
        let cis = match (b, method) {
            (0, _) => None,
            (_, "exact") => Some(bootstrap_exact(&res, b, alpha, seed)?),
            _ => Some(bootstrap_random(&res, b, alpha, seed)?),
        };
        Ok((res, cis))
    });
    let (res, cis) = model.finish(out)?;
    let d = PyDict::new(py);
    d.set_item("sh", &res.sh)?;
    d.set_item("s_full", &res.s_full)?;
    d.set_item("st_ind", &res.st_ind)?;
    d.set_item("variance", res.variance)?;
    d.set_item("cost", res.cost)?;
    if let Some(cis) = cis {
        let i = PyDict::new(py);
        i.set_item("sh", intervals_list(py, &cis.sh)?)?;
        i.set_item("s_full", intervals_list(py, &cis.s_full)?)?;
        i.set_item("st_ind", intervals_list(py, &cis.st_ind)?)?;
        d.set_item("intervals", i)?;
    }
    Ok(d)
}

/// Full and independent Sobol' indices by the Rosenblatt-transform
/// pick-and-freeze scheme, `4dN` evaluations.
#[pyfunction]
#[pyo3(signature = (model, distribution, n, seed = 0, estimator = "janon", b = 0, alpha = 0.05))]
#[allow(clippy::too_many_arguments)]
fn sobol_rt<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyAny>,
    distribution: &PyDistribution,
    n: usize,
    seed: u64,
    estimator: &str,
    b: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let estimator = match estimator {
        "janon" => PickFreezeEstimator::Janon,
        "centered" => PickFreezeEstimator::Centered,
        other => return Err(PyValueError::new_err(format!("unknown estimator {other:?}"))),
    };
    let model = AnyModel::from_py(model)?;
    let dist = &distribution.inner;
    let out = py.detach(|| estimate_sobol_rt(model.as_model(), dist, n, estimator, b, alpha, seed));
    let est = model.finish(out)?;
    let d = PyDict::new(py);
    d.set_item("s_full", intervals_list(py, &est.s_full)?)?;
    d.set_item("st_full", intervals_list(py, &est.st_full)?)?;
    d.set_item("s_ind", intervals_list(py, &est.s_ind)?)?;
    d.set_item("st_ind", intervals_list(py, &est.st_ind)?)?;
    d.set_item("cost", est.cost)?;
    Ok(d)
}

/// Latin hypercube through the margins' quantiles.
#[pyfunction]
#[pyo3(signature = (n, distribution, seed = 0, optimize = true))]
fn lhs(n: usize, distribution: &PyDistribution, seed: u64, optimize: bool) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&kriging::lhs_for_distribution(n, &distribution.inner, seed, optimize).map_err(to_py)?))
}

/// Universal kriging, Matérn 5/2 kernel, linear trend.
#[pyclass(name = "GpModel", module = "pyshapley", frozen)]
struct PyGp {
    inner: kriging::GpModel,
}

#[pymethods]
impl PyGp {
    #[staticmethod]
    #[pyo3(signature = (x, y, nugget = 1e-8, starts = 10))]
    fn fit(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>, nugget: f64, starts: usize) -> PyResult<Self> {
        let x = matrix(x)?;
        let opts = GpOptions { nugget, starts, ..GpOptions::default() };
        Ok(Self { inner: py.detach(|| kriging::fit_gp(&x, &y, &opts)).map_err(to_py)? })
    }

    /// Posterior mean and variance at the rows of `x`.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.inner.predict(&matrix(x)?).map_err(to_py)
    }

    fn q2(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        kriging::q2_score(&self.inner, &matrix(x)?, &y).map_err(to_py)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta().to_vec()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2()
    }

    #[getter]
    fn nugget(&self) -> f64 {
        self.inner.nugget()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))? })
    }
}

/// Shapley effects of `n_h` metamodel realizations with `b` replicates each,
/// and the split of their variance into metamodel and Monte-Carlo parts.
/// `inducing_points` switches the realizations to the inducing-point sampler.
#[pyfunction]
#[pyo3(signature = (gp, distribution, nv, no, ni, n_h, b, method = "exact", m = None, inducing_points = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn shapley_gp<'py>(
    py: Python<'py>,
    gp: &PyGp,
    distribution: &PyDistribution,
    nv: usize,
    no: usize,
    ni: usize,
    n_h: usize,
    b: usize,
    method: &str,
    m: Option<usize>,
    inducing_points: Option<usize>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = shapley_config(method, nv, no, ni, m)?;
    let realization = match inducing_points {
        Some(points) => RealizationMethod::Inducing { points },
        None => RealizationMethod::Exact,
    };
    let opts = GpShapleyOptions { n_h, b, realization };
    let res = py
        .detach(|| kriging::shapley_gp(&gp.inner, &distribution.inner, &config, &opts, seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n_h", res.n_h)?;
    d.set_item("b", res.b)?;
    d.set_item("sh", &res.sh)?;
    d.set_item("s_full", &res.s_full)?;
    d.set_item("st_ind", &res.st_ind)?;
    let parts = res
        .decomposition
        .iter()
        .map(|v| {
            let p = PyDict::new(py);
            p.set_item("metamodel", v.metamodel)?;
            p.set_item("mc", v.mc)?;
            p.set_item("total", v.total)?;
            p.set_item("residual", v.residual)?;
            Ok(p)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("decomposition", parts)?;
    d.set_item("warnings", &res.warnings)?;
    Ok(d)
}

#[pymodule]
pub fn pyshapley(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyLinear>()?;
    m.add_class::<PyInteractive>()?;
    m.add_class::<PyIshigami>()?;
    m.add_class::<PyGp>()?;
    m.add_function(wrap_pyfunction!(shapley_effects, m)?)?;
    m.add_function(wrap_pyfunction!(sobol_rt, m)?)?;
    m.add_function(wrap_pyfunction!(lhs, m)?)?;
    m.add_function(wrap_pyfunction!(shapley_gp, m)?)?;
    Ok(())
}
