//! Python bindings: simulation, Tucker/CP/GSIR fitting with optional GCV tuning, prediction,
//! model persistence and distance correlation.
//!
//! Matrices cross the boundary as nested sequences (`X[a][i][j]`), so numpy arrays work
//! directly; results come back as lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ntsdr::baseline::{fit_gsir, tune_gsir};
use ntsdr::cp::{fit_cp_prepared, CpConfig};
use ntsdr::feature::{PreparedData, SampleSet};
use ntsdr::io::{ModelFile, SavedModel};
use ntsdr::linalg::Mat;
use ntsdr::link::LogLink;
use ntsdr::metrics;
use ntsdr::model::FittedModel;
use ntsdr::operator::RegularizationParams;
use ntsdr::simgen::{generate, Design, Setting, SimConfig};
use ntsdr::tucker::{fit_tucker_prepared, TuckerConfig};
use ntsdr::tuning::{grid_search, Method, TuningGrid};
use ntsdr::NtsdrError;

create_exception!(pyntsdr, EstimationError, PyException);

fn to_py(e: NtsdrError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        EstimationError::new_err(e.to_string())
    }
}

fn to_mats(xs: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Mat>> {
    xs.into_iter()
        .enumerate()
        .map(|(a, rows)| {
            let p = rows.len();
            let q = rows.first().map_or(0, Vec::len);
            if p == 0 || q == 0 || rows.iter().any(|r| r.len() != q) {
                return Err(PyValueError::new_err(format!("sample {a} is not a non-empty rectangular matrix")));
            }
            Ok(Mat::from_fn(p, q, |i, j| rows[i][j]))
        })
        .collect()
}

fn from_mat(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_mats(xs: &[Mat]) -> Vec<Vec<Vec<f64>>> {
    xs.iter().map(from_mat).collect()
}

fn samples(xs: Vec<Vec<Vec<f64>>>, y: Vec<f64>) -> PyResult<SampleSet> {
    SampleSet::new(to_mats(xs)?, y).map_err(to_py)
}

/// Simulated train/test splits for a simulation setting (`"I"`..`"IV"`) and design (`"A"`..`"C"`).
#[pyfunction]
#[pyo3(signature = (setting, design, n, p, q, n_test=100, seed=0, rep=0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    setting: String,
    design: String,
    n: usize,
    p: usize,
    q: usize,
    n_test: usize,
    seed: u64,
    rep: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let setting = Setting::try_from(setting).map_err(PyValueError::new_err)?;
    let design = Design::try_from(design).map_err(PyValueError::new_err)?;
    let mut cfg = SimConfig::new(setting, design, n, p, q);
    cfg.n_test = n_test;
    cfg.seed = seed;
    cfg.validate().map_err(to_py)?;
    let data = py.detach(|| generate(&cfg, rep)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("x_train", from_mats(&data.train.xs))?;
    out.set_item("y_train", data.train.y)?;
    out.set_item("signal_train", data.train_signal)?;
    out.set_item("x_test", from_mats(&data.test_x))?;
    out.set_item("y_test", data.test_y)?;
    out.set_item("signal_test", data.test_signal)?;
    out.set_item("sigma2", data.sigma2)?;
    Ok(out)
}

/// Distance correlation between two samples given as rows (lists of equal-length lists).
#[pyfunction]
fn distance_correlation(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    let to = |rows: &[Vec<f64>]| -> PyResult<Mat> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(PyValueError::new_err("rows must have equal length"));
        }
        Ok(Mat::from_fn(rows.len(), k, |i, j| rows[i][j]))
    };
    metrics::distance_correlation(&to(&a)?, &to(&b)?).map_err(to_py)
}

/// A fitted estimator with a calibrated response link.
#[pyclass(module = "pyntsdr", frozen)]
struct Model {
    inner: ModelFile,
}

impl Model {
    fn with_link(model: SavedModel, xs: &[Mat], y: &[f64]) -> Result<Self, NtsdrError> {
        let pred = model.predict(xs)?;
        let mut inner = ModelFile::new(model);
        inner.link = Some(LogLink::fit(&pred, y)?);
        Ok(Model { inner })
    }
}

#[pymethods]
impl Model {
    /// Tucker-form fit with `s × t` sufficient predictors.
    #[staticmethod]
    #[pyo3(signature = (xs, y, s=1, t=1, eta=1e-3, eps=1e-3, rho=(1.0, 1.0, 1.0), seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn fit_tucker(
        py: Python<'_>,
        xs: Vec<Vec<Vec<f64>>>,
        y: Vec<f64>,
        s: usize,
        t: usize,
        eta: f64,
        eps: f64,
        rho: (f64, f64, f64),
        seed: u64,
    ) -> PyResult<Self> {
        let data = samples(xs, y)?;
        py.detach(|| {
            let prep = PreparedData::new(&data, [rho.0, rho.1, rho.2])?;
            let mut cfg = TuckerConfig::new(s, t);
            cfg.reg = RegularizationParams::uniform(eta, eps)?;
            cfg.seed = seed;
            let m = FittedModel::Tucker(fit_tucker_prepared(&prep, &cfg)?);
            Model::with_link(m.into(), &data.xs, &data.y)
        })
        .map_err(to_py)
    }

    /// CP-form fit with `d` rank-one pairs.
    #[staticmethod]
    #[pyo3(signature = (xs, y, d=1, eta=1e-3, eps=1e-3, rho=(1.0, 1.0, 1.0)))]
    fn fit_cp(
        py: Python<'_>,
        xs: Vec<Vec<Vec<f64>>>,
        y: Vec<f64>,
        d: usize,
        eta: f64,
        eps: f64,
        rho: (f64, f64, f64),
    ) -> PyResult<Self> {
        let data = samples(xs, y)?;
        py.detach(|| {
            let prep = PreparedData::new(&data, [rho.0, rho.1, rho.2])?;
            let mut cfg = CpConfig::new(d);
            cfg.reg = RegularizationParams::uniform(eta, eps)?;
            let m = FittedModel::Cp(fit_cp_prepared(&prep, &cfg)?);
            Model::with_link(m.into(), &data.xs, &data.y)
        })
        .map_err(to_py)
    }

    /// GSIR baseline on vectorized predictors; `eps=None` selects it by GCV.
    #[staticmethod]
    #[pyo3(signature = (xs, y, d=1, eps=None, rho_x=1.0, rho_y=1.0))]
    fn fit_gsir(
        py: Python<'_>,
        xs: Vec<Vec<Vec<f64>>>,
        y: Vec<f64>,
        d: usize,
        eps: Option<f64>,
        rho_x: f64,
        rho_y: f64,
    ) -> PyResult<Self> {
        let data = samples(xs, y)?;
        py.detach(|| {
            let m = match eps {
                Some(e) => fit_gsir(&data, d, rho_x, rho_y, e)?,
                None => tune_gsir(&data, d, rho_x, rho_y, &TuningGrid::default().eps_grid)?,
            };
            Model::with_link(SavedModel::Gsir(m), &data.xs, &data.y)
        })
        .map_err(to_py)
    }

    /// GCV grid search for `"tucker"` (uses `s`, `t`) or `"cp"` (uses `d`).
    #[staticmethod]
    #[pyo3(signature = (xs, y, method, s=1, t=1, d=1, eta_grid=None, eps_grid=None, rho=(1.0, 1.0, 1.0)))]
    #[allow(clippy::too_many_arguments)]
    fn tune(
        py: Python<'_>,
        xs: Vec<Vec<Vec<f64>>>,
        y: Vec<f64>,
        method: &str,
        s: usize,
        t: usize,
        d: usize,
        eta_grid: Option<Vec<f64>>,
        eps_grid: Option<Vec<f64>>,
        rho: (f64, f64, f64),
    ) -> PyResult<Self> {
        let method = match method {
            "tucker" => Method::Tucker(TuckerConfig::new(s, t)),
            "cp" => Method::Cp(CpConfig::new(d)),
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}, expected \"tucker\" or \"cp\""))),
        };
        let data = samples(xs, y)?;
        let default = TuningGrid::default();
        py.detach(|| {
            let grid = TuningGrid::new(
                eta_grid.as_deref().unwrap_or(&default.eta_grid),
                eps_grid.as_deref().unwrap_or(&default.eps_grid),
                [rho.0, rho.1, rho.2],
            )?;
            let res = grid_search(&method, &grid, &data)?;
            Model::with_link(res.model.into(), &data.xs, &data.y)
        })
        .map_err(to_py)
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.model.method_name()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.model.column_names()
    }

    /// Regularization `(eta_u, eta_v, eps_u, eps_v)`, or `(eps,)` for GSIR.
    #[getter]
    fn regularization(&self) -> Vec<f64> {
        match &self.inner.model {
            SavedModel::Tucker(m) => vec![m.reg.eta_u, m.reg.eta_v, m.reg.eps_u, m.reg.eps_v],
            SavedModel::Cp(m) => vec![m.reg.eta_u, m.reg.eta_v, m.reg.eps_u, m.reg.eps_v],
            SavedModel::Gsir(m) => vec![m.eps],
        }
    }

    /// Sufficient predictors, one row per matrix.
    fn predict(&self, py: Python<'_>, xs: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        let xs = to_mats(xs)?;
        let pred = py.detach(|| self.inner.model.predict(&xs)).map_err(to_py)?;
        Ok(from_mat(&pred))
    }

    /// Response predictions through the calibrated link.
    fn predict_response(&self, py: Python<'_>, xs: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<f64>> {
        let xs = to_mats(xs)?;
        py.detach(|| {
            let pred = self.inner.model.predict(&xs)?;
            self.inner.response(&pred)
        })
        .map_err(to_py)?
        .ok_or_else(|| EstimationError::new_err("model has no response link"))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: ModelFile::from_json(text).map_err(to_py)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Model {
            inner: ModelFile::load(&path).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Model(method={:?}, columns={})", self.method(), self.inner.model.column_names().len())
    }
}

#[pymodule]
fn pyntsdr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EstimationError", m.py().get_type::<EstimationError>())?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(distance_correlation, m)?)?;
    Ok(())
}
