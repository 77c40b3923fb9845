//! Python bindings: grids, fields, the maximal operators, weight constants,
//! Schrödinger operators, majorants and the experiment harness.
//!
//! Reports cross the boundary as plain dicts (through their JSON form).

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::rhoharm as core;
use core::exponents::{luxemburg_norm, weighted_norm, ExponentField};
use core::extrapolation::{rubio_de_francia_majorant_with, MTheta, MajorantConfig};
use core::grid::{make_grid, Grid, GridFunction};
use core::gridio::{read_any, write_any};
use core::harness::{emit_report, run_suite as run_suite_core, Config, ExperimentConfig, ReportFormat, DEFAULTS};
use core::maximal::{m_local, m_theta, sharp, BallFamily};
use core::potential::{critical_radius, verify_rho_bounds, CriticalRadiusField, PotentialField};
use core::schrodinger::{
    build_l, build_operator as build_operator_core, extract_kernel, kernel_size_check, kernel_smoothness_check,
    read_operator, write_operator, DiscreteOperator, KernelCheckParams, OperatorName, OperatorParams, SizeMode,
    SmoothnessMode,
};
use core::spec::FieldSpec;
use core::weights::{a1_rho_constant, apvar_constant, apvar_loc_constant, apvar_rho_constant, WeightField};

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Any serializable value as a Python object, via `json.loads`.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn spec(text: &str) -> PyResult<FieldSpec> {
    FieldSpec::parse(text).map_err(err)
}

/// A periodic grid `(ℤ/n)^d` with spacing `h`.
#[pyclass(name = "Grid", module = "rhoharm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, n: usize, spacing: f64) -> PyResult<Self> {
        Ok(PyGrid {
            inner: make_grid(dim, n, spacing).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_per_axis()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    #[getter]
    fn radius_cap(&self) -> f64 {
        self.inner.radius_cap()
    }

    /// Ladder radii `h/2, h, √2 h, 2h, …` below the cap.
    fn ladder(&self) -> Vec<f64> {
        self.inner.ladder().to_vec()
    }

    fn center_index(&self) -> usize {
        self.inner.center_index()
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        self.inner.distance(a, b)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, n={}, spacing={})", self.dim(), self.n(), self.spacing())
    }
}

/// Real values at every grid point.
#[pyclass(name = "GridFunction", module = "rhoharm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGridFunction {
    inner: GridFunction,
}

#[pymethods]
impl PyGridFunction {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyGridFunction {
            inner: GridFunction::new(grid.inner.clone(), values).map_err(err)?,
        })
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, c: f64) -> Self {
        PyGridFunction {
            inner: GridFunction::constant(&grid.inner, c),
        }
    }

    #[staticmethod]
    fn point(grid: &PyGrid, index: usize) -> Self {
        PyGridFunction {
            inner: GridFunction::indicator_point(&grid.inner, index),
        }
    }

    /// Reads a binary grid file, or CSV when `grid` is given.
    #[staticmethod]
    #[pyo3(signature = (path, grid=None))]
    fn read(path: PathBuf, grid: Option<&PyGrid>) -> PyResult<Self> {
        Ok(PyGridFunction {
            inner: read_any(&path, grid.map(|g| &g.inner)).map_err(err)?,
        })
    }

    /// Writes CSV for a `.csv` path, binary otherwise.
    fn write(&self, path: PathBuf) -> PyResult<()> {
        write_any(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.grid().clone(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn integral(&self) -> f64 {
        self.inner.integral()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn abs(&self) -> Self {
        PyGridFunction {
            inner: self.inner.abs(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn __repr__(&self) -> String {
        format!("GridFunction({:?}, max_abs={})", self.inner.grid(), self.inner.max_abs())
    }
}

/// A non-negative potential `V`.
#[pyclass(name = "Potential", module = "rhoharm", frozen, skip_from_py_object)]
struct PyPotential {
    inner: PotentialField,
}

#[pymethods]
impl PyPotential {
    /// `const:c`, `power:a`, `oscillator`, `halfspace:c` or `file:<path>`.
    #[new]
    fn new(grid: &PyGrid, spec_text: &str) -> PyResult<Self> {
        Ok(PyPotential {
            inner: PotentialField::from_spec(&grid.inner, &spec(spec_text)?).map_err(err)?,
        })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn critical_radius(&self) -> PyCriticalRadius {
        PyCriticalRadius {
            inner: critical_radius(&self.inner),
        }
    }

    #[getter]
    fn descriptor(&self) -> String {
        self.inner.descriptor().to_string()
    }
}

/// A critical radius function `ρ`.
#[pyclass(name = "CriticalRadius", module = "rhoharm", frozen, skip_from_py_object)]
struct PyCriticalRadius {
    inner: CriticalRadiusField,
}

#[pymethods]
impl PyCriticalRadius {
    #[staticmethod]
    fn from_values(f: &PyGridFunction) -> PyResult<Self> {
        Ok(PyCriticalRadius {
            inner: CriticalRadiusField::from_values(f.inner.clone()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, r: f64) -> PyResult<Self> {
        Ok(PyCriticalRadius {
            inner: CriticalRadiusField::constant(&grid.inner, r).map_err(err)?,
        })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn field(&self) -> PyGridFunction {
        PyGridFunction {
            inner: self.inner.field().clone(),
        }
    }

    #[getter]
    fn capped_fraction(&self) -> f64 {
        self.inner.capped_fraction()
    }

    /// Smallest `(c_ρ, N_ρ)` on the search lattice, as a dict.
    #[pyo3(signature = (pairs=20000))]
    fn verify_bounds(&self, py: Python<'_>, pairs: usize) -> PyResult<Py<PyAny>> {
        to_py(py, &verify_rho_bounds(&self.inner, pairs).map_err(err)?)
    }
}

/// A variable exponent `p(·)`.
#[pyclass(name = "Exponent", module = "rhoharm", frozen, skip_from_py_object)]
struct PyExponent {
    inner: ExponentField,
}

#[pymethods]
impl PyExponent {
    /// `const:p`, `radial:a,b` or `file:<path>`.
    #[new]
    fn new(grid: &PyGrid, spec_text: &str) -> PyResult<Self> {
        Ok(PyExponent {
            inner: ExponentField::from_spec(&grid.inner, &spec(spec_text)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_values(grid: &PyGrid, values: Vec<f64>, p_inf: f64) -> PyResult<Self> {
        Ok(PyExponent {
            inner: ExponentField::new(&grid.inner, values, p_inf).map_err(err)?,
        })
    }

    fn conjugate(&self) -> Self {
        PyExponent {
            inner: self.inner.conjugate(),
        }
    }

    fn scaled(&self, s: f64) -> PyResult<Self> {
        Ok(PyExponent {
            inner: self.inner.scaled(s).map_err(err)?,
        })
    }

    #[getter]
    fn p_minus(&self) -> f64 {
        self.inner.p_minus()
    }

    #[getter]
    fn p_plus(&self) -> f64 {
        self.inner.p_plus()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Luxemburg norm `‖f‖_{p(·)}`.
    fn norm(&self, f: &PyGridFunction) -> PyResult<f64> {
        luxemburg_norm(&f.inner, &self.inner).map_err(err)
    }

    /// `‖f w‖_{p(·)}`.
    fn weighted_norm(&self, f: &PyGridFunction, w: &PyWeight) -> PyResult<f64> {
        weighted_norm(&f.inner, &self.inner, &w.inner).map_err(err)
    }
}

/// A positive weight `w`.
#[pyclass(name = "Weight", module = "rhoharm", frozen, skip_from_py_object)]
struct PyWeight {
    inner: WeightField,
}

#[pymethods]
impl PyWeight {
    /// `const:c`, `power:a`, `exp:a` or `file:<path>`.
    #[new]
    fn new(grid: &PyGrid, spec_text: &str) -> PyResult<Self> {
        Ok(PyWeight {
            inner: WeightField::from_spec(&grid.inner, &spec(spec_text)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_function(f: &PyGridFunction) -> PyResult<Self> {
        Ok(PyWeight {
            inner: WeightField::new(f.inner.clone(), "custom").map_err(err)?,
        })
    }

    fn inverse(&self) -> Self {
        PyWeight {
            inner: self.inner.inverse(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }
}

fn family(rho: &PyCriticalRadius, beta: Option<f64>) -> PyResult<BallFamily> {
    match beta {
        Some(b) => BallFamily::critical(&rho.inner, b).map_err(err),
        None => Ok(BallFamily::ladder(rho.inner.grid())),
    }
}

/// `M^θ_ρ f`.
#[pyfunction]
#[pyo3(signature = (f, rho, theta=0.0))]
fn mtheta(f: &PyGridFunction, rho: &PyCriticalRadius, theta: f64) -> PyResult<PyGridFunction> {
    Ok(PyGridFunction {
        inner: m_theta(&f.inner, &rho.inner, theta).map_err(err)?,
    })
}

/// `M_ρ f` over the critical family of scale `beta`.
#[pyfunction]
#[pyo3(signature = (f, rho, beta=1.0))]
fn mlocal(f: &PyGridFunction, rho: &PyCriticalRadius, beta: f64) -> PyResult<PyGridFunction> {
    Ok(PyGridFunction {
        inner: m_local(&f.inner, &family(rho, Some(beta))?).map_err(err)?,
    })
}

/// `M♯_ρ f` over the critical family of scale `beta`.
#[pyfunction]
#[pyo3(name = "sharp", signature = (f, rho, beta=1.0))]
fn sharp_py(f: &PyGridFunction, rho: &PyCriticalRadius, beta: f64) -> PyResult<PyGridFunction> {
    Ok(PyGridFunction {
        inner: sharp(&f.inner, &family(rho, Some(beta))?).map_err(err)?,
    })
}

/// Weight-class constant as a dict: `apvar`, `apvar_rho`, `apvar_loc` or
/// `a1rho`.
#[pyfunction]
#[pyo3(signature = (class_name, w, rho, p=None, theta=0.0, beta=1.0))]
fn weight_constant(
    py: Python<'_>,
    class_name: &str,
    w: &PyWeight,
    rho: &PyCriticalRadius,
    p: Option<&PyExponent>,
    theta: f64,
    beta: f64,
) -> PyResult<Py<PyAny>> {
    let ladder = family(rho, None)?;
    let need_p = || p.map(|p| &p.inner).ok_or_else(|| PyValueError::new_err("this class needs p"));
    let report = match class_name {
        "apvar" => apvar_constant(&w.inner, need_p()?, &ladder),
        "apvar_rho" => apvar_rho_constant(&w.inner, need_p()?, &rho.inner, theta, &ladder),
        "apvar_loc" => apvar_loc_constant(&w.inner, need_p()?, &family(rho, Some(beta))?),
        "a1rho" => a1_rho_constant(&w.inner, &rho.inner, theta, &ladder),
        other => return Err(PyValueError::new_err(format!("unknown weight class '{other}'"))),
    }
    .map_err(err)?;
    to_py(py, &report)
}

/// A discrete Schrödinger operator (possibly vector- or complex-valued).
#[pyclass(name = "Operator", module = "rhoharm", frozen, skip_from_py_object)]
struct PyOperator {
    inner: DiscreteOperator,
}

#[pymethods]
impl PyOperator {
    /// Builds a registered operator (`R1`, `R2*`, `M_gamma`, …) from `V`.
    #[staticmethod]
    #[pyo3(signature = (name, potential, gamma=1.0, alpha=1.0))]
    fn build(name: &str, potential: &PyPotential, gamma: f64, alpha: f64) -> PyResult<Self> {
        let l = build_l(&potential.inner).map_err(err)?;
        let op = build_operator_core(
            OperatorName::parse(name).map_err(err)?,
            &OperatorParams { gamma, alpha },
            &potential.inner,
            &l,
        )
        .map_err(err)?;
        Ok(PyOperator { inner: op })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyOperator {
            inner: read_operator(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_operator(&self.inner, &path).map_err(err)
    }

    /// `|Tf|`, the pointwise norm over components.
    fn apply(&self, f: &PyGridFunction) -> PyResult<PyGridFunction> {
        Ok(PyGridFunction {
            inner: self.inner.apply_magnitude(&f.inner).map_err(err)?,
        })
    }

    #[getter]
    fn provenance(&self) -> String {
        self.inner.provenance().to_string()
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.component_count()
    }

    #[getter]
    fn is_complex(&self) -> bool {
        self.inner.is_complex()
    }

    /// Kernel constant as a dict; `condition` is `size` or `smoothness`.
    #[pyo3(signature = (rho, condition, mode, s=2.0, n=1.0, delta=1.0, centers=64, points=8))]
    #[allow(clippy::too_many_arguments)]
    fn kernel_check(
        &self,
        py: Python<'_>,
        rho: &PyCriticalRadius,
        condition: &str,
        mode: &str,
        s: f64,
        n: f64,
        delta: f64,
        centers: usize,
        points: usize,
    ) -> PyResult<Py<PyAny>> {
        let k = extract_kernel(&self.inner);
        let params = KernelCheckParams {
            s,
            n,
            delta,
            center_budget: centers,
            point_budget: points,
        };
        let report = match condition {
            "size" => kernel_size_check(&k, &rho.inner, SizeMode::parse(mode).map_err(err)?, &params),
            "smoothness" => kernel_smoothness_check(&k, &rho.inner, SmoothnessMode::parse(mode).map_err(err)?, &params),
            other => return Err(PyValueError::new_err(format!("unknown condition '{other}'"))),
        }
        .map_err(err)?;
        to_py(py, &report)
    }
}

/// Truncated Rubio de Francia majorant of `h` for `S = M^θ_ρ`; returns
/// `(H, info)`.
#[pyfunction]
#[pyo3(signature = (h, rho, theta, norm_bound, terms=16, tail_tolerance=1e-2))]
fn majorant(
    py: Python<'_>,
    h: &PyGridFunction,
    rho: &PyCriticalRadius,
    theta: f64,
    norm_bound: f64,
    terms: usize,
    tail_tolerance: f64,
) -> PyResult<(PyGridFunction, Py<PyAny>)> {
    let s = MTheta {
        rho: rho.inner.clone(),
        theta,
    };
    let config = MajorantConfig {
        norm_bound,
        terms,
        tail_tolerance,
    };
    let m = rubio_de_francia_majorant_with(&h.inner, &s, config).map_err(err)?;
    let info = serde_json::json!({
        "operator": m.operator,
        "tail_max": m.tail_max,
        "geometric_slack": m.geometric_slack,
        "fixed_point_excess": m.fixed_point_excess(&s).map_err(err)?,
    });
    Ok((PyGridFunction { inner: m.majorant }, to_py(py, &info)?))
}

/// Runs a suite from config text (overlaid on the defaults); returns the
/// report as a dict and writes files when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, overrides=Vec::new(), out_dir=None))]
fn run_suite(py: Python<'_>, config: &str, overrides: Vec<String>, out_dir: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let mut cfg = Config::with_defaults(config).map_err(err)?;
    for o in &overrides {
        cfg.apply_override(o).map_err(err)?;
    }
    let exp = ExperimentConfig::from_config(&cfg).map_err(err)?;
    let report = py.detach(|| run_suite_core(&exp)).map_err(err)?;
    if let Some(dir) = out_dir {
        let formats = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Plotdata];
        emit_report(&report, &dir, &formats).map_err(err)?;
    }
    to_py(py, &report)
}

/// The embedded defaults file.
#[pyfunction]
fn default_config() -> &'static str {
    DEFAULTS
}

#[pymodule]
#[pyo3(name = "rhoharm")]
fn rhoharm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyCriticalRadius>()?;
    m.add_class::<PyExponent>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(mtheta, m)?)?;
    m.add_function(wrap_pyfunction!(mlocal, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_py, m)?)?;
    m.add_function(wrap_pyfunction!(weight_constant, m)?)?;
    m.add_function(wrap_pyfunction!(majorant, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
