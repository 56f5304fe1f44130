//! Python extension module exposing the solver's main types and operations:
//! grids, the interface weight, the positivity limiter, config-driven runs,
//! the steady-state driver, and convergence sweeps.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pnpfv_core::config;
use pnpfv_core::diagnostics;
use pnpfv_core::field::{InterfaceMean, ScalarField, SchemeOrder};
use pnpfv_core::limiter;
use pnpfv_core::marching::Marcher;
use pnpfv_core::mms;
use pnpfv_core::transport;

fn to_py_err(e: pnpfv_core::Error) -> PyErr {
    match e {
        pnpfv_core::Error::Config { .. }
        | pnpfv_core::Error::InvalidScenario(_)
        | pnpfv_core::Error::InvalidGrid(_)
        | pnpfv_core::Error::Expr(_)
        | pnpfv_core::Error::DimensionMismatch(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_mean(kind: &str) -> PyResult<InterfaceMean> {
    match kind {
        "harmonic" => Ok(InterfaceMean::Harmonic),
        "geometric" => Ok(InterfaceMean::Geometric),
        "algebraic" => Ok(InterfaceMean::Algebraic),
        other => Err(PyValueError::new_err(format!(
            "unknown mean `{other}` (expected harmonic, geometric or algebraic)"
        ))),
    }
}

/// Structured tensor-product grid.
#[pyclass(name = "Grid")]
struct PyGrid {
    inner: pnpfv_core::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, lengths: Vec<f64>, counts: Vec<usize>) -> PyResult<Self> {
        Ok(PyGrid {
            inner: pnpfv_core::Grid::new(dim, &lengths, &counts).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn spacings(&self) -> Vec<f64> {
        self.inner.spacings()[..self.inner.dim()].to_vec()
    }

    #[getter]
    fn cell_volume(&self) -> f64 {
        self.inner.cell_volume()
    }

    fn flat(&self, idx: Vec<usize>) -> PyResult<usize> {
        if idx.len() != 3 {
            return Err(PyValueError::new_err("flat() expects a 3-component index"));
        }
        Ok(self.inner.flat([idx[0], idx[1], idx[2]]))
    }

    fn multi(&self, flat: usize) -> Vec<usize> {
        self.inner.multi(flat).to_vec()
    }

    fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.inner.cell_center(self.inner.multi(flat))[..self.inner.dim()].to_vec()
    }

    fn __repr__(&self) -> String {
        let c = self.inner.counts();
        format!(
            "Grid(dim={}, counts={:?})",
            self.inner.dim(),
            &c[..self.inner.dim()]
        )
    }
}

/// Interface mean of e^{-psi} from two adjacent cell values.
#[pyfunction]
fn slotboom_weight(psi_left: f64, psi_right: f64, kind: &str) -> PyResult<f64> {
    Ok(transport::slotboom_weight(
        psi_left,
        psi_right,
        parse_mean(kind)?,
    ))
}

/// Apply the mass-conserving scaling limiter to cell values on a uniform
/// grid with the given per-axis counts. Returns the repaired values and the
/// number of patches applied.
#[pyfunction]
#[pyo3(signature = (values, counts=None))]
fn apply_limiter(values: Vec<f64>, counts: Option<Vec<usize>>) -> PyResult<(Vec<f64>, usize)> {
    let counts = counts.unwrap_or_else(|| vec![values.len()]);
    let dim = counts.len();
    let lengths: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let grid = pnpfv_core::Grid::new(dim, &lengths, &counts).map_err(to_py_err)?;
    let mut field = ScalarField::from_values(grid, values).map_err(to_py_err)?;
    let patches = limiter::apply_limiter(&mut field).map_err(to_py_err)?;
    Ok((field.values().to_vec(), patches.len()))
}

/// Validate a TOML configuration; raises ValueError with the offending path.
#[pyfunction]
fn check_config(text: &str) -> PyResult<()> {
    config::parse_config(text).map_err(to_py_err)?;
    Ok(())
}

/// Result of a time-marching run.
#[pyclass(name = "RunResult")]
struct PyRunResult {
    #[pyo3(get)]
    steps: usize,
    #[pyo3(get)]
    time: f64,
    #[pyo3(get)]
    species: Vec<String>,
    #[pyo3(get)]
    times: Vec<f64>,
    /// masses[s][k]: mass of species s after step k.
    #[pyo3(get)]
    masses: Vec<Vec<f64>>,
    #[pyo3(get)]
    energy: Vec<f64>,
    #[pyo3(get)]
    dissipation: Vec<f64>,
    #[pyo3(get)]
    min_density: Vec<f64>,
    #[pyo3(get)]
    limiter_patches: Vec<usize>,
    /// Final densities, one list per species, flat cell order.
    #[pyo3(get)]
    rho: Vec<Vec<f64>>,
    #[pyo3(get)]
    phi: Vec<f64>,
    #[pyo3(get)]
    counts: Vec<usize>,
}

/// Run a scenario described by a TOML config string to its end time.
#[pyfunction]
fn run_toml(text: &str) -> PyResult<PyRunResult> {
    let cfg = config::parse_config(text).map_err(to_py_err)?;
    let species: Vec<String> = cfg.scenario.species.iter().map(|s| s.name.clone()).collect();
    let dim = cfg.scenario.grid.dim();
    let counts = cfg.scenario.grid.counts()[..dim].to_vec();
    let mut marcher = Marcher::new(cfg.scenario).map_err(to_py_err)?;
    let (state, rows) = marcher.run(|_, _| {}).map_err(to_py_err)?;
    let m = species.len();
    let mut masses = vec![Vec::with_capacity(rows.len()); m];
    for row in &rows {
        for (s, mass) in row.masses.iter().enumerate() {
            masses[s].push(*mass);
        }
    }
    Ok(PyRunResult {
        steps: state.step,
        time: state.time,
        species,
        times: rows.iter().map(|r| r.time).collect(),
        masses,
        energy: rows.iter().map(|r| r.energy).collect(),
        dissipation: rows.iter().map(|r| r.dissipation).collect(),
        min_density: rows.iter().map(|r| r.min_density).collect(),
        limiter_patches: rows.iter().map(|r| r.limiter_patches).collect(),
        rho: state.rho.iter().map(|f| f.values().to_vec()).collect(),
        phi: state.phi.values().to_vec(),
        counts,
    })
}

/// March a closed scenario to its steady state. Returns
/// (constants, residual, steps, rho, phi).
#[pyfunction]
#[pyo3(signature = (text, tol=1e-8, max_steps=100_000))]
fn steady_toml(
    text: &str,
    tol: f64,
    max_steps: usize,
) -> PyResult<(Vec<f64>, f64, usize, Vec<Vec<f64>>, Vec<f64>)> {
    let cfg = config::parse_config(text).map_err(to_py_err)?;
    let grid = cfg.scenario.grid;
    let mut marcher = Marcher::new(cfg.scenario).map_err(to_py_err)?;
    let (state, constants) = marcher.run_to_steady(tol, max_steps).map_err(to_py_err)?;
    let residual = diagnostics::steady_state_residual(&grid, &state.rho, &state.psi);
    Ok((
        constants,
        residual,
        state.step,
        state.rho.iter().map(|f| f.values().to_vec()).collect(),
        state.phi.values().to_vec(),
    ))
}

/// Convergence sweep of the manufactured accuracy case. Returns one
/// (n, errors, orders) tuple per grid; orders are None on the first row.
#[pyfunction]
#[pyo3(signature = (scheme="first", tau_rule="h", grids=vec![8, 16, 32]))]
fn mms_sweep(
    scheme: &str,
    tau_rule: &str,
    grids: Vec<usize>,
) -> PyResult<Vec<(usize, Vec<f64>, Vec<Option<f64>>)>> {
    let scheme = match scheme {
        "first" => SchemeOrder::First,
        "second" => SchemeOrder::Second,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown scheme `{other}` (expected first or second)"
            )))
        }
    };
    let rule = match tau_rule {
        "h" => mms::TauRule::EqualH,
        "h2" => mms::TauRule::SquaredH,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown tau rule `{other}` (expected h or h2)"
            )))
        }
    };
    let table = mms::convergence_sweep(scheme, rule, &grids).map_err(to_py_err)?;
    Ok(table
        .rows
        .into_iter()
        .map(|r| (r.n, r.errors.to_vec(), r.orders.to_vec()))
        .collect())
}

#[pymodule]
fn pnpfv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(slotboom_weight, m)?)?;
    m.add_function(wrap_pyfunction!(apply_limiter, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add_function(wrap_pyfunction!(steady_toml, m)?)?;
    m.add_function(wrap_pyfunction!(mms_sweep, m)?)?;
    Ok(())
}
