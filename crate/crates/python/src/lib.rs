//! Python bindings. Fields cross the boundary as C-ordered float64 arrays:
//! a scalar is `(N,)*d`, a vector field `(d, N, ..., N)`.

use numpy::ndarray::{ArrayD, IxDyn};
use numpy::{IntoPyArray, PyArrayDyn, PyReadonlyArrayDyn, PyUntypedArrayMethods};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hdch::dynamics::{self, Formulation, InitialData, SolverConfig};
use hdch::experiment::{self, ExperimentConfig};
use hdch::sequences::{self, build_profile, BumpProfile, SequenceParams};
use hdch::{BesovParams, DyadicPartition, Error, GridSpec, ScalarField, VectorField};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(_) => PyIOError::new_err(err.to_string()),
        Error::InvalidGrid(_)
        | Error::GridMismatch(_)
        | Error::InvalidArgument(_)
        | Error::AxisOutOfRange { .. }
        | Error::Hypothesis(_)
        | Error::Config(_)
        | Error::Json(_) => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Grid of an array whose trailing `dim` axes are the spatial ones.
fn grid_of(shape: &[usize], dim: usize, side: f64) -> PyResult<GridSpec> {
    let spatial = &shape[shape.len() - dim..];
    if spatial.iter().any(|&n| n != spatial[0]) {
        return Err(PyValueError::new_err(format!("spatial axes must be equal, got {spatial:?}")));
    }
    GridSpec::new(dim, spatial[0], side).map_err(to_py)
}

fn vector_from(array: &PyReadonlyArrayDyn<'_, f64>, side: f64) -> PyResult<VectorField> {
    let shape = array.shape().to_vec();
    let dim = shape[0];
    if shape.len() != dim + 1 {
        return Err(PyValueError::new_err(format!("expected shape (d, N, ..., N) with d = {dim}, got {shape:?}")));
    }
    let grid = grid_of(&shape, dim, side)?;
    let data: Vec<f64> = array.as_array().iter().copied().collect();
    let comps = data
        .chunks(grid.len())
        .map(|c| ScalarField::from_values(grid, c.to_vec()))
        .collect::<hdch::Result<Vec<_>>>()
        .map_err(to_py)?;
    VectorField::new(comps).map_err(to_py)
}

fn vector_to<'py>(py: Python<'py>, u: &VectorField) -> PyResult<Bound<'py, PyArrayDyn<f64>>> {
    let grid = u.grid();
    let mut shape = vec![grid.dim];
    shape.extend(std::iter::repeat_n(grid.points, grid.dim));
    let data: Vec<f64> = u.components().iter().flat_map(|c| c.values().iter().copied()).collect();
    let array = ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(array.into_pyarray(py))
}

fn parse_formulation(name: &str) -> PyResult<Formulation> {
    match name {
        "velocity" => Ok(Formulation::Velocity),
        "momentum" => Ok(Formulation::Momentum),
        other => Err(PyValueError::new_err(format!("unknown formulation {other:?}"))),
    }
}

/// Besov norm of a scalar field `(N,)*d` or, with `vector=True`, of a
/// vector field `(d, N, ..., N)`.
#[pyfunction]
#[pyo3(signature = (values, side, s, p=2.0, r=2.0, vector=false))]
fn besov_norm(values: PyReadonlyArrayDyn<'_, f64>, side: f64, s: f64, p: f64, r: f64, vector: bool) -> PyResult<f64> {
    let params = BesovParams::new(s, p, r).map_err(to_py)?;
    if vector {
        let u = vector_from(&values, side)?;
        DyadicPartition::new(u.grid()).besov_norm(&u, &params).map_err(to_py)
    } else {
        let shape = values.shape().to_vec();
        let grid = grid_of(&shape, shape.len(), side)?;
        let u = ScalarField::from_values(grid, values.as_array().iter().copied().collect()).map_err(to_py)?;
        DyadicPartition::new(&grid).besov_norm(&u, &params).map_err(to_py)
    }
}

/// Velocity-form right-hand side `-(u·∇)u - Q(u,u) - R(u,u)`.
#[pyfunction]
fn rhs_velocity<'py>(
    py: Python<'py>,
    u: PyReadonlyArrayDyn<'py, f64>,
    side: f64,
) -> PyResult<Bound<'py, PyArrayDyn<f64>>> {
    let u = vector_from(&u, side)?;
    let rhs = dynamics::rhs_velocity(&u).map_err(to_py)?;
    vector_to(py, &rhs)
}

/// H¹ energy `Σ_i ‖u_i‖² + ‖∇u_i‖²` over the box.
#[pyfunction]
fn h1_energy(u: PyReadonlyArrayDyn<'_, f64>, side: f64) -> PyResult<f64> {
    Ok(dynamics::h1_energy(&vector_from(&u, side)?))
}

/// Integrates velocity data; returns `(times, snapshots)` with snapshots
/// stacked along a leading axis.
#[pyfunction]
#[pyo3(signature = (u0, side, t_end, sample_times=None, formulation="velocity", dt=None, cfl=0.3, dealias=true))]
#[allow(clippy::too_many_arguments)]
fn integrate<'py>(
    py: Python<'py>,
    u0: PyReadonlyArrayDyn<'py, f64>,
    side: f64,
    t_end: f64,
    sample_times: Option<Vec<f64>>,
    formulation: &str,
    dt: Option<f64>,
    cfl: f64,
    dealias: bool,
) -> PyResult<(Vec<f64>, Bound<'py, PyArrayDyn<f64>>)> {
    let u0 = vector_from(&u0, side)?;
    let config = SolverConfig {
        formulation: parse_formulation(formulation)?,
        dt,
        cfl,
        t_end,
        sample_times: sample_times.unwrap_or_default(),
        dealias,
    };
    let grid = *u0.grid();
    let (times, data) = py
        .detach(|| {
            let mut times = Vec::new();
            let mut data = Vec::new();
            dynamics::integrate_with(InitialData::Velocity(u0), &config, |t, u| {
                times.push(t);
                for c in u.components() {
                    data.extend_from_slice(c.values());
                }
                Ok(())
            })?;
            Ok::<_, Error>((times, data))
        })
        .map_err(to_py)?;
    let mut shape = vec![times.len(), grid.dim];
    shape.extend(std::iter::repeat_n(grid.points, grid.dim));
    let array = ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((times, array.into_pyarray(py)))
}

/// The initial pair `(u_0^n, v_0^n)` on a `points^dim` grid of side `side`.
#[pyfunction]
#[pyo3(signature = (n, s, dim, points, side, rho=None, plateau=None))]
#[allow(clippy::too_many_arguments)]
fn sequence_pair<'py>(
    py: Python<'py>,
    n: u32,
    s: f64,
    dim: usize,
    points: usize,
    side: f64,
    rho: Option<f64>,
    plateau: Option<f64>,
) -> PyResult<(Bound<'py, PyArrayDyn<f64>>, Bound<'py, PyArrayDyn<f64>>)> {
    let grid = GridSpec::new(dim, points, side).map_err(to_py)?;
    let (r0, p0) = BumpProfile::default_radii(dim);
    let profile = build_profile(rho.unwrap_or(r0), plateau.unwrap_or(p0), &grid, None).map_err(to_py)?;
    let params = SequenceParams::new(n, s, grid, profile).map_err(to_py)?;
    Ok((vector_to(py, &sequences::make_u0n(&params))?, vector_to(py, &sequences::make_v0n(&params))?))
}

/// Decay rate of the approximation residuals.
#[pyfunction]
fn eps_s(s: f64, p: f64, d: usize) -> PyResult<f64> {
    experiment::eps_s(s, p, d).map_err(to_py)
}

/// Runs the experiment for a JSON configuration (`"tiny"` selects the
/// small one-dimensional one) and returns the summary as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
    let config = if config.trim() == "tiny" {
        ExperimentConfig::tiny_d1()
    } else {
        serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?
    };
    let report = py.detach(|| experiment::run_experiment(&config)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "hdch")]
fn hdch_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiment::VERSION)?;
    m.add_function(wrap_pyfunction!(besov_norm, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(h1_energy, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_pair, m)?)?;
    m.add_function(wrap_pyfunction!(eps_s, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
