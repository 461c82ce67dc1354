//! Python bindings for `hitchin_core`.

use hitchin_core::action::{full_action as core_full_action, reduced_action as core_reduced_action};
use hitchin_core::fields::{exact_profile, singular_profile, FieldConfig, Point, RadialFunctions, Smoothness};
use hitchin_core::holonomy::{circle_holonomy, winding_number as core_winding};
use hitchin_core::liealg::PairingKind;
use hitchin_core::numerics::{OdeSpec, QuadratureSpec};
use hitchin_core::residual::{calibrate_convention, ode_residual as core_ode_residual};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pairing(name: &str) -> PyResult<PairingKind> {
    name.parse().map_err(PyValueError::new_err)
}

fn profile(c: f64, branch: &str) -> PyResult<hitchin_core::fields::RadialProfile> {
    match branch {
        "exact" => exact_profile(c).map_err(value_err),
        "singular" => singular_profile(c).map_err(value_err),
        other => Err(PyValueError::new_err(format!(
            "unknown branch '{other}' (expected exact or singular)"
        ))),
    }
}

/// Profile functions (f, g, h) and their radial derivatives at r.
#[pyfunction]
#[pyo3(signature = (c, r, branch = "exact"))]
fn profile_values<'py>(py: Python<'py>, c: f64, r: f64, branch: &str) -> PyResult<Bound<'py, PyDict>> {
    let v = profile(c, branch)?.values(r).map_err(value_err)?;
    let d = PyDict::new(py);
    for (k, x) in [("f", v.f), ("g", v.g), ("h", v.h), ("df", v.df), ("dg", v.dg), ("dh", v.dh)] {
        d.set_item(k, x)?;
    }
    Ok(d)
}

/// Residuals (r1, r2, r3) of the reduced radial equations.
#[pyfunction]
#[pyo3(signature = (c, r, branch = "exact"))]
fn ode_residual(c: f64, r: f64, branch: &str) -> PyResult<(f64, f64, f64)> {
    let res = core_ode_residual(&profile(c, branch)?, r).map_err(value_err)?;
    Ok((res.r1, res.r2, res.r3))
}

/// Radial action integrals; values are None where the integral diverges.
#[pyfunction]
fn reduced_action<'py>(py: Python<'py>, c: f64) -> PyResult<Bound<'py, PyDict>> {
    let rep = core_reduced_action(c, &QuadratureSpec::default()).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("reduced_value", rep.reduced_value)?;
    d.set_item("reference_value", rep.reference_value)?;
    d.set_item("ratio", rep.ratio)?;
    d.set_item("convergent", rep.convergent)?;
    d.set_item("error_estimate", rep.error_estimate)?;
    Ok(d)
}

/// Full planar action of exact(c) under a pairing; None if divergent.
#[pyfunction]
#[pyo3(signature = (c, pairing_name = "killing"))]
fn full_action(c: f64, pairing_name: &str) -> PyResult<Option<f64>> {
    let cfg = FieldConfig::exact(c).map_err(value_err)?;
    let rep = core_full_action(&cfg, pairing(pairing_name)?, &QuadratureSpec::default())
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(rep.full_value)
}

/// "smooth" or "meron_singular".
#[pyfunction]
fn smoothness(c: f64) -> PyResult<&'static str> {
    Ok(match FieldConfig::exact(c).map_err(value_err)?.smoothness_class() {
        Smoothness::Smooth => "smooth",
        Smoothness::MeronSingular => "meron_singular",
    })
}

/// Holonomy of exact(c) around the circle of the given radius.
#[pyfunction]
#[pyo3(signature = (c, radius, steps = 4096))]
fn holonomy<'py>(py: Python<'py>, c: f64, radius: f64, steps: usize) -> PyResult<Bound<'py, PyDict>> {
    let cfg = FieldConfig::exact(c).map_err(value_err)?;
    let spec = OdeSpec { step_count: steps, richardson_check: false };
    let res = circle_holonomy(&cfg, radius, &spec).map_err(value_err)?;
    let m = |g: &hitchin_core::liealg::Matrix2| -> Vec<Vec<Complex64>> {
        (0..2).map(|i| (0..2).map(|j| g.get(i, j)).collect()).collect()
    };
    let d = PyDict::new(py);
    d.set_item("winding", res.winding)?;
    d.set_item("total_phase", res.total_phase)?;
    d.set_item("final", m(&res.final_value))?;
    d.set_item("limit_prediction", m(&res.limit_prediction))?;
    d.set_item("abelian_discrepancy", res.abelian_discrepancy)?;
    Ok(d)
}

/// Winding of unit particles at the given (x, y) centres, measured at `radius`.
#[pyfunction]
#[pyo3(signature = (positions, radius = 1e4))]
fn winding_number(positions: Vec<(f64, f64)>, radius: f64) -> PyResult<i64> {
    let cfg = FieldConfig::multi(positions.into_iter().map(|(x, y)| Point::new(x, y)).collect())
        .map_err(value_err)?;
    core_winding(&cfg, radius, &OdeSpec::default()).map_err(value_err)
}

/// Fitted (kappa, lambda) of the matrix equations.
#[pyfunction]
fn calibrate() -> PyResult<(Complex64, Complex64)> {
    let cal = calibrate_convention(&FieldConfig::exact(1.0).map_err(value_err)?)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((cal.kappa, cal.connection_weight))
}

#[pymodule]
fn hitchin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(profile_values, m)?)?;
    m.add_function(wrap_pyfunction!(ode_residual, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_action, m)?)?;
    m.add_function(wrap_pyfunction!(full_action, m)?)?;
    m.add_function(wrap_pyfunction!(smoothness, m)?)?;
    m.add_function(wrap_pyfunction!(holonomy, m)?)?;
    m.add_function(wrap_pyfunction!(winding_number, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    Ok(())
}
