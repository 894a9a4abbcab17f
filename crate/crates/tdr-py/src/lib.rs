//! Python bindings for the `tdr` library: the domain types plus the exact,
//! bounding, optimizing, and simulating operations, importable as `tdr_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use tdr::quadrature::QuadratureSpec;
use tdr::sim::{DelayConvention, Geometry, SimConfig};
use tdr::{analytic, bounds, optimize, sim};

fn to_py_err(error: tdr::Error) -> PyErr {
    match error {
        tdr::Error::Quadrature(_) | tdr::Error::ConditionalUnderflow { .. } => {
            PyRuntimeError::new_err(error.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn quad_spec(rel_tol: f64) -> PyResult<QuadratureSpec> {
    QuadratureSpec::new(rel_tol, (rel_tol * 1e-3).min(1e-12), 4096)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Physical and protocol constants; `density` is the base transmitter
/// density per m², each transmitter active per slot with probability `p`.
#[pyclass(frozen, name = "NetworkParams")]
struct PyNetworkParams {
    inner: tdr::NetworkParams,
}

#[pymethods]
impl PyNetworkParams {
    #[new]
    fn new(density: f64, p: f64, alpha: f64, beta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: tdr::NetworkParams::new(density, p, alpha, beta)
                .map_err(|e| PyValueError::new_err(e.to_string()))?,
        })
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    /// Spectral efficiency log2(1 + beta) in bits/sec/Hz.
    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkParams(density={}, p={}, alpha={}, beta={})",
            self.inner.lambda(),
            self.inner.p(),
            self.inner.alpha(),
            self.inner.beta()
        )
    }
}

/// Per-hop distances and retransmission budgets of a route.
#[pyclass(frozen, name = "HopPlan")]
struct PyHopPlan {
    inner: tdr::HopPlan,
}

#[pymethods]
impl PyHopPlan {
    #[new]
    fn new(distances: Vec<f64>, budgets: Vec<u32>) -> PyResult<Self> {
        Ok(Self {
            inner: tdr::HopPlan::new(distances, budgets)
                .map_err(|e| PyValueError::new_err(e.to_string()))?,
        })
    }

    #[staticmethod]
    fn equidistant(total_distance: f64, hops: usize, per_hop_budget: u32) -> PyResult<Self> {
        Ok(Self {
            inner: tdr::HopPlan::equidistant(total_distance, hops, per_hop_budget)
                .map_err(|e| PyValueError::new_err(e.to_string()))?,
        })
    }

    #[getter]
    fn distances(&self) -> Vec<f64> {
        self.inner.distances().to_vec()
    }

    #[getter]
    fn budgets(&self) -> Vec<u32> {
        self.inner.budgets().to_vec()
    }

    #[getter]
    fn total_budget(&self) -> u32 {
        self.inner.total_budget()
    }

    #[getter]
    fn total_distance(&self) -> f64 {
        self.inner.total_distance()
    }

    fn __len__(&self) -> usize {
        self.inner.hops()
    }

    fn __repr__(&self) -> String {
        format!(
            "HopPlan(distances={:?}, budgets={:?})",
            self.inner.distances(),
            self.inner.budgets()
        )
    }
}

/// A transmission-capacity evaluation with its constituents.
#[pyclass(frozen, get_all, name = "TcResult")]
struct PyTcResult {
    capacity: f64,
    success: f64,
    delay: f64,
    density_rate: f64,
    provenance: String,
}

impl From<tdr::TcResult> for PyTcResult {
    fn from(tc: tdr::TcResult) -> Self {
        Self {
            capacity: tc.capacity,
            success: tc.success,
            delay: tc.delay,
            density_rate: tc.density_rate,
            provenance: tc.provenance.to_string(),
        }
    }
}

/// Per-slot success probabilities, their total, and the expected delay.
#[pyclass(frozen, get_all, name = "SuccessProfile")]
struct PySuccessProfile {
    per_slot: Vec<f64>,
    total: f64,
    expected_delay: f64,
}

/// Budget allocation: continuous relaxation, integer solution, multiplier,
/// and the attained objective.
#[pyclass(frozen, get_all, name = "Allocation")]
struct PyAllocation {
    continuous_budgets: Vec<f64>,
    integer_budgets: Vec<u32>,
    multiplier: f64,
    objective: f64,
}

/// Monte Carlo estimate with confidence intervals.
#[pyclass(frozen, get_all, name = "SimEstimate")]
struct PySimEstimate {
    p_success: f64,
    p_success_ci: (f64, f64),
    mean_delay: f64,
    mean_delay_ci: (f64, f64),
    capacity: f64,
    trials: u64,
    seed: u64,
}

/// Geometry constant `2 pi^2 csc(2 pi / alpha) / alpha` of the outage
/// exponent.
#[pyfunction]
fn outage_constant(params: &PyNetworkParams) -> f64 {
    tdr::outage_constant(&params.inner)
}

/// Single-slot SIR outage probability of a link at distance `d`.
#[pyfunction]
fn per_slot_outage(d: f64, params: &PyNetworkParams) -> f64 {
    analytic::per_slot_outage(d, &params.inner)
}

/// Per-slot no-reception probability `p q + 1 - p`.
#[pyfunction]
fn no_reception_prob(d: f64, params: &PyNetworkParams) -> f64 {
    bounds::no_reception_prob(d, &params.inner)
}

#[pyfunction]
#[pyo3(signature = (budget, d, params, rel_tol = 1e-9))]
fn success_profile_single(
    budget: u32,
    d: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<PySuccessProfile> {
    let profile = analytic::success_profile_single(budget, d, &params.inner, &quad_spec(rel_tol)?)
        .map_err(to_py_err)?
        .value;
    Ok(PySuccessProfile {
        per_slot: profile.per_slot,
        total: profile.total,
        expected_delay: profile.expected_delay,
    })
}

#[pyfunction]
#[pyo3(signature = (budget, d, params, rel_tol = 1e-9))]
fn success_prob_single(
    budget: u32,
    d: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<f64> {
    Ok(analytic::success_prob_single(budget, d, &params.inner, &quad_spec(rel_tol)?)
        .map_err(to_py_err)?
        .value)
}

#[pyfunction]
#[pyo3(signature = (budget, d, params, rel_tol = 1e-9))]
fn expected_delay_single(
    budget: u32,
    d: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<f64> {
    Ok(analytic::expected_delay_single(budget, d, &params.inner, &quad_spec(rel_tol)?)
        .map_err(to_py_err)?
        .value)
}

#[pyfunction]
#[pyo3(signature = (budget, d, params, rel_tol = 1e-9))]
fn transmission_capacity_single(
    budget: u32,
    d: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<PyTcResult> {
    Ok(analytic::transmission_capacity_single(budget, d, &params.inner, &quad_spec(rel_tol)?)
        .map_err(to_py_err)?
        .value
        .into())
}

#[pyfunction]
#[pyo3(signature = (budget1, budget2, d1, d2, params, rel_tol = 1e-9))]
fn success_prob_two_hop_exact(
    budget1: u32,
    budget2: u32,
    d1: f64,
    d2: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<f64> {
    Ok(analytic::success_prob_two_hop_exact(
        budget1,
        budget2,
        d1,
        d2,
        &params.inner,
        &quad_spec(rel_tol)?,
    )
    .map_err(to_py_err)?
    .value)
}

#[pyfunction]
fn success_upper_bound_single(budget: u32, d: f64, params: &PyNetworkParams) -> f64 {
    bounds::success_upper_bound_single(budget, d, &params.inner)
}

#[pyfunction]
#[pyo3(signature = (budget, d, params, rel_tol = 1e-9))]
fn success_lower_bound_single(
    budget: u32,
    d: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<f64> {
    Ok(bounds::success_lower_bound_single(budget, d, &params.inner, &quad_spec(rel_tol)?)
        .map_err(to_py_err)?
        .value)
}

#[pyfunction]
#[pyo3(signature = (budget, d, params, rel_tol = 1e-9))]
fn tightness_constant(
    budget: u32,
    d: f64,
    params: &PyNetworkParams,
    rel_tol: f64,
) -> PyResult<f64> {
    Ok(bounds::tightness_constant(budget, d, &params.inner, &quad_spec(rel_tol)?)
        .map_err(to_py_err)?
        .value)
}

/// Splits a total retransmission budget across hops.
#[pyfunction]
fn allocate_budgets(
    distances: Vec<f64>,
    total_budget: u32,
    params: &PyNetworkParams,
) -> PyResult<PyAllocation> {
    let alloc =
        optimize::allocate_budgets(&distances, total_budget, &params.inner).map_err(to_py_err)?;
    Ok(PyAllocation {
        continuous_budgets: alloc.continuous_budgets,
        integer_budgets: alloc.integer_budgets,
        multiplier: alloc.multiplier,
        objective: alloc.objective,
    })
}

/// Scans equidistant hop counts and returns `(best_hops, rows)` where each
/// row is `(hops, per_hop_budget, capacity_bound)`.
#[pyfunction]
fn optimal_hop_count(
    d_total: f64,
    total_budget: u32,
    params: &PyNetworkParams,
    c: f64,
    n_max: usize,
) -> (usize, Vec<(usize, u32, f64)>) {
    let scan = optimize::optimal_hop_count(d_total, total_budget, &params.inner, c, n_max);
    let rows = scan
        .rows
        .iter()
        .map(|r| (r.hops, r.per_hop_budget, r.bound.capacity))
        .collect();
    (scan.best_hops, rows)
}

/// Sparse-regime objective value and its expansion parameter.
#[pyfunction]
fn sparse_tc_approximation(
    hops: usize,
    d_total: f64,
    total_budget: u32,
    params: &PyNetworkParams,
) -> (f64, f64) {
    let approx = optimize::sparse_tc_approximation(hops, d_total, total_budget, &params.inner);
    (approx.value, approx.small_parameter)
}

fn sim_config(
    trials: u64,
    seed: u64,
    region_radius: Option<f64>,
    stop_on_failure: bool,
    collocated_receivers: bool,
) -> SimConfig {
    SimConfig {
        trials,
        seed,
        region_radius,
        delay_convention: if stop_on_failure {
            DelayConvention::StopOnFailure
        } else {
            DelayConvention::AnalyticCompatible
        },
        confidence: 0.95,
        geometry: if collocated_receivers {
            Geometry::CollocatedReceivers
        } else {
            Geometry::PerHopReceivers
        },
    }
}

/// Monte Carlo estimate of a plan; deterministic in `(seed, trials)`.
#[pyfunction]
#[pyo3(signature = (plan, params, trials, seed = 0, region_radius = None,
                    stop_on_failure = false, collocated_receivers = false))]
fn estimate_success(
    plan: &PyHopPlan,
    params: &PyNetworkParams,
    trials: u64,
    seed: u64,
    region_radius: Option<f64>,
    stop_on_failure: bool,
    collocated_receivers: bool,
) -> PyResult<PySimEstimate> {
    let config = sim_config(trials, seed, region_radius, stop_on_failure, collocated_receivers);
    let estimate = sim::estimate_success(&plan.inner, &params.inner, &config)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PySimEstimate {
        p_success: estimate.p_success.estimate,
        p_success_ci: (estimate.p_success.low, estimate.p_success.high),
        mean_delay: estimate.mean_delay.estimate,
        mean_delay_ci: (estimate.mean_delay.low, estimate.mean_delay.high),
        capacity: estimate.capacity,
        trials: estimate.trials,
        seed: estimate.seed,
    })
}

/// Simulated transmission capacity of a plan.
#[pyfunction]
#[pyo3(signature = (plan, params, trials, seed = 0, region_radius = None,
                    stop_on_failure = false, collocated_receivers = false))]
fn estimate_tc(
    plan: &PyHopPlan,
    params: &PyNetworkParams,
    trials: u64,
    seed: u64,
    region_radius: Option<f64>,
    stop_on_failure: bool,
    collocated_receivers: bool,
) -> PyResult<PyTcResult> {
    let config = sim_config(trials, seed, region_radius, stop_on_failure, collocated_receivers);
    Ok(sim::estimate_tc(&plan.inner, &params.inner, &config)
        .map_err(|e| PyValueError::new_err(e.to_string()))?
        .into())
}

#[pymodule]
fn tdr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkParams>()?;
    m.add_class::<PyHopPlan>()?;
    m.add_class::<PyTcResult>()?;
    m.add_class::<PySuccessProfile>()?;
    m.add_class::<PyAllocation>()?;
    m.add_class::<PySimEstimate>()?;
    m.add_function(wrap_pyfunction!(outage_constant, m)?)?;
    m.add_function(wrap_pyfunction!(per_slot_outage, m)?)?;
    m.add_function(wrap_pyfunction!(no_reception_prob, m)?)?;
    m.add_function(wrap_pyfunction!(success_profile_single, m)?)?;
    m.add_function(wrap_pyfunction!(success_prob_single, m)?)?;
    m.add_function(wrap_pyfunction!(expected_delay_single, m)?)?;
    m.add_function(wrap_pyfunction!(transmission_capacity_single, m)?)?;
    m.add_function(wrap_pyfunction!(success_prob_two_hop_exact, m)?)?;
    m.add_function(wrap_pyfunction!(success_upper_bound_single, m)?)?;
    m.add_function(wrap_pyfunction!(success_lower_bound_single, m)?)?;
    m.add_function(wrap_pyfunction!(tightness_constant, m)?)?;
    m.add_function(wrap_pyfunction!(allocate_budgets, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_hop_count, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_tc_approximation, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_success, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tc, m)?)?;
    Ok(())
}
