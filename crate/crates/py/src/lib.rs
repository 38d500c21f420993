//! Python extension module exposing the solver's main types and
//! operations: grids and field calculus, the linear elliptic solve, the
//! nonlinearity family, the continuation driver, and the mesa/bump
//! analysis probes. Fields cross the boundary as plain lists of floats.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use newton_imbed::analysis as na;
use newton_imbed::elliptic;
use newton_imbed::grid::{self, DomainSpec, Field};
use newton_imbed::homotopy;
use newton_imbed::nonlinearity as nl;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: grid::Grid,
}

#[pymethods]
impl PyGrid {
    /// Grid("ball" | "box", dim, extent, res).
    #[new]
    fn new(kind: &str, dim: usize, extent: f64, res: usize) -> PyResult<Self> {
        let domain = match kind {
            "ball" => DomainSpec::ball(dim, extent).map_err(value_err)?,
            "box" => DomainSpec::box_domain(dim, extent).map_err(value_err)?,
            other => return Err(value_err(format!("unknown domain kind {other:?}"))),
        };
        Ok(Self {
            inner: grid::Grid::new(domain, res).map_err(value_err)?,
        })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn res(&self) -> usize {
        self.inner.res()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn node_coords(&self, idx: usize) -> Vec<f64> {
        self.inner.node_coords(idx)
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid({:?}, dim={}, extent={}, res={})",
            self.inner.domain().kind().as_str(),
            self.inner.domain().dim(),
            self.inner.domain().extent(),
            self.inner.res()
        )
    }
}

impl PyGrid {
    fn field(&self, values: Vec<f64>) -> PyResult<Field> {
        Field::new(self.inner.clone(), values).map_err(value_err)
    }
}

#[pyclass(name = "Nonlinearity", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNonlinearity {
    inner: nl::Nonlinearity,
}

#[pymethods]
impl PyNonlinearity {
    /// Member A*arccot((x - h)/eps) + k of the admissible family.
    #[staticmethod]
    fn arccot(amplitude: f64, shift: f64, eps: f64, offset: f64) -> PyResult<Self> {
        Ok(Self {
            inner: nl::make_arccot(amplitude, shift, eps, offset).map_err(value_err)?,
        })
    }

    /// arccot(x/eps)/pi - 1, the Heaviside-approximating subfamily.
    #[staticmethod]
    fn heaviside_approx(eps: f64) -> PyResult<Self> {
        Ok(Self {
            inner: nl::make_heaviside_approx(eps).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn constant(c: f64) -> Self {
        Self {
            inner: nl::Nonlinearity::constant(c),
        }
    }

    /// Parse the CLI grammar, e.g. "arccot:1,0,1,0".
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        Ok(Self {
            inner: nl::parse_nonlinearity(spec).map_err(value_err)?,
        })
    }

    fn f(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn deriv(&self, x: f64) -> f64 {
        self.inner.deriv(x)
    }

    fn second_deriv(&self, x: f64) -> f64 {
        self.inner.second_deriv(x)
    }

    #[getter]
    fn bound_m(&self) -> f64 {
        self.inner.bound_m()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    /// Sample the assumption checks over [lo, hi]; returns the number of
    /// violations found (0 means all assumptions hold on the samples).
    fn check_assumptions(&self, lo: f64, hi: f64, samples: usize) -> usize {
        nl::check_assumptions(&self.inner, (lo, hi), samples)
            .violations
            .len()
    }

    fn __repr__(&self) -> String {
        format!("Nonlinearity({})", self.inner.name())
    }
}

#[pyfunction]
fn laplacian(grid: &PyGrid, values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(grid::laplacian(&grid.field(values)?).values().to_vec())
}

#[pyfunction]
fn norm_lp(grid: &PyGrid, values: Vec<f64>, p: f64) -> PyResult<f64> {
    grid::norm_lp(&grid.field(values)?, p).map_err(value_err)
}

#[pyfunction]
fn norm_h1(grid: &PyGrid, values: Vec<f64>) -> PyResult<f64> {
    Ok(grid::norm_h1(&grid.field(values)?))
}

#[pyfunction]
fn norm_h2(grid: &PyGrid, values: Vec<f64>) -> PyResult<f64> {
    Ok(grid::norm_h2(&grid.field(values)?))
}

/// Solve -laplace(u) + q u = g; returns
/// (solution, cg_iterations, final_residual, h1_norm, h2_norm).
#[pyfunction]
#[pyo3(signature = (grid, q, g, tol = 1e-12, max_iter = 100_000))]
fn solve_linear(
    grid: &PyGrid,
    q: Vec<f64>,
    g: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Vec<f64>, usize, f64, f64, f64)> {
    let problem =
        elliptic::LinearProblem::new(grid.field(q)?, grid.field(g)?).map_err(value_err)?;
    let report = elliptic::solve_linear(&problem, tol, max_iter).map_err(value_err)?;
    Ok((
        report.solution.values().to_vec(),
        report.cg_iterations,
        report.final_residual,
        report.h1_norm,
        report.h2_norm,
    ))
}

#[pyclass(name = "ContinuationResult", frozen)]
struct PyContinuationResult {
    #[pyo3(get)]
    solution: Vec<f64>,
    #[pyo3(get)]
    final_residual: f64,
    #[pyo3(get)]
    halvings: usize,
    #[pyo3(get)]
    time_steps: usize,
    #[pyo3(get)]
    k_est: Option<f64>,
    #[pyo3(get)]
    a_est: Option<f64>,
    #[pyo3(get)]
    dt_recommendation: Option<f64>,
    #[pyo3(get)]
    trace_csv: String,
}

/// March -laplace(u) = t f(u) from t = 0 to t = 1 over `times`
/// (defaults to the single interval [0, 1]).
#[pyfunction]
#[pyo3(signature = (grid, f, times = None, newton_tol = 1e-10, linear_tol = 1e-12, adapt = true))]
fn run_continuation(
    grid: &PyGrid,
    f: &PyNonlinearity,
    times: Option<Vec<f64>>,
    newton_tol: f64,
    linear_tol: f64,
    adapt: bool,
) -> PyResult<PyContinuationResult> {
    let schedule = match times {
        Some(t) => homotopy::Schedule::explicit(t).map_err(value_err)?,
        None => homotopy::Schedule::uniform(1).map_err(value_err)?,
    };
    let cfg = homotopy::NewtonConfig {
        newton_tol,
        linear_tol,
        adapt,
        ..homotopy::NewtonConfig::default()
    };
    let (u, trace) = homotopy::run(&f.inner, &grid.inner, &schedule, &cfg).map_err(value_err)?;
    let est = homotopy::estimate_constants(&trace).ok();
    Ok(PyContinuationResult {
        solution: u.values().to_vec(),
        final_residual: trace.final_residual().unwrap_or(f64::NAN),
        halvings: trace.total_halvings,
        time_steps: trace.steps.len(),
        k_est: est.map(|e| e.k_est),
        a_est: est.map(|e| e.a_est),
        dt_recommendation: est.map(|e| e.dt_recommendation),
        trace_csv: trace.to_csv(),
    })
}

#[pyclass(name = "Mesa", frozen)]
struct PyMesa {
    spec: na::MesaSpec,
    partition: na::MesaPartition,
}

#[pymethods]
impl PyMesa {
    /// Mesa(a, b, t_support, alpha, dim, depth).
    #[new]
    fn new(a: f64, b: f64, t_support: f64, alpha: f64, dim: usize, depth: usize) -> PyResult<Self> {
        let spec = na::MesaSpec::new(a, b, t_support, alpha, dim, depth).map_err(value_err)?;
        let partition = na::build_partition(&spec);
        Ok(Self { spec, partition })
    }

    fn value(&self, r: f64) -> f64 {
        na::mesa_value(&self.spec, &self.partition, r)
    }

    fn radial_deriv(&self, r: f64) -> f64 {
        na::mesa_radial_deriv(&self.spec, &self.partition, r)
    }

    /// Rows (r_plus, s_plus, s_minus, r_minus) per level.
    fn partition(&self) -> Vec<(f64, f64, f64, f64)> {
        self.partition
            .levels()
            .iter()
            .map(|l| (l.r_plus, l.s_plus, l.s_minus, l.r_minus))
            .collect()
    }

    /// Per-level (ramp_grad, l2, envelope_grad) energies.
    fn level_energies(&self) -> Vec<(f64, f64, f64)> {
        na::mesa_h1_parts(&self.spec, &self.partition)
            .levels
            .iter()
            .map(|l| (l.grad, l.l2, l.envelope_grad))
            .collect()
    }

    /// (subcritical, deepest envelope ratio, threshold alpha).
    fn membership(&self) -> (bool, f64, f64) {
        let norm = na::mesa_h1_parts(&self.spec, &self.partition);
        let v = na::membership_verdict(&self.spec, &norm);
        (v.subcritical, v.limit_ratio, v.threshold_alpha)
    }

    /// Oscillation samples (delta, oscillation) of f(U) over B(c, delta).
    fn oscillation(&self, f: &PyNonlinearity, deltas: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        let samples = na::oscillation_probe(&f.inner, &self.spec, &self.partition, &deltas)
            .map_err(value_err)?;
        Ok(samples.iter().map(|s| (s.delta, s.oscillation)).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesa(a={}, b={}, T={}, alpha={}, dim={}, depth={})",
            self.spec.a,
            self.spec.b,
            self.spec.t_support,
            self.spec.alpha,
            self.spec.dim,
            self.spec.depth
        )
    }
}

/// ||f(x_k * cutoff)||_{L^p} for each x_k on a box grid
/// (p = inf for the max norm).
#[pyfunction]
fn bump_norms(f: &PyNonlinearity, grid: &PyGrid, xs: Vec<f64>, p: f64) -> PyResult<Vec<f64>> {
    let samples = na::bump_sequence_probe(&f.inner, &grid.inner, &xs, p).map_err(value_err)?;
    Ok(samples.iter().map(|s| s.norm).collect())
}

#[pymodule]
fn newton_imbed_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyNonlinearity>()?;
    m.add_class::<PyMesa>()?;
    m.add_class::<PyContinuationResult>()?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(norm_lp, m)?)?;
    m.add_function(wrap_pyfunction!(norm_h1, m)?)?;
    m.add_function(wrap_pyfunction!(norm_h2, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear, m)?)?;
    m.add_function(wrap_pyfunction!(run_continuation, m)?)?;
    m.add_function(wrap_pyfunction!(bump_norms, m)?)?;
    Ok(())
}
