//! The Newton-imbedding driver: march the continuation parameter t from 0
//! to 1 in -Δu = t f(u), running Newton iterations at each t_j seeded with
//! the previous time's solution. Every iteration is one linear solve of
//! -Δu + q u = g with q = -t f'(u_m) and g = t (f(u_m) - f'(u_m) u_m).
//! The trace records the H1/H2 increment norms and contraction ratios
//! that certify quadratic convergence, and the step-width rule is
//! enforced constructively by adaptive halving.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use crate::elliptic::{self, EllipticError, LinearProblem, SolveReport};
use crate::grid::{self, Field, Grid};
use crate::nonlinearity::Nonlinearity;

#[derive(Debug, Error)]
pub enum HomotopyError {
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid Newton configuration: {0}")]
    InvalidConfig(String),
    #[error("contraction failure at t = {t}: H2 increments rose twice in a row (iteration {iteration}, increment {diff})")]
    ContractionFailure { t: f64, iteration: usize, diff: f64 },
    #[error("Newton did not converge at t = {t} within the iteration cap (last H2 increment {last_diff})")]
    NewtonMaxIterations { t: f64, last_diff: f64 },
    #[error("adaptive halving cap reached after {halvings} halvings")]
    StepCollapse { halvings: usize },
    #[error("trace holds no accepted step with enough Newton iterations to estimate constants")]
    InsufficientData,
}

/// Continuation times t_0 = 0 < t_1 < ... < t_J = 1 with a declared
/// maximum interval width.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    max_dt: f64,
}

impl Schedule {
    /// `steps` uniform intervals over [0, 1].
    pub fn uniform(steps: usize) -> Result<Self, HomotopyError> {
        if steps == 0 {
            return Err(HomotopyError::InvalidSchedule(
                "need at least one interval".into(),
            ));
        }
        let times = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        Self::explicit(times)
    }

    /// Explicit times; the width bound defaults to the largest gap.
    pub fn explicit(times: Vec<f64>) -> Result<Self, HomotopyError> {
        let max_gap = times.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        Self::with_max_dt(times, max_gap)
    }

    /// Explicit times with an explicit width bound; every interval must
    /// respect it.
    pub fn with_max_dt(times: Vec<f64>, max_dt: f64) -> Result<Self, HomotopyError> {
        let err = |msg: String| Err(HomotopyError::InvalidSchedule(msg));
        if times.len() < 2 {
            return err("need at least t = 0 and t = 1".into());
        }
        if times[0] != 0.0 {
            return err(format!(
                "schedule must start at exactly 0, got {}",
                times[0]
            ));
        }
        if *times.last().unwrap() != 1.0 {
            return err(format!(
                "schedule must end at exactly 1, got {}",
                times.last().unwrap()
            ));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return err(format!(
                    "times must increase strictly: {} then {}",
                    w[0], w[1]
                ));
            }
            if w[1] - w[0] > max_dt * (1.0 + 1e-12) {
                return err(format!(
                    "interval ({}, {}] exceeds max_dt = {max_dt}",
                    w[0], w[1]
                ));
            }
        }
        if times.iter().any(|t| !t.is_finite()) {
            return err("times must be finite".into());
        }
        Ok(Self { times, max_dt })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn max_dt(&self) -> f64 {
        self.max_dt
    }
}

/// Newton-iteration controls. The stopping quantity is the H2 norm of the
/// increment (the quantity the convergence estimate bounds); the equation
/// residual is computed afterwards as an independent check.
#[derive(Debug, Clone)]
pub struct NewtonConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub linear_tol: f64,
    /// Halve the offending interval on contraction failure.
    pub adapt: bool,
    pub max_cg_iters: usize,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton_iters: 25,
            linear_tol: 1e-12,
            adapt: true,
            max_cg_iters: 10_000,
            max_halvings: 20,
        }
    }
}

impl NewtonConfig {
    fn validate(&self) -> Result<(), HomotopyError> {
        let bad = |msg: &str| Err(HomotopyError::InvalidConfig(msg.into()));
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return bad("newton_tol must be positive");
        }
        if !(self.linear_tol > 0.0 && self.linear_tol.is_finite()) {
            return bad("linear_tol must be positive");
        }
        if self.max_newton_iters == 0 || self.max_cg_iters == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }
}

/// One Newton iteration's record: `m` counts iterations within a time
/// step and `diff_h2 = ||u_{m+1} - u_m||_{H2}`.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub j: usize,
    pub t: f64,
    pub m: usize,
    pub diff_h1: f64,
    pub diff_h2: f64,
    /// diff_h2(m) / diff_h2(m-1)^2, absent on the first iteration.
    pub contraction_ratio: Option<f64>,
    /// t_j * K_est * diff_h2(0), backfilled once the step is accepted.
    pub a_estimate: f64,
    pub cg_iters: usize,
    pub halved: bool,
    /// True on the terminal iteration whose increment fell below
    /// newton_tol. Such an increment sits at the linear-solver floor, so
    /// its contraction ratio measures rounding, not contraction, and is
    /// excluded from constant estimation.
    pub converged: bool,
    /// Relative defect of the Taylor-remainder identity for the step's
    /// difference equation, defined for m >= 1. Diagnostic only.
    pub taylor_rel: Option<f64>,
}

/// Per-interval record of an attempted continuation step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub j: usize,
    pub t: f64,
    pub t_prev: f64,
    pub accepted: bool,
    pub newton_iters: usize,
    pub first_diff_h2: f64,
    /// ||-Δ_h u - t f(u)||_{L2} of the accepted iterate.
    pub residual: f64,
}

/// Full record of a continuation run.
#[derive(Debug, Clone, Default)]
pub struct HomotopyTrace {
    pub rows: Vec<TraceRow>,
    pub steps: Vec<StepRecord>,
    pub total_halvings: usize,
}

impl HomotopyTrace {
    /// Residual of the last accepted step (t = 1 after a full run).
    pub fn final_residual(&self) -> Option<f64> {
        self.steps
            .iter()
            .rev()
            .find(|s| s.accepted)
            .map(|s| s.residual)
    }

    /// Serializes the trace in the fixed column order
    /// `j,t,m,diff_h1,diff_h2,contraction_ratio,a_estimate,cg_iters,halved`.
    /// Row order follows execution order and is deterministic.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("j,t,m,diff_h1,diff_h2,contraction_ratio,a_estimate,cg_iters,halved\n");
        for r in &self.rows {
            let ratio = r
                .contraction_ratio
                .map(|v| format!("{v:.17e}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.17e},{},{:.17e},{:.17e},{},{:.17e},{},{}",
                r.j, r.t, r.m, r.diff_h1, r.diff_h2, ratio, r.a_estimate, r.cg_iters, r.halved
            );
        }
        out
    }
}

/// One Newton iteration at time `t`: solves the linearized problem with
/// q = -t f'(u_m) and g = t (f(u_m) - f'(u_m) u_m) and returns the next
/// iterate. A positive f' anywhere surfaces as NegativeCoefficient.
pub fn newton_step(
    t: f64,
    u_m: &Field,
    nl: &Nonlinearity,
    cfg: &NewtonConfig,
) -> Result<(Field, SolveReport), HomotopyError> {
    let fp = nl.map_deriv(u_m);
    let q = fp.scale(-t);
    let g = nl.map(u_m).sub(&fp.mul(u_m)).scale(t);
    let problem = LinearProblem::new(q, g)?;
    let report = elliptic::solve_linear(&problem, cfg.linear_tol, cfg.max_cg_iters)?;
    Ok((report.solution.clone(), report))
}

struct TimeStepResult {
    u: Field,
    residual: f64,
}

/// Newton iteration at a fixed time, recording trace rows even when the
/// attempt fails (the caller decides whether to keep them).
fn solve_at_time_impl(
    j: usize,
    t: f64,
    u_init: &Field,
    nl: &Nonlinearity,
    cfg: &NewtonConfig,
) -> (Vec<TraceRow>, Result<TimeStepResult, HomotopyError>) {
    let mut rows = Vec::new();
    let mut u_prev = u_init.clone();
    let mut older: Option<Field> = None;
    let mut prev_diff: Option<f64> = None;
    let mut rises = 0usize;

    for m in 0..cfg.max_newton_iters {
        let (u_next, report) = match newton_step(t, &u_prev, nl, cfg) {
            Ok(v) => v,
            Err(e) => return (rows, Err(e)),
        };
        let delta = u_next.sub(&u_prev);
        let diff_h2 = grid::norm_h2(&delta);
        let diff_h1 = grid::norm_h1(&delta);
        let contraction_ratio = prev_diff.map(|pd| diff_h2 / (pd * pd));
        let taylor_rel = older
            .as_ref()
            .map(|um1| taylor_residual(nl, t, &u_prev, um1));
        rows.push(TraceRow {
            j,
            t,
            m,
            diff_h1,
            diff_h2,
            contraction_ratio,
            a_estimate: 0.0,
            cg_iters: report.cg_iterations,
            halved: false,
            converged: diff_h2 < cfg.newton_tol,
            taylor_rel,
        });

        if diff_h2 < cfg.newton_tol {
            let residual_field = grid::laplacian(&u_next)
                .scale(-1.0)
                .sub(&nl.map(&u_next).scale(t));
            let residual = grid::norm_lp(&residual_field, 2.0).expect("p = 2 is valid");
            return (
                rows,
                Ok(TimeStepResult {
                    u: u_next,
                    residual,
                }),
            );
        }

        if let Some(pd) = prev_diff {
            if diff_h2 > pd {
                rises += 1;
                if rises >= 2 {
                    return (
                        rows,
                        Err(HomotopyError::ContractionFailure {
                            t,
                            iteration: m,
                            diff: diff_h2,
                        }),
                    );
                }
            } else {
                rises = 0;
            }
        }

        prev_diff = Some(diff_h2);
        older = Some(std::mem::replace(&mut u_prev, u_next));
    }

    let last_diff = prev_diff.unwrap_or(f64::INFINITY);
    (
        rows,
        Err(HomotopyError::NewtonMaxIterations { t, last_diff }),
    )
}

/// Runs Newton at a single time from the given initial approximation,
/// returning the converged iterate, its trace rows, and the verification
/// residual ||-Δ_h u - t f(u)||_{L2}.
pub fn solve_at_time(
    j: usize,
    t: f64,
    u_init: &Field,
    nl: &Nonlinearity,
    cfg: &NewtonConfig,
) -> Result<(Field, Vec<TraceRow>, f64), HomotopyError> {
    cfg.validate()?;
    let (rows, outcome) = solve_at_time_impl(j, t, u_init, nl, cfg);
    let result = outcome?;
    Ok((result.u, rows, result.residual))
}

/// Marches the full schedule. With `cfg.adapt`, a contraction failure (or
/// an exhausted Newton cap) halves the offending interval by inserting
/// its midpoint and retrying, up to `cfg.max_halvings` total halvings.
/// Returns u(., 1) and the complete trace.
pub fn run(
    nl: &Nonlinearity,
    grid: &Grid,
    schedule: &Schedule,
    cfg: &NewtonConfig,
) -> Result<(Field, HomotopyTrace), HomotopyError> {
    cfg.validate()?;
    let mut trace = HomotopyTrace::default();
    let mut u = Field::zeros(grid);
    let mut t_prev = 0.0f64;
    let mut targets: VecDeque<f64> = schedule.times()[1..].iter().copied().collect();
    let mut j = 0usize;
    let mut k_running: Option<f64> = None;

    while let Some(&t) = targets.front() {
        j += 1;
        let (mut rows, outcome) = solve_at_time_impl(j, t, &u, nl, cfg);
        match outcome {
            Ok(result) => {
                // Update the running contraction constant with this step's
                // ratios, then stamp the geometric-series certificate.
                if t > 0.0 {
                    for row in rows.iter().filter(|r| r.m >= 1 && !r.converged) {
                        if let Some(ratio) = row.contraction_ratio {
                            let k = ratio / t;
                            k_running = Some(k_running.map_or(k, |v: f64| v.max(k)));
                        }
                    }
                }
                let first_diff = rows.first().map_or(0.0, |r| r.diff_h2);
                if let Some(k) = k_running {
                    let a = t * k * first_diff;
                    for row in &mut rows {
                        row.a_estimate = a;
                    }
                }
                trace.steps.push(StepRecord {
                    j,
                    t,
                    t_prev,
                    accepted: true,
                    newton_iters: rows.len(),
                    first_diff_h2: first_diff,
                    residual: result.residual,
                });
                trace.rows.extend(rows);
                u = result.u;
                t_prev = t;
                targets.pop_front();
            }
            Err(
                HomotopyError::ContractionFailure { .. }
                | HomotopyError::NewtonMaxIterations { .. },
            ) if cfg.adapt => {
                trace.total_halvings += 1;
                if trace.total_halvings > cfg.max_halvings {
                    return Err(HomotopyError::StepCollapse {
                        halvings: trace.total_halvings,
                    });
                }
                for row in &mut rows {
                    row.halved = true;
                }
                let first_diff = rows.first().map_or(0.0, |r| r.diff_h2);
                trace.steps.push(StepRecord {
                    j,
                    t,
                    t_prev,
                    accepted: false,
                    newton_iters: rows.len(),
                    first_diff_h2: first_diff,
                    residual: f64::NAN,
                });
                trace.rows.extend(rows);
                let mid = 0.5 * (t_prev + t);
                targets.push_front(mid);
            }
            Err(e) => return Err(e),
        }
    }

    Ok((u, trace))
}

/// Empirical contraction and step constants extracted from a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEstimates {
    pub k_est: f64,
    pub a_est: f64,
    /// 1 / (K_est * A_est), the executable step-width rule.
    pub dt_recommendation: f64,
}

/// K_est = max over accepted rows of contraction_ratio / t_j, skipping
/// terminal rows whose increments sit at the linear-solver floor;
/// A_est = max over accepted steps of diff_h2(0) / (t_j - t_{j-1}).
pub fn estimate_constants(trace: &HomotopyTrace) -> Result<ConstantEstimates, HomotopyError> {
    let mut k_est: Option<f64> = None;
    for row in trace
        .rows
        .iter()
        .filter(|r| !r.halved && !r.converged && r.t > 0.0 && r.m >= 1)
    {
        if let Some(ratio) = row.contraction_ratio {
            let k = ratio / row.t;
            k_est = Some(k_est.map_or(k, |v: f64| v.max(k)));
        }
    }
    let mut a_est: Option<f64> = None;
    for step in trace.steps.iter().filter(|s| s.accepted && s.t > s.t_prev) {
        let a = step.first_diff_h2 / (step.t - step.t_prev);
        a_est = Some(a_est.map_or(a, |v: f64| v.max(a)));
    }
    match (k_est, a_est) {
        (Some(k), Some(a)) if k > 0.0 && a > 0.0 => Ok(ConstantEstimates {
            k_est: k,
            a_est: a,
            dt_recommendation: 1.0 / (k * a),
        }),
        _ => Err(HomotopyError::InsufficientData),
    }
}

/// Constructive stand-in for the step-width assumption: run a one-step
/// pilot at t = 0.25, estimate the constants, and adopt a uniform
/// schedule with width min(0.25, dt_recommendation / 2).
pub fn auto_schedule(
    nl: &Nonlinearity,
    grid: &Grid,
    cfg: &NewtonConfig,
) -> Result<Schedule, HomotopyError> {
    cfg.validate()?;
    let zero = Field::zeros(grid);
    let (_, rows, _) = solve_at_time(1, 0.25, &zero, nl, cfg)?;
    let mut pilot = HomotopyTrace::default();
    let first_diff = rows.first().map_or(0.0, |r| r.diff_h2);
    pilot.steps.push(StepRecord {
        j: 1,
        t: 0.25,
        t_prev: 0.0,
        accepted: true,
        newton_iters: rows.len(),
        first_diff_h2: first_diff,
        residual: 0.0,
    });
    pilot.rows = rows;
    let est = estimate_constants(&pilot)?;
    let dt = (est.dt_recommendation / 2.0).min(0.25);
    let steps = (1.0 / dt).ceil().max(1.0) as usize;
    Schedule::uniform(steps)
}

/// Relative defect of the Taylor-remainder identity behind the
/// convergence proof: the difference-equation right side
/// t (f(b) - f(a) - f'(a)(b - a)) must equal
/// t (b - a)^2 \int_0^1 f''(a + tau (b - a)) (1 - tau) dtau,
/// here with b = u_m, a = u_{m-1} and 16-point Gauss-Legendre in tau.
///
/// The defect is reported relative to the combined L^2 magnitude of the
/// three terms whose cancellation forms the right side. Near convergence
/// the right side itself shrinks like (b - a)^2 and disappears under the
/// rounding noise of the individual f evaluations, so a defect measured
/// against it would only probe floating-point cancellation, not the
/// identity.
pub fn taylor_residual(nl: &Nonlinearity, t: f64, u_m: &Field, u_m_minus_1: &Field) -> f64 {
    let quad = gauss_legendre_01();
    let b = u_m.values();
    let a = u_m_minus_1.values();
    let mut g_step = Vec::with_capacity(b.len());
    let mut taylor = Vec::with_capacity(b.len());
    let mut term_scale = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let d = b[i] - a[i];
        let fb = nl.eval(b[i]);
        let fa = nl.eval(a[i]);
        let slope = nl.deriv(a[i]) * d;
        g_step.push(t * (fb - fa - slope));
        term_scale.push(t * (fb.abs() + fa.abs() + slope.abs()));
        let mut integral = 0.0;
        for &(tau, w) in quad {
            integral += w * (1.0 - tau) * nl.second_deriv(a[i] + tau * d);
        }
        taylor.push(t * d * d * integral);
    }
    let grid = u_m.grid().clone();
    let g_step = Field::new(grid.clone(), g_step).expect("finite");
    let taylor = Field::new(grid.clone(), taylor).expect("finite");
    let term_scale = Field::new(grid, term_scale).expect("finite");
    let defect = grid::norm_lp(&g_step.sub(&taylor), 2.0).expect("p = 2 is valid");
    let scale = grid::norm_lp(&term_scale, 2.0).expect("p = 2 is valid");
    if scale == 0.0 {
        if defect == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        defect / scale
    }
}

/// 16-point Gauss-Legendre nodes and weights on [0, 1], computed once by
/// Newton iteration on the Legendre recurrence.
fn gauss_legendre_01() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        const N: usize = 16;
        let mut out = Vec::with_capacity(N);
        for i in 1..=N {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (N as f64 + 0.5)).cos();
            for _ in 0..64 {
                let (p, dp) = legendre(N, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(N, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out.push(((x + 1.0) / 2.0, w / 2.0));
        }
        out
    })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let pk = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
