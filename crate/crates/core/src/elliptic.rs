//! Unique solves of the linear boundary value problem
//! -Δu + q(x) u = g(x), u = 0 on the boundary: the workhorse of every
//! Newton step. The discrete operator A = -Δ_h + diag(q) is symmetric
//! positive definite in the domain's L^2 inner product once q >= 0, and
//! is inverted matrix-free by conjugate gradients.

use thiserror::Error;

use crate::grid::{self, Field, GridError};

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("zeroth-order coefficient is negative at node {index}: q = {value}")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("CG did not reach tolerance {tol} in {max_iter} iterations (last residual {last})")]
    NonConvergence {
        tol: f64,
        max_iter: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// The linear problem (q, g) on a shared grid.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    q: Field,
    g: Field,
}

impl LinearProblem {
    /// Pairs coefficient and right-hand side; they must share a grid.
    /// The sign of q is checked at solve time, not here, so that the
    /// operator can still be applied to diagnostic data.
    pub fn new(q: Field, g: Field) -> Result<Self, EllipticError> {
        if q.grid() != g.grid() {
            return Err(GridError::LengthMismatch {
                got: q.len(),
                want: g.len(),
            }
            .into());
        }
        Ok(Self { q, g })
    }

    pub fn q(&self) -> &Field {
        &self.q
    }

    pub fn g(&self) -> &Field {
        &self.g
    }
}

/// Outcome of a linear solve, with the norms needed to observe the
/// regularity ratio ||u||_{H2} / ||g||_{L2}.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Field,
    pub cg_iterations: usize,
    /// Relative L^2 residual of the returned solution.
    pub final_residual: f64,
    pub h1_norm: f64,
    pub h2_norm: f64,
    pub g_l2_norm: f64,
}

/// Applies the discrete operator: -Δ_h u + q u. Panics if the grids
/// differ (caller contract); linear in u.
pub fn operator_apply(q: &Field, u: &Field) -> Field {
    grid::laplacian(u).scale(-1.0).add(&q.mul(u))
}

/// Diagonal preconditioner choice for [`solve_linear_opts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

/// Solves -Δ_h u + q u = g to a relative L^2 residual of `tol` with
/// unpreconditioned conjugate gradients. `g = 0` short-circuits to the
/// exact solution u = 0.
pub fn solve_linear(
    p: &LinearProblem,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, EllipticError> {
    solve_linear_opts(p, tol, max_iter, Preconditioner::None, None)
}

/// [`solve_linear`] with an explicit preconditioner and optional initial
/// guess (the guess is used by uniqueness tests; the default is zero).
pub fn solve_linear_opts(
    p: &LinearProblem,
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
    initial: Option<&Field>,
) -> Result<SolveReport, EllipticError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(EllipticError::InvalidTolerance(tol));
    }
    let q = &p.q;
    let g = &p.g;
    for (index, &value) in q.values().iter().enumerate() {
        if value < 0.0 {
            return Err(EllipticError::NegativeCoefficient { index, value });
        }
    }

    let g_norm = grid::norm_lp(g, 2.0).expect("p = 2 is valid");
    if g_norm == 0.0 {
        let u = Field::zeros(g.grid());
        return Ok(SolveReport {
            h1_norm: 0.0,
            h2_norm: 0.0,
            g_l2_norm: 0.0,
            final_residual: 0.0,
            cg_iterations: 0,
            solution: u,
        });
    }

    let inv_diag = match precond {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(operator_diagonal(q).map(|d| 1.0 / d)),
    };

    let mut u = match initial {
        Some(u0) => {
            assert_eq!(
                u0.grid(),
                g.grid(),
                "initial guess lives on a different grid"
            );
            u0.clone()
        }
        None => Field::zeros(g.grid()),
    };
    let mut r = g.sub(&operator_apply(q, &u));
    let mut history = Vec::new();

    let apply_m = |r: &Field| -> Field {
        match &inv_diag {
            Some(m) => m.mul(r),
            None => r.clone(),
        }
    };

    let mut z = apply_m(&r);
    let mut dir = z.clone();
    let mut rz = grid::inner(&r, &z);
    let mut res_norm = grid::inner(&r, &r).sqrt();
    let mut iterations = 0;

    while res_norm / g_norm > tol {
        if iterations >= max_iter {
            return Err(EllipticError::NonConvergence {
                tol,
                max_iter,
                last: res_norm / g_norm,
                history,
            });
        }
        let a_dir = operator_apply(q, &dir);
        let denom = grid::inner(&dir, &a_dir);
        // SPD guarantees denom > 0 for dir != 0; a vanishing denominator
        // means CG has stagnated at rounding level above the tolerance.
        if denom <= 0.0 {
            return Err(EllipticError::NonConvergence {
                tol,
                max_iter,
                last: res_norm / g_norm,
                history,
            });
        }
        let alpha = rz / denom;
        u = u.add(&dir.scale(alpha));
        r = r.sub(&a_dir.scale(alpha));
        z = apply_m(&r);
        let rz_next = grid::inner(&r, &z);
        let beta = rz_next / rz;
        dir = z.add(&dir.scale(beta));
        rz = rz_next;
        res_norm = grid::inner(&r, &r).sqrt();
        iterations += 1;
        history.push(res_norm / g_norm);
    }

    Ok(SolveReport {
        h1_norm: grid::norm_h1(&u),
        h2_norm: grid::norm_h2(&u),
        g_l2_norm: g_norm,
        final_residual: res_norm / g_norm,
        cg_iterations: iterations,
        solution: u,
    })
}

/// Diagonal of -Δ_h + diag(q), used by the Jacobi preconditioner.
fn operator_diagonal(q: &Field) -> Field {
    let grid = q.grid();
    let h2 = grid.h() * grid.h();
    match grid.domain().kind() {
        crate::grid::DomainKind::Box => {
            let base = 2.0 * grid.domain().dim() as f64 / h2;
            q.map(|qi| base + qi)
        }
        crate::grid::DomainKind::Ball => {
            let n = grid.domain().dim() as f64;
            let values = q
                .values()
                .iter()
                .enumerate()
                .map(|(i, &qi)| {
                    let lap_diag = if i == 0 { 2.0 * n / 3.0 } else { 2.0 };
                    lap_diag / h2 + qi
                })
                .collect();
            Field::new(grid.clone(), values).expect("diagonal is finite")
        }
    }
}
