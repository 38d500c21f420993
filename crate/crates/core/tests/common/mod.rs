//! Shared test oracles, independent of the code paths they check.

use newton_imbed::elliptic::{solve_linear, LinearProblem};
use newton_imbed::grid::{self, Field, Grid};
use newton_imbed::nonlinearity::Nonlinearity;

/// Direct damped-Newton solve of -laplace(u) = t f(u) at a fixed t,
/// starting from zero, with residual-norm line search. Used only as a
/// cross-check for the continuation driver: no time marching, different
/// globalization, its own stopping rule on the equation residual.
pub fn damped_newton_oracle(nl: &Nonlinearity, grid: &Grid, t: f64, tol: f64) -> Field {
    let residual = |u: &Field| grid::laplacian(u).scale(-1.0).sub(&nl.map(u).scale(t));
    let l2 = |f: &Field| grid::norm_lp(f, 2.0).expect("p = 2 is valid");

    let mut u = Field::zeros(grid);
    let mut res = residual(&u);
    let mut res_norm = l2(&res);
    for _ in 0..200 {
        if res_norm <= tol {
            return u;
        }
        let q = nl.map_deriv(&u).scale(-t);
        let problem = LinearProblem::new(q, res.scale(-1.0)).expect("grids match");
        let delta = solve_linear(&problem, 1e-13, 200_000)
            .expect("oracle linear solve must converge")
            .solution;
        let mut step = 1.0;
        let mut advanced = false;
        for _ in 0..40 {
            let candidate = u.add(&delta.scale(step));
            let cand_res = residual(&candidate);
            let cand_norm = l2(&cand_res);
            if cand_norm < res_norm {
                u = candidate;
                res = cand_res;
                res_norm = cand_norm;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        assert!(
            advanced,
            "oracle line search stalled at residual {res_norm}"
        );
    }
    panic!("oracle did not reach tolerance {tol}; residual {res_norm}");
}

/// Composite Simpson quadrature with `panels` panels.
#[allow(dead_code)]
pub fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = panels * 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}
