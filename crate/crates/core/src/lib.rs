//! Solver library for the semilinear Poisson problem -Δu = f(u) with zero
//! Dirichlet data, via homotopy continuation in -Δu = t f(u) with Newton
//! iterations at each continuation time, plus numerical probes (mesa
//! functions, bump sequences) that delimit which nonlinearities admit the
//! procedure.

pub mod analysis;
pub mod cli;
pub mod elliptic;
pub mod grid;
pub mod homotopy;
pub mod nonlinearity;

pub use elliptic::{solve_linear, LinearProblem, SolveReport};
pub use grid::{laplacian, norm_h1, norm_h2, norm_lp, DomainSpec, Field, Grid};
pub use homotopy::{run, NewtonConfig, Schedule};
pub use nonlinearity::Nonlinearity;
