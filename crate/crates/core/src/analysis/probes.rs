//! Executable faces of the two counterexample arguments: the oscillation
//! of f(U) over shrinking balls around the mesa center, and the growth of
//! ||f(u_k)||_{L^p} along a sequence of scaled smooth bumps.

use std::fmt::Write as _;

use super::mesa::{MesaPartition, MesaSpec};
use super::AnalysisError;
use crate::grid::{self, DomainKind, Field, Grid};
use crate::nonlinearity::Nonlinearity;

/// Oscillation of f(U) over B(c, delta): the composition attains f(b) on
/// the deepest high plateau and f(a) on the adjacent low plateau, so the
/// oscillation never shrinks with delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationSample {
    pub delta: f64,
    /// Level whose plateau pair certifies the oscillation.
    pub level: usize,
    pub f_high: f64,
    pub f_low: f64,
    pub oscillation: f64,
}

/// For each delta, locates the outermost plateau pair contained in
/// B(c, delta) and reports the attained values (f(b), f(a)).
///
/// Errors with `DeltaTooSmall` when no full plateau pair (the high
/// plateau [s_m-, s_m+] together with the adjacent low plateau
/// [r_{m+1}+, r_m-]) fits inside the ball, in particular whenever
/// delta < r_{N+1}+; increasing the depth always repairs it.
pub fn oscillation_probe(
    nl: &Nonlinearity,
    spec: &MesaSpec,
    partition: &MesaPartition,
    deltas: &[f64],
) -> Result<Vec<OscillationSample>, AnalysisError> {
    let f_high = nl.eval(spec.b);
    let f_low = nl.eval(spec.a);
    let oscillation = (f_low - f_high).abs();
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0 && delta <= spec.t_support) {
            return Err(AnalysisError::InvalidSpec(format!(
                "delta must lie in (0, T] = (0, {}], got {delta}",
                spec.t_support
            )));
        }
        let level = partition
            .levels()
            .iter()
            .position(|l| l.s_plus <= delta)
            .ok_or(AnalysisError::DeltaTooSmall {
                delta,
                min_supported: partition.levels().last().expect("nonempty").s_plus,
            })?;
        out.push(OscillationSample {
            delta,
            level: level + 1,
            f_high,
            f_low,
            oscillation,
        });
    }
    Ok(out)
}

/// Per-delta oscillation CSV: `delta,level,f_high,f_low,oscillation`.
pub fn oscillation_csv(samples: &[OscillationSample]) -> String {
    let mut out = String::from("delta,level,f_high,f_low,oscillation\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e}",
            s.delta, s.level, s.f_high, s.f_low, s.oscillation
        );
    }
    out
}

/// The smooth cutoff used by the bump sequence: identically 1 on
/// B(y0, r/2), identically 0 outside B(y0, r), with the mollifier
/// profile exp(1 - 1/(1 - s^2)) across the transition shell. The ball
/// sits at the box center with r = L/4, so it is compactly contained.
pub fn cutoff_field(grid: &Grid) -> Result<Field, AnalysisError> {
    if grid.domain().kind() != DomainKind::Box {
        return Err(AnalysisError::BoxRequired);
    }
    let dim = grid.domain().dim();
    let side = grid.domain().extent();
    let r = side / 4.0;
    let values = (0..grid.node_count())
        .map(|idx| {
            let coords = grid.node_coords(idx);
            let mut rho2 = 0.0;
            for k in 0..dim {
                let d = coords[k] - side / 2.0;
                rho2 += d * d;
            }
            let rho = rho2.sqrt();
            if rho <= r / 2.0 {
                1.0
            } else if rho >= r {
                0.0
            } else {
                let s = (rho - r / 2.0) / (r / 2.0);
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
        })
        .collect();
    Ok(Field::new(grid.clone(), values).expect("cutoff values are finite"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpSample {
    pub x_k: f64,
    pub norm: f64,
}

/// Evaluates ||f(u_k)||_{L^p} for u_k = x_k * cutoff on the given box
/// grid. Bounded nonlinearities keep every norm below their bound;
/// unbounded ones grow with x_k.
pub fn bump_sequence_probe(
    nl: &Nonlinearity,
    grid: &Grid,
    x_values: &[f64],
    p: f64,
) -> Result<Vec<BumpSample>, AnalysisError> {
    let cutoff = cutoff_field(grid)?;
    let mut out = Vec::with_capacity(x_values.len());
    for &x_k in x_values {
        let u_k = cutoff.scale(x_k);
        let norm = grid::norm_lp(&nl.map(&u_k), p)?;
        out.push(BumpSample { x_k, norm });
    }
    Ok(out)
}

/// Per-k bump-norm CSV: `x_k,norm`.
pub fn bump_csv(samples: &[BumpSample]) -> String {
    let mut out = String::from("x_k,norm\n");
    for s in samples {
        let _ = writeln!(out, "{:.17e},{:.17e}", s.x_k, s.norm);
    }
    out
}
