//! Numerical realizations of the constructions that delimit admissible
//! nonlinearities: the mesa function and its H1 membership threshold,
//! the non-decaying oscillation of compositions f(U), and the bump
//! sequence that forces uniform bounds.

mod mesa;
mod probes;
mod weak;

use thiserror::Error;

use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid mesa parameters: {0}")]
    InvalidSpec(String),
    #[error("no plateau pair fits inside delta = {delta}; smallest supported is {min_supported}; increase the depth")]
    DeltaTooSmall { delta: f64, min_supported: f64 },
    #[error("the bump sequence needs a box grid")]
    BoxRequired,
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub use mesa::{
    build_partition, membership_verdict, mesa_gradient, mesa_h1_parts, mesa_radial_deriv,
    mesa_value, sphere_area, LevelEnergy, MembershipVerdict, MesaLevel, MesaNorm, MesaPartition,
    MesaSpec,
};
pub use probes::{
    bump_csv, bump_sequence_probe, cutoff_field, oscillation_csv, oscillation_probe, BumpSample,
    OscillationSample,
};
pub use weak::{weak_derivative_check, RadialBump, WeakDerivativeReport};
