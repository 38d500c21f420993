//! Numerical verification of the integration-by-parts identity for the
//! mesa function: over the annulus between the truncation radius and the
//! support radius, int U d(phi r^{n-1}) = -int U' phi r^{n-1} up to the
//! boundary term at the inner sphere, which is bounded by
//! ||U phi||_inf omega r^{n-1} and vanishes as the depth grows.

use super::mesa::{mesa_radial_deriv, mesa_value, sphere_area, MesaPartition, MesaSpec};

/// The standard smooth radial bump exp(1 - 1/(1 - s^2)) with s = r/radius,
/// identically 1 at the center in the limit and 0 outside its support.
#[derive(Debug, Clone, Copy)]
pub struct RadialBump {
    pub radius: f64,
}

impl RadialBump {
    pub fn value(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s >= 1.0 {
            0.0
        } else {
            let denom = 1.0 - s * s;
            self.value(r) * (-2.0 * s / (denom * denom)) / self.radius
        }
    }
}

/// Result of one integration-by-parts check.
#[derive(Debug, Clone, Copy)]
pub struct WeakDerivativeReport {
    /// |lhs - rhs| over the annulus excluding B(c, cutoff): equals the
    /// neglected inner boundary term plus quadrature error.
    pub residual: f64,
    /// The bound omega ||U phi||_inf cutoff^{n-1} on that boundary term.
    pub boundary_bound: f64,
    pub cutoff_radius: f64,
}

/// Composite Simpson over [lo, hi] with `pieces` panels.
fn simpson(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, pieces: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = pieces * 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Computes both sides of the radial integration-by-parts identity with
/// per-piece Simpson quadrature (`panels` panels per smooth piece) and
/// returns their difference together with the boundary-term bound. The
/// test function is given by its value and derivative; it must be
/// supported inside the mesa's support ball.
pub fn weak_derivative_check(
    spec: &MesaSpec,
    partition: &MesaPartition,
    phi: &impl Fn(f64) -> f64,
    phi_deriv: &impl Fn(f64) -> f64,
    panels: usize,
) -> WeakDerivativeReport {
    let n = spec.dim as f64;
    let omega = sphere_area(spec.dim);
    let cutoff = partition.inner_cutoff();

    // Smooth-piece boundaries from the inner cutoff out to the support.
    let mut radii = vec![cutoff];
    for level in partition.levels().iter().rev() {
        radii.extend([level.r_minus, level.s_minus, level.s_plus, level.r_plus]);
    }
    radii.push(spec.t_support);

    let lhs_integrand = |r: f64| {
        mesa_value(spec, partition, r) * (phi_deriv(r) + (n - 1.0) * phi(r) / r) * r.powf(n - 1.0)
    };
    let rhs_integrand = |r: f64| mesa_radial_deriv(spec, partition, r) * phi(r) * r.powf(n - 1.0);

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for w in radii.windows(2) {
        // Shrink each panel interval infinitesimally so junction radii
        // classify into the piece being integrated.
        let lo = w[0] * (1.0 + 1e-14);
        let hi = w[1] * (1.0 - 1e-14);
        lhs += simpson(&lhs_integrand, lo, hi, panels);
        rhs += simpson(&rhs_integrand, lo, hi, panels);
    }
    lhs *= omega;
    rhs *= -omega;

    let sup_u = spec.a.abs().max(spec.b.abs()).max(2.0 * spec.a.abs());
    let sup_phi = phi(0.0).abs().max(phi(cutoff).abs());
    WeakDerivativeReport {
        residual: (lhs - rhs).abs(),
        boundary_bound: omega * sup_u * sup_phi * cutoff.powf(n - 1.0),
        cutoff_radius: cutoff,
    }
}
