//! The admissible nonlinearity family: a triple (f, f', f'') with a
//! declared uniform bound M and the sign property -f' > 0, plus
//! executable checks of those assumptions by dense sampling.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::Field;

#[derive(Debug, Error)]
pub enum NonlinearityError {
    #[error("amplitude A must be positive, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("width eps must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("cannot parse nonlinearity spec {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A C^2 nonlinearity (f, f', f'') with claimed uniform bound `bound_m`
/// on |f|, |f'|, |f''|. Values are immutable and cheaply cloneable.
#[derive(Clone)]
pub struct Nonlinearity {
    f: RealFn,
    fp: RealFn,
    fpp: RealFn,
    bound_m: f64,
    name: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("bound_m", &self.bound_m)
            .finish()
    }
}

impl Nonlinearity {
    /// Wraps arbitrary closures; used for test doubles and custom
    /// nonlinearities. The claimed bound is taken on faith here and
    /// re-verified by [`check_assumptions`].
    pub fn from_fns(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fpp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bound_m: f64,
    ) -> Self {
        Self {
            f: Arc::new(f),
            fp: Arc::new(fp),
            fpp: Arc::new(fpp),
            bound_m,
            name: name.into(),
        }
    }

    /// The constant function f = c (f' = f'' = 0). The zero derivative is
    /// accepted by the solver since it produces q = 0.
    pub fn constant(c: f64) -> Self {
        Self::from_fns(
            format!("const({c})"),
            move |_| c,
            |_| 0.0,
            |_| 0.0,
            c.abs().max(1.0),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.fp)(x)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        (self.fpp)(x)
    }

    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Pointwise composition f(u).
    pub fn map(&self, u: &Field) -> Field {
        u.map(|x| (self.f)(x))
    }

    /// Pointwise composition f'(u).
    pub fn map_deriv(&self, u: &Field) -> Field {
        u.map(|x| (self.fp)(x))
    }

    /// Pointwise composition f''(u).
    pub fn map_second_deriv(&self, u: &Field) -> Field {
        u.map(|x| (self.fpp)(x))
    }
}

/// The family A arccot((x - h)/eps) + k with the arccot branch fixed to
/// (0, pi), so every member is smooth, strictly decreasing, and bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArccotFamily {
    pub amplitude: f64,
    pub shift: f64,
    pub eps: f64,
    pub offset: f64,
}

/// arccot with range (0, pi), continuous at 0.
pub fn arccot(t: f64) -> f64 {
    f64::atan2(1.0, t)
}

impl ArccotFamily {
    pub fn new(
        amplitude: f64,
        shift: f64,
        eps: f64,
        offset: f64,
    ) -> Result<Self, NonlinearityError> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(NonlinearityError::NonPositiveAmplitude(amplitude));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(NonlinearityError::NonPositiveWidth(eps));
        }
        Ok(Self {
            amplitude,
            shift,
            eps,
            offset,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * arccot((x - self.shift) / self.eps) + self.offset
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let s = x - self.shift;
        -self.amplitude * self.eps / (self.eps * self.eps + s * s)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let s = x - self.shift;
        let d = self.eps * self.eps + s * s;
        2.0 * self.amplitude * self.eps * s / (d * d)
    }

    /// Exact suprema of |f|, |f'|, |f''| over the real line:
    /// A pi + |k|, A / eps, and 2 A (3 sqrt 3 / 16) / eps^2 (the last
    /// attained at x = h +- eps / sqrt 3).
    pub fn exact_bound(&self) -> f64 {
        let sup_f = self.amplitude * std::f64::consts::PI + self.offset.abs();
        let sup_fp = self.amplitude / self.eps;
        let sup_fpp = 2.0 * self.amplitude * (3.0 * 3.0f64.sqrt() / 16.0) / (self.eps * self.eps);
        sup_f.max(sup_fp).max(sup_fpp)
    }
}

/// Builds the arccot-family nonlinearity with its exact bound M.
pub fn make_arccot(
    amplitude: f64,
    shift: f64,
    eps: f64,
    offset: f64,
) -> Result<Nonlinearity, NonlinearityError> {
    let fam = ArccotFamily::new(amplitude, shift, eps, offset)?;
    let name = format!("arccot({amplitude},{shift},{eps},{offset})");
    Ok(Nonlinearity::from_fns(
        name,
        move |x| fam.eval(x),
        move |x| fam.deriv(x),
        move |x| fam.second_deriv(x),
        fam.exact_bound(),
    ))
}

/// The Heaviside-approximating subfamily f_eps(x) = arccot(x/eps)/pi - 1,
/// which tends pointwise to 0 for x < 0 and -1 for x > 0 as eps -> 0.
/// Its derivative carries the 1/pi factor: f' = -eps / (pi (eps^2 + x^2)).
pub fn make_heaviside_approx(eps: f64) -> Result<Nonlinearity, NonlinearityError> {
    let fam = ArccotFamily::new(std::f64::consts::FRAC_1_PI, 0.0, eps, -1.0)?;
    let name = format!("heaviside-approx({eps})");
    Ok(Nonlinearity::from_fns(
        name,
        move |x| fam.eval(x),
        move |x| fam.deriv(x),
        move |x| fam.second_deriv(x),
        fam.exact_bound(),
    ))
}

/// One failed check from [`check_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// |f|, |f'|, or |f''| exceeds the claimed bound M at x.
    BoundExceeded {
        which: &'static str,
        x: f64,
        value: f64,
        bound: f64,
    },
    /// f'(x) >= 0, breaking the sign assumption.
    NotDecreasing { x: f64, fp: f64 },
    /// Central finite difference of f (resp. f') disagrees with f' (resp. f'').
    DerivativeMismatch {
        which: &'static str,
        x: f64,
        fd: f64,
        analytic: f64,
    },
}

/// Result of sampling-based verification of the solver assumptions.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
    pub samples_checked: usize,
}

impl AssumptionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `samples` points of `[lo, hi]` uniformly (plus the endpoints
/// and 0) and verifies the uniform bounds, the sign of f', and the
/// consistency of the analytic derivatives against central finite
/// differences with step 1e-5. The finite-difference tolerance widens by
/// the local truncation estimate, so regions of large third derivative
/// do not produce spurious mismatches. Never errors: violations are
/// returned as data.
pub fn check_assumptions(nl: &Nonlinearity, range: (f64, f64), samples: usize) -> AssumptionReport {
    let (lo, hi) = range;
    assert!(samples >= 2, "need at least two samples");
    assert!(lo < hi, "empty sample range");
    let mut points: Vec<f64> = (0..samples)
        .map(|j| lo + (hi - lo) * j as f64 / (samples - 1) as f64)
        .collect();
    points.push(lo);
    points.push(hi);
    if lo < 0.0 && hi > 0.0 {
        points.push(0.0);
    }

    const FD_STEP: f64 = 1e-5;
    const FD_RTOL: f64 = 1e-5;
    let m = nl.bound_m();
    let mut violations = Vec::new();

    for &x in &points {
        let f = nl.eval(x);
        let fp = nl.deriv(x);
        let fpp = nl.second_deriv(x);
        for (which, value) in [("f", f), ("f'", fp), ("f''", fpp)] {
            if value.abs() > m {
                violations.push(Violation::BoundExceeded {
                    which,
                    x,
                    value,
                    bound: m,
                });
            }
        }
        if fp >= 0.0 {
            violations.push(Violation::NotDecreasing { x, fp });
        }

        let fd1 = (nl.eval(x + FD_STEP) - nl.eval(x - FD_STEP)) / (2.0 * FD_STEP);
        let third = (nl.second_deriv(x + FD_STEP) - nl.second_deriv(x - FD_STEP)) / (2.0 * FD_STEP);
        let tol1 = FD_RTOL * fp.abs().max(1.0) + FD_STEP * FD_STEP * third.abs();
        if (fd1 - fp).abs() > tol1 {
            violations.push(Violation::DerivativeMismatch {
                which: "f'",
                x,
                fd: fd1,
                analytic: fp,
            });
        }

        let fd2 = (nl.deriv(x + FD_STEP) - nl.deriv(x - FD_STEP)) / (2.0 * FD_STEP);
        // Reuse the third-derivative probe as the curvature scale of f'.
        let fourth = (third
            - (nl.second_deriv(x) - nl.second_deriv(x - 2.0 * FD_STEP)) / (2.0 * FD_STEP))
            .abs()
            / FD_STEP;
        let tol2 = FD_RTOL * fpp.abs().max(1.0) + FD_STEP * FD_STEP * fourth;
        if (fd2 - fpp).abs() > tol2 {
            violations.push(Violation::DerivativeMismatch {
                which: "f''",
                x,
                fd: fd2,
                analytic: fpp,
            });
        }
    }

    AssumptionReport {
        violations,
        samples_checked: points.len(),
    }
}

/// Parses the CLI nonlinearity grammar:
/// `arccot:A,h,eps,k`, `heaviside-approx:eps`, `const:c`.
pub fn parse_nonlinearity(input: &str) -> Result<Nonlinearity, NonlinearityError> {
    let err = |reason: &str| NonlinearityError::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let (kind, args) = input
        .split_once(':')
        .ok_or_else(|| err("expected kind:args"))?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| err(&format!("bad number: {e}")))?;
    match kind {
        "arccot" => {
            if nums.len() != 4 {
                return Err(err("arccot takes A,h,eps,k"));
            }
            make_arccot(nums[0], nums[1], nums[2], nums[3])
        }
        "heaviside-approx" => {
            if nums.len() != 1 {
                return Err(err("heaviside-approx takes eps"));
            }
            make_heaviside_approx(nums[0])
        }
        "const" => {
            if nums.len() != 1 {
                return Err(err("const takes c"));
            }
            Ok(Nonlinearity::constant(nums[0]))
        }
        other => Err(err(&format!("unknown kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainSpec, Field, Grid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn arccot_branch() {
        assert!((arccot(0.0) - PI / 2.0).abs() < 1e-15);
        assert!((arccot(1.0) - PI / 4.0).abs() < 1e-15);
        assert!(arccot(1e12) > 0.0 && arccot(1e12) < 1e-11);
        assert!(arccot(-1e12) > PI - 1e-11 && arccot(-1e12) < PI);
    }

    #[test]
    fn reference_member_values() {
        let nl = make_arccot(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((nl.eval(0.0) - PI / 2.0).abs() < 1e-15);
        assert!((nl.deriv(0.0) + 1.0).abs() < 1e-15);
        assert_eq!(nl.second_deriv(0.0), 0.0);
        for x in [-1e3, 0.0, 1e3] {
            assert!(nl.deriv(x) < 0.0);
        }
    }

    #[test]
    fn derivative_sup_attained_at_shift() {
        let nl = make_arccot(1.0, 0.0, 0.1, 0.0).unwrap();
        assert!((nl.deriv(0.0) + 10.0).abs() < 1e-12);
        // Exact bound covers the second-derivative peak at eps/sqrt(3).
        let fam = ArccotFamily::new(1.0, 0.0, 0.1, 0.0).unwrap();
        let x_star = 0.1 / 3.0f64.sqrt();
        assert!(fam.second_deriv(x_star) <= fam.exact_bound() + 1e-12);
        assert!(
            (fam.second_deriv(x_star) - 2.0 * (3.0 * 3.0f64.sqrt() / 16.0) / 0.01).abs() < 1e-9
        );
    }

    #[test]
    fn heaviside_approx_values() {
        for eps in [1.0, 0.1, 0.01] {
            let nl = make_heaviside_approx(eps).unwrap();
            assert!((nl.eval(0.0) + 0.5).abs() < 1e-15, "f(0) must be -1/2");
            assert!(nl.deriv(1.0) < 0.0 && nl.deriv(-1.0) < 0.0);
        }
        let nl = make_heaviside_approx(0.01).unwrap();
        assert!((nl.eval(1.0) - (arccot(100.0) / PI - 1.0)).abs() < 1e-15);
        assert!((nl.eval(1.0) + 0.99682).abs() < 5e-6);
        // Pointwise limits of the approximation.
        let tight = make_heaviside_approx(1e-6).unwrap();
        assert!((tight.eval(1.0) + 1.0).abs() < 1e-5);
        assert!(tight.eval(-1.0).abs() < 1e-5);
        // Derivative carries the 1/pi factor.
        let expected = -0.01 / (PI * (0.01f64.powi(2) + 4.0));
        assert!((nl.deriv(2.0) - expected).abs() < 1e-18);
    }

    #[test]
    fn assumptions_hold_for_arccot() {
        let nl = make_arccot(1.0, 0.0, 1.0, 0.0).unwrap();
        let report = check_assumptions(&nl, (-1e6, 1e6), 10_000);
        assert!(
            report.is_clean(),
            "violations: {:?}",
            &report.violations[..report.violations.len().min(3)]
        );
        assert!(report.samples_checked >= 10_000);
    }

    #[test]
    fn unbounded_double_is_flagged() {
        let nl = Nonlinearity::from_fns("linear", |x| x, |_| 1.0, |_| 0.0, 1.0);
        let report = check_assumptions(&nl, (-100.0, 100.0), 100);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BoundExceeded { which: "f", .. })));
    }

    #[test]
    fn sign_flip_is_flagged_everywhere() {
        let fam = ArccotFamily::new(1.0, 0.0, 1.0, 0.0).unwrap();
        let nl = Nonlinearity::from_fns(
            "negated",
            move |x| fam.eval(x),
            move |x| -fam.deriv(x),
            move |x| fam.second_deriv(x),
            fam.exact_bound(),
        );
        let report = check_assumptions(&nl, (-10.0, 10.0), 200);
        let decreasing_violations = report
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::NotDecreasing { .. }))
            .count();
        assert_eq!(decreasing_violations, report.samples_checked);
    }

    #[test]
    fn composition_bounded_by_m() {
        let grid = Grid::new(DomainSpec::ball(3, 1.0).unwrap(), 31).unwrap();
        let nl = make_arccot(2.0, 0.5, 0.3, -1.0).unwrap();
        let u = Field::from_fn(&grid, |r| 100.0 * (r[0] - 0.5));
        let fu = nl.map(&u);
        assert!(crate::grid::norm_lp(&fu, f64::INFINITY).unwrap() <= nl.bound_m());
    }

    proptest! {
        #[test]
        fn monotone_decrease(a in 0.1f64..5.0, h in -3.0f64..3.0, eps in 0.05f64..2.0,
                             k in -2.0f64..2.0, x in -50.0f64..50.0, dx in 0.001f64..10.0) {
            let nl = make_arccot(a, h, eps, k).unwrap();
            prop_assert!(nl.eval(x) > nl.eval(x + dx));
        }

        #[test]
        fn fd_consistency(x in -20.0f64..20.0) {
            let nl = make_arccot(1.5, 0.3, 0.7, -0.2).unwrap();
            let d = 1e-6;
            let fd = (nl.eval(x + d) - nl.eval(x - d)) / (2.0 * d);
            prop_assert!((fd - nl.deriv(x)).abs() < 1e-7 * nl.deriv(x).abs().max(1.0));
            let fd2 = (nl.deriv(x + d) - nl.deriv(x - d)) / (2.0 * d);
            prop_assert!((fd2 - nl.second_deriv(x)).abs() < 1e-6 * nl.second_deriv(x).abs().max(1.0));
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(make_arccot(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(make_arccot(-1.0, 0.0, 1.0, 0.0).is_err());
        assert!(make_arccot(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(make_heaviside_approx(-0.1).is_err());
    }

    #[test]
    fn parse_grammar() {
        let nl = parse_nonlinearity("arccot:1,0,1,0").unwrap();
        assert!((nl.eval(0.0) - PI / 2.0).abs() < 1e-15);
        let nl = parse_nonlinearity("heaviside-approx:0.5").unwrap();
        assert!((nl.eval(0.0) + 0.5).abs() < 1e-15);
        let nl = parse_nonlinearity("const:0").unwrap();
        assert_eq!(nl.eval(123.0), 0.0);
        assert!(parse_nonlinearity("arccot:1,0").is_err());
        assert!(parse_nonlinearity("tanh:1").is_err());
        assert!(parse_nonlinearity("arccot").is_err());
        assert!(parse_nonlinearity("arccot:a,b,c,d").is_err());
    }
}
