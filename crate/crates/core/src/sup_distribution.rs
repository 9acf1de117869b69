//! Tail functions of `sup_{[0,1]} B` and `sup_{[0,1]} |B|` for standard
//! Brownian motion, and the moment integral `gamma int x^{gamma-1} P(S > x) dx`.
//!
//! The reflected tail has two series for the same function:
//!
//! * `4 sum_{k>=0} (-1)^k Psi((2k+1) x)`, fast for large `x`;
//! * `1 - (4/pi) sum_{k>=0} (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 / (8 x^2))`,
//!   the theta-function dual, fast for small `x`.
//!
//! Both are alternating with decreasing terms, so the first omitted term
//! bounds the truncation error.

use std::f64::consts::PI;

use crate::closed_form::MomentOrder;
use crate::error::{domain, Error, Result};
use crate::quadrature;
use crate::special_functions::psi;

/// Below this threshold the reflected tail uses the theta series.
pub const X_SWITCH: f64 = 0.7;

pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-15;

/// Threshold and series tolerance for a tail evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub x: f64,
    pub series_tolerance: f64,
}

impl TailQuery {
    pub fn new(x: f64, series_tolerance: f64) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return domain(format!("tail threshold must be finite and >= 0, got {x}"));
        }
        if !(series_tolerance > 0.0 && series_tolerance <= 1e-6) {
            return domain(format!(
                "series tolerance must lie in (0, 1e-6], got {series_tolerance}"
            ));
        }
        Ok(Self {
            x,
            series_tolerance,
        })
    }
}

/// `P(sup_{[0,1]} B > x) = 2 Psi(x)`.
pub fn sup_bm_tail(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("sup_bm_tail requires finite x >= 0, got {x}"));
    }
    Ok((2.0 * psi(x)).clamp(0.0, 1.0))
}

/// `P(sup_{[0,1]} |B| > x)`. Returns 1 at `x = 0`.
pub fn sup_abs_bm_tail(x: f64, tol: f64) -> Result<f64> {
    let q = TailQuery::new(x, tol)?;
    if q.x == 0.0 {
        return Ok(1.0);
    }
    if q.x <= X_SWITCH {
        Ok(theta_series(q.x, q.series_tolerance))
    } else {
        Ok(psi_series(q.x, q.series_tolerance))
    }
}

/// The `Psi` series alone, for any `x > 0`.
pub fn sup_abs_bm_tail_psi_series(x: f64, tol: f64) -> Result<f64> {
    let q = TailQuery::new(x, tol)?;
    if q.x == 0.0 {
        return Ok(1.0);
    }
    Ok(psi_series(q.x, q.series_tolerance))
}

/// The theta-function series alone, for any `x > 0`.
pub fn sup_abs_bm_tail_theta_series(x: f64, tol: f64) -> Result<f64> {
    let q = TailQuery::new(x, tol)?;
    if q.x == 0.0 {
        return Ok(1.0);
    }
    Ok(theta_series(q.x, q.series_tolerance))
}

fn psi_series(x: f64, tol: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0.. {
        let term = 4.0 * psi((2 * k + 1) as f64 * x);
        if term < tol {
            break;
        }
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn theta_series(x: f64, tol: f64) -> f64 {
    let a = PI * PI / (8.0 * x * x);
    let mut cdf = 0.0;
    for k in 0.. {
        let m = (2 * k + 1) as f64;
        let term = 4.0 / (PI * m) * (-a * m * m).exp();
        if term < tol {
            break;
        }
        if k % 2 == 0 {
            cdf += term;
        } else {
            cdf -= term;
        }
    }
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// A tail function `x -> P(S > x)` of a non-negative supremum with a
/// Gaussian envelope `P(S > x) <= envelope() * Psi(x)`.
pub trait SupTail: Sync {
    fn tail(&self, x: f64) -> f64;
    fn envelope(&self) -> f64;
}

/// Tail of `sup_{[0,1]} B`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SupBmTail;

impl SupTail for SupBmTail {
    fn tail(&self, x: f64) -> f64 {
        (2.0 * psi(x)).clamp(0.0, 1.0)
    }

    fn envelope(&self) -> f64 {
        2.0
    }
}

/// Tail of `sup_{[0,1]} |B|`.
#[derive(Debug, Clone, Copy)]
pub struct SupAbsBmTail {
    pub series_tolerance: f64,
}

impl Default for SupAbsBmTail {
    fn default() -> Self {
        Self {
            series_tolerance: DEFAULT_SERIES_TOLERANCE,
        }
    }
}

impl SupTail for SupAbsBmTail {
    fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else if x <= X_SWITCH {
            theta_series(x, self.series_tolerance)
        } else {
            psi_series(x, self.series_tolerance)
        }
    }

    fn envelope(&self) -> f64 {
        4.0
    }
}

/// Bound on the truncated mass past the integration cut-off.
pub const TRUNCATION_BUDGET: f64 = 1e-11;
const QUAD_ABS_TOL: f64 = 1e-11;

/// Smallest `X` (on a 1/4 grid) such that the envelope certifies
/// `int_X^inf gamma x^{gamma-1} tail(x) dx < TRUNCATION_BUDGET`.
///
/// With `tail <= M Psi(x) <= M phi(x) / x`, the integrand is at most
/// `g(x) = gamma M x^{gamma-2} phi(x)`, whose log-derivative is at most
/// `-a = -(X - max(gamma-2, 0)/X)` on `[X, inf)`, so the mass is at most
/// `g(X) / a`.
fn truncation_point(gamma: f64, envelope: f64) -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut x = 1.0f64;
    loop {
        let a = x - (gamma - 2.0).max(0.0) / x;
        if a > 0.0 {
            let g = gamma * envelope * x.powf(gamma - 2.0) * phi(x);
            if g / a < TRUNCATION_BUDGET {
                return x;
            }
        }
        x += 0.25;
    }
}

/// `E[S^gamma] = gamma int_0^inf x^{gamma-1} P(S > x) dx`.
pub fn moment_by_quadrature(gamma: MomentOrder, tail: &dyn SupTail) -> Result<f64> {
    let g = gamma.value();
    let x_max = truncation_point(g, tail.envelope());
    let result = if g >= 1.0 {
        let f = |x: f64| g * x.powf(g - 1.0) * tail.tail(x);
        let split = X_SWITCH.min(x_max);
        let a = quadrature::integrate(f, 0.0, split, QUAD_ABS_TOL / 2.0, 0.0, 4000)?;
        let b = quadrature::integrate(f, split, x_max, QUAD_ABS_TOL / 2.0, 0.0, 4000)?;
        (a.value + b.value, a.error_estimate + b.error_estimate)
    } else {
        // u = x^gamma removes the x^{gamma-1} singularity at the origin
        let f = |u: f64| tail.tail(u.powf(1.0 / g));
        let split = X_SWITCH.powf(g);
        let a = quadrature::integrate(f, 0.0, split, QUAD_ABS_TOL / 2.0, 0.0, 4000)?;
        let b = quadrature::integrate(f, split, x_max.powf(g), QUAD_ABS_TOL / 2.0, 0.0, 4000)?;
        (a.value + b.value, a.error_estimate + b.error_estimate)
    };
    let (value, error) = result;
    if error + TRUNCATION_BUDGET > 1e-8 {
        return Err(Error::Quadrature {
            estimate: value,
            error_estimate: error + TRUNCATION_BUDGET,
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{k_exact_bm, Horizon};

    /// Reference `P(N > t)` straight from the complementary error function.
    fn psi_ref(t: f64) -> f64 {
        0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
    }

    fn truncated_psi_series(x: f64, terms: usize) -> f64 {
        (0..terms)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                4.0 * s * psi_ref((2 * k + 1) as f64 * x)
            })
            .sum()
    }

    #[test]
    fn one_sided_tail_examples() {
        assert_eq!(sup_bm_tail(0.0).unwrap(), 1.0);
        assert!((sup_bm_tail(1.0).unwrap() - 2.0 * psi_ref(1.0)).abs() < 1e-16);
        assert!((sup_bm_tail(1.0).unwrap() - 0.317_310_507_862_914).abs() < 1e-14);
        assert!((sup_bm_tail(5.0).unwrap() - 5.733e-7).abs() < 1e-10);
        assert!(sup_bm_tail(-0.1).is_err());
    }

    #[test]
    fn reflected_tail_examples() {
        assert_eq!(sup_abs_bm_tail(0.0, 1e-12).unwrap(), 1.0);
        assert!((sup_abs_bm_tail(1e-3, 1e-12).unwrap() - 1.0).abs() < 1e-15);
        let at1 = sup_abs_bm_tail(1.0, 1e-14).unwrap();
        assert!((at1 - truncated_psi_series(1.0, 50)).abs() < 1e-13);
        assert!((at1 - 0.6292).abs() < 1e-4);
        let at3 = sup_abs_bm_tail(3.0, 1e-14).unwrap();
        assert!((at3 - 4.0 * psi_ref(3.0)).abs() < 4.0 * psi_ref(9.0));
        assert!((at3 - 0.005_399_6).abs() < 1e-7);
        assert!(sup_abs_bm_tail(-1.0, 1e-12).is_err());
        assert!(sup_abs_bm_tail(1.0, 1e-3).is_err());
        assert!(sup_abs_bm_tail(1.0, 0.0).is_err());
    }

    #[test]
    fn sandwich_and_monotonicity() {
        let mut prev = 1.0;
        for i in 1..=100 {
            let x = 4.0 * i as f64 / 100.0;
            let one = sup_bm_tail(x).unwrap();
            let refl = sup_abs_bm_tail(x, 1e-15).unwrap();
            assert!(one <= refl && refl <= 2.0 * one, "x={x}: {one} {refl}");
            assert!((0.0..=1.0).contains(&refl));
            assert!(refl <= prev, "not monotone at {x}");
            prev = refl;
        }
    }

    #[test]
    fn series_representations_agree() {
        for i in 0..=280 {
            let x = 0.2 + i as f64 * 0.01;
            let a = sup_abs_bm_tail_psi_series(x, 1e-16).unwrap();
            let b = sup_abs_bm_tail_theta_series(x, 1e-16).unwrap();
            assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn truncation_point_is_certified() {
        for g in [0.5, 1.0, 2.0, 5.0, 9.0] {
            let x = truncation_point(g, 4.0);
            // brute-force the remaining mass of the envelope integrand
            let tail_mass = quadrature::integrate(
                |s: f64| g * s.powf(g - 1.0) * 4.0 * psi_ref(s),
                x,
                x + 30.0,
                1e-20,
                1e-10,
                2000,
            )
            .unwrap()
            .value;
            assert!(tail_mass < TRUNCATION_BUDGET, "gamma={g}: {tail_mass}");
        }
    }

    #[test]
    fn one_sided_moments_match_reflection_formula() {
        for g in [0.5, 1.0, 2.0, 3.0] {
            let gamma = MomentOrder::new(g).unwrap();
            let m = moment_by_quadrature(gamma, &SupBmTail).unwrap();
            let expect = crate::closed_form::abs_normal_moment(gamma).unwrap();
            assert!((m - expect).abs() < 1e-8, "gamma={g}: {m} vs {expect}");
        }
    }

    #[test]
    fn reflected_moments_match_exact_values() {
        for g in [0.5, 1.0, 2.0, 3.0, 5.0] {
            let gamma = MomentOrder::new(g).unwrap();
            let m = moment_by_quadrature(gamma, &SupAbsBmTail::default()).unwrap();
            let exact = k_exact_bm(Horizon::new(1.0).unwrap(), gamma).unwrap();
            assert!((m - exact).abs() < 1e-7, "gamma={g}: {m} vs {exact}");
        }
    }
}
