//! Exact values, comparison bounds and identities for
//! `K_T(H, gamma) = E[sup_{[0,T]} |B_H|^gamma]`.
//!
//! Every number leaves this module inside a value that records which formula
//! produced it (see [`Provenance`]).

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature;
use crate::special_functions::{
    dirichlet_beta, euler_number, euler_number_abs_f64, euler_polynomial_coefficients, gamma_fn,
    EulerIndex,
};

/// Hurst exponent `H` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstExponent(f64);

impl HurstExponent {
    pub const HALF: HurstExponent = HurstExponent(0.5);
    pub const ONE: HurstExponent = HurstExponent(1.0);

    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h <= 1.0 {
            Ok(Self(h))
        } else {
            domain(format!("Hurst exponent must lie in (0, 1], got {h}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }

    pub fn is_degenerate(self) -> bool {
        self.0 == 1.0
    }
}

/// Moment order `gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MomentOrder(f64);

impl MomentOrder {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Self(gamma))
        } else {
            domain(format!(
                "moment order must be positive and finite, got {gamma}"
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Time horizon `T > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Horizon(f64);

impl Horizon {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t.is_finite() {
            Ok(Self(t))
        } else {
            domain(format!("horizon must be positive and finite, got {t}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

macro_rules! f64_conversions {
    ($($ty:ty),*) => {$(
        impl TryFrom<f64> for $ty {
            type Error = Error;
            fn try_from(v: f64) -> Result<Self> {
                <$ty>::new(v)
            }
        }
        impl From<$ty> for f64 {
            fn from(v: $ty) -> f64 {
                v.0
            }
        }
    )*};
}
f64_conversions!(HurstExponent, MomentOrder, Horizon);

/// Which formula produced a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    /// Lower bound for `H < 1/2`.
    Thm1I,
    /// Lower bound for `H >= 1/2`.
    Thm1IiLower,
    /// Upper bound for `H >= 1/2`.
    Thm1IiUpper,
    /// Exact value at `H = 1/2`.
    Prop1I,
    /// Exact value at `H = 1`.
    Prop1Ii,
    LemmaConcave,
    LemmaConvex,
    /// `E[sup X]^gamma >= 0` because `X(0) = 0`.
    Nonnegativity,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Thm1I => "THM1_I",
            Provenance::Thm1IiLower => "THM1_II_LOWER",
            Provenance::Thm1IiUpper => "THM1_II_UPPER",
            Provenance::Prop1I => "PROP1_I",
            Provenance::Prop1Ii => "PROP1_II",
            Provenance::LemmaConcave => "LEMMA_CONCAVE",
            Provenance::LemmaConvex => "LEMMA_CONVEX",
            Provenance::Nonnegativity => "NONNEGATIVITY",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsProvenance {
    pub lower: Provenance,
    pub upper: Option<Provenance>,
    pub exact: Option<Provenance>,
}

/// Which supremum a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupremumKind {
    /// `sup |X|`, the quantity inside `K_T`.
    Reflected,
    /// `sup X`.
    OneSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: Option<f64>,
    pub exact: Option<f64>,
    pub provenance: BoundsProvenance,
    pub supremum: SupremumKind,
}

impl BoundsReport {
    /// `lower <= exact <= upper` for whichever fields are present.
    pub fn is_ordered(&self) -> bool {
        let upper = self.upper.unwrap_or(f64::INFINITY);
        let exact_ok = self.exact.map_or(true, |e| self.lower <= e && e <= upper);
        self.lower >= 0.0 && self.lower <= upper && exact_ok
    }
}

/// `E|N|^gamma = 2^{gamma/2} Gamma((gamma+1)/2) / sqrt(pi)`, the common
/// factor of every bound and exact value here.
pub fn abs_normal_moment(gamma: MomentOrder) -> Result<f64> {
    let g = gamma.value();
    Ok(2f64.powf(g / 2.0) * gamma_fn((g + 1.0) / 2.0)? / std::f64::consts::PI.sqrt())
}

/// Exact `K_T(1/2, gamma)`.
pub fn k_exact_bm(t: Horizon, gamma: MomentOrder) -> Result<f64> {
    let g = gamma.value();
    Ok(2.0 * abs_normal_moment(gamma)? * dirichlet_beta(g)? * t.value().powf(g / 2.0))
}

/// Exact `K_T(1, gamma)`.
pub fn k_exact_h1(t: Horizon, gamma: MomentOrder) -> Result<f64> {
    Ok(abs_normal_moment(gamma)? * t.value().powf(gamma.value()))
}

/// Comparison bounds on `K_T(H, gamma)`, plus the exact value where known.
pub fn k_bounds(h: HurstExponent, t: Horizon, gamma: MomentOrder) -> Result<BoundsReport> {
    let lower = t.value().powf(gamma.value() * h.value()) * abs_normal_moment(gamma)?;
    let (exact, exact_tag) = if h.is_brownian() {
        (Some(k_exact_bm(t, gamma)?), Some(Provenance::Prop1I))
    } else if h.is_degenerate() {
        (Some(k_exact_h1(t, gamma)?), Some(Provenance::Prop1Ii))
    } else {
        (None, None)
    };
    let report = if h.value() < 0.5 {
        BoundsReport {
            lower,
            upper: None,
            exact,
            provenance: BoundsProvenance {
                lower: Provenance::Thm1I,
                upper: None,
                exact: exact_tag,
            },
            supremum: SupremumKind::Reflected,
        }
    } else {
        BoundsReport {
            lower,
            upper: Some(2.0 * lower),
            exact,
            provenance: BoundsProvenance {
                lower: Provenance::Thm1IiLower,
                upper: Some(Provenance::Thm1IiUpper),
                exact: exact_tag,
            },
            supremum: SupremumKind::Reflected,
        }
    };
    Ok(report)
}

/// Self-similarity: `K_T = K_1 * T^{gamma H}`.
pub fn rescale(k1: f64, h: HurstExponent, gamma: MomentOrder, t: Horizon) -> Result<f64> {
    if !(k1 >= 0.0) || !k1.is_finite() {
        return domain(format!("rescale requires a finite k1 >= 0, got {k1}"));
    }
    Ok(k1 * t.value().powf(gamma.value() * h.value()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Concave,
    Convex,
}

impl Shape {
    fn name(self) -> &'static str {
        match self {
            Shape::Concave => "concave",
            Shape::Convex => "convex",
        }
    }
}

/// Variance function `t -> Var X(t)` of a centered process with stationary
/// increments, together with its declared shape.
#[derive(Clone)]
pub struct VarianceProfile {
    evaluator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub shape: Shape,
    pub zero_at_origin: bool,
}

impl fmt::Debug for VarianceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VarianceProfile")
            .field("shape", &self.shape)
            .field("zero_at_origin", &self.zero_at_origin)
            .finish_non_exhaustive()
    }
}

pub const PROFILE_GRID_POINTS: usize = 1024;
pub const SHAPE_TOLERANCE: f64 = 1e-9;

impl VarianceProfile {
    pub fn new(evaluator: impl Fn(f64) -> f64 + Send + Sync + 'static, shape: Shape) -> Self {
        let zero_at_origin = evaluator(0.0) == 0.0;
        Self {
            evaluator: Arc::new(evaluator),
            shape,
            zero_at_origin,
        }
    }

    /// The fBm profile `t^{2H}`: concave for `H <= 1/2`, convex for `H >= 1/2`.
    pub fn fbm(h: HurstExponent) -> Self {
        let shape = if h.value() <= 0.5 {
            Shape::Concave
        } else {
            Shape::Convex
        };
        let two_h = 2.0 * h.value();
        Self::new(move |t| t.powf(two_h), shape)
    }

    pub fn variance(&self, t: f64) -> f64 {
        (self.evaluator)(t)
    }

    /// Checks the profile on a uniform grid of [`PROFILE_GRID_POINTS`]
    /// points over `[0, T]`: zero at the origin, finite, strictly
    /// increasing, and the declared shape under the midpoint test.
    pub fn validate(&self, t: Horizon) -> Result<()> {
        if !self.zero_at_origin {
            return domain("variance profile must vanish at t = 0");
        }
        let n = PROFILE_GRID_POINTS;
        let step = t.value() / (n - 1) as f64;
        // values on the half-step grid; grid point i sits at index 2i and
        // the midpoint of grid points i and j sits at index i + j
        let half: Vec<f64> = (0..2 * n - 1)
            .map(|k| self.variance(k as f64 * step / 2.0))
            .collect();
        if let Some(k) = half.iter().position(|v| !v.is_finite()) {
            return domain(format!(
                "variance profile is not finite at t = {}",
                k as f64 * step / 2.0
            ));
        }
        for i in 0..n - 1 {
            if half[2 * i + 2] <= half[2 * i] {
                return domain(format!(
                    "variance profile is not strictly increasing between t = {} and t = {}",
                    i as f64 * step,
                    (i + 1) as f64 * step
                ));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let mid = half[i + j];
                let chord = 0.5 * (half[2 * i] + half[2 * j]);
                let violated = match self.shape {
                    Shape::Concave => mid < chord - SHAPE_TOLERANCE,
                    Shape::Convex => mid > chord + SHAPE_TOLERANCE,
                };
                if violated {
                    return Err(Error::ShapeViolation {
                        shape: self.shape.name(),
                        s: i as f64 * step,
                        t: j as f64 * step,
                        midpoint: (i + j) as f64 * step / 2.0,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One-sided supremum bound `E[sup_{[0,T]} X]^gamma` versus
/// `sigma^2(T)^{gamma/2} E|N|^gamma`: a lower bound for concave profiles, an
/// upper bound for convex ones.
pub fn lemma_bound(
    profile: &VarianceProfile,
    t: Horizon,
    gamma: MomentOrder,
) -> Result<BoundsReport> {
    profile.validate(t)?;
    let value = profile.variance(t.value()).powf(gamma.value() / 2.0) * abs_normal_moment(gamma)?;
    let report = match profile.shape {
        Shape::Concave => BoundsReport {
            lower: value,
            upper: None,
            exact: None,
            provenance: BoundsProvenance {
                lower: Provenance::LemmaConcave,
                upper: None,
                exact: None,
            },
            supremum: SupremumKind::OneSided,
        },
        Shape::Convex => BoundsReport {
            lower: 0.0,
            upper: Some(value),
            exact: None,
            provenance: BoundsProvenance {
                lower: Provenance::Nonnegativity,
                upper: Some(Provenance::LemmaConvex),
                exact: None,
            },
            supremum: SupremumKind::OneSided,
        },
    };
    Ok(report)
}

fn factorial_f64(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `K_1(1/2, 2n+1)` through `|E_{2n}|`.
pub fn k_odd_via_euler(n: u32) -> f64 {
    let pi = std::f64::consts::PI;
    let half_pi2 = pi * pi / 2.0;
    (pi / 2.0).sqrt() * half_pi2.powi(n as i32) * factorial_f64(n) / factorial_f64(2 * n)
        * euler_number_abs_f64(EulerIndex(2 * n))
}

/// Half-width of the window around `x = 1/2` handled by series expansion.
pub const EVEN_INTEGRAL_WINDOW: f64 = 1e-3;

/// Taylor coefficients of `pi u / sin(pi u)` in powers of `(pi u)^2`, through
/// `(pi u)^6`.
const PI_U_OVER_SIN: [f64; 4] = [1.0, 1.0 / 6.0, 7.0 / 360.0, 31.0 / 15120.0];

/// Product of `E_{2n-1}(1/2 + u) / u` with `u / sin(pi u)` as a polynomial in
/// `u`, truncated after `u^6`. Returns coefficients, lowest degree first.
fn even_integrand_series(n: u32) -> [f64; 7] {
    let poly = euler_polynomial_coefficients(EulerIndex(2 * n - 1));
    // E_{2n-1}(1/2 + u) is odd in u; divide by u
    let q: Vec<f64> = poly
        .centered
        .iter()
        .skip(1)
        .map(|c| c.to_f64().unwrap_or(f64::NAN))
        .collect();
    let pi = std::f64::consts::PI;
    let mut s = [0.0; 7];
    for (k, c) in PI_U_OVER_SIN.iter().enumerate() {
        s[2 * k] = c * pi.powi(2 * k as i32) / pi;
    }
    let mut out = [0.0; 7];
    for (i, qi) in q.iter().enumerate().take(7) {
        for (j, sj) in s.iter().enumerate() {
            if i + j < 7 {
                out[i + j] += qi * sj;
            }
        }
    }
    out
}

/// `E_{2n-1}(x) sec(pi x)` with its removable singularity at `x = 1/2`
/// filled in by the local expansion.
pub fn even_integrand(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return domain("even-moment integrand requires n >= 1");
    }
    let u = x - 0.5;
    if u.abs() < EVEN_INTEGRAL_WINDOW {
        let series = even_integrand_series(n);
        return Ok(-crate::special_functions::horner(&series, u));
    }
    let poly = euler_polynomial_coefficients(EulerIndex(2 * n - 1));
    // cos(pi x) = -sin(pi u)
    Ok(-poly.eval_centered(u) / (std::f64::consts::PI * u).sin())
}

/// `int_0^1 E_{2n-1}(x) sec(pi x) dx`.
pub fn even_integral(n: u32) -> Result<f64> {
    if n == 0 {
        return domain("even-moment integral requires n >= 1");
    }
    let delta = EVEN_INTEGRAL_WINDOW;
    let poly = euler_polynomial_coefficients(EulerIndex(2 * n - 1));
    let f = |u: f64| -poly.eval_centered(u) / (std::f64::consts::PI * u).sin();
    let left = quadrature::integrate(f, -0.5, -delta, 1e-14, 1e-14, 4000)?;
    let right = quadrature::integrate(f, delta, 0.5, 1e-14, 1e-14, 4000)?;
    // the inner piece is even in u, so only even powers survive
    let series = even_integrand_series(n);
    let inner: f64 = series
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, c)| -c * 2.0 * delta.powi(k as i32 + 1) / (k as f64 + 1.0))
        .sum();
    Ok(left.value + inner + right.value)
}

/// `K_1(1/2, 2n)` through the secant integral of `E_{2n-1}`.
pub fn k_even_via_integral(n: u32) -> Result<f64> {
    if n == 0 {
        return domain("k_even_via_integral requires n >= 1");
    }
    let pi = std::f64::consts::PI;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign / factorial_f64(n - 1) * (pi * pi / 2.0).powi(n as i32) * even_integral(n)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerBoundCheck {
    pub n: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Rational upper bound on pi, 38 decimals.
const PI_UPPER_NUM: &str = "314159265358979323846264338327950288420";
const PI_UPPER_DEN_DIGITS: u32 = 38;

/// `|E_{2n}| <= 4^{n+1} (2n)! / pi^{2n+1}`.
///
/// `holds` is decided in exact rational arithmetic against an upper bound
/// for pi, so a `true` verdict is certified. `lhs` and `rhs` are reported as
/// floats.
pub fn euler_number_bound_check(n: u32) -> Result<EulerBoundCheck> {
    if n == 0 {
        return domain("euler_number_bound_check requires n >= 1");
    }
    let lhs_exact = euler_number(EulerIndex(2 * n)).abs();
    let factorial: BigInt = (1..=2 * n).map(BigInt::from).product();
    let four_pow = BigInt::one() << (2 * (n + 1));
    let pi_hi = BigRational::new(
        PI_UPPER_NUM.parse::<BigInt>().expect("valid literal"),
        BigInt::from(10).pow(PI_UPPER_DEN_DIGITS),
    );
    // lhs * pi_hi^{2n+1} <= 4^{n+1} (2n)! implies lhs * pi^{2n+1} <= ...
    let scaled =
        BigRational::from_integer(lhs_exact.clone()) * num_traits::pow(pi_hi, 2 * n as usize + 1);
    let holds = scaled <= BigRational::from_integer(&four_pow * &factorial);

    let pi = std::f64::consts::PI;
    let rhs = 4f64.powi(n as i32 + 1) * factorial.to_f64().unwrap_or(f64::INFINITY)
        / pi.powi(2 * n as i32 + 1);
    Ok(EulerBoundCheck {
        n,
        lhs: lhs_exact.to_f64().unwrap_or(f64::INFINITY),
        rhs,
        holds,
    })
}
