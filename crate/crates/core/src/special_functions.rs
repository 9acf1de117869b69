//! Scalar special functions: Gamma, Dirichlet beta, the standard normal
//! tail, Euler numbers and Euler polynomials.
//!
//! Euler numbers follow the Abramowitz–Stegun sign convention
//! (`E_2 = -1`, `E_4 = 5`) and are kept exact as big integers. Euler
//! polynomial coefficients are exact rationals, cached per degree.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{domain, Result};

/// A finite real argument.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RealArg(f64);

impl RealArg {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            domain(format!("argument must be finite, got {value}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Index `n >= 0` of an Euler number or polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EulerIndex(pub u32);

fn check_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        domain(format!("{what} must be finite, got {x}"))
    }
}

/// Gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    check_finite(x, "gamma argument")?;
    if x <= 0.0 {
        return domain(format!("gamma_fn requires x > 0, got {x}"));
    }
    Ok(libm::tgamma(x))
}

/// Order of the Cohen–Rodriguez-Villegas–Zagier acceleration. The error is
/// bounded by `2 * beta_terms[0] / (3 + sqrt 8)^ORDER`, about `1e-23` here.
const CVZ_ORDER: usize = 30;

/// Dirichlet beta function `sum_{k>=0} (-1)^k (2k+1)^{-s}` for `s > 0`.
///
/// The terms `(2k+1)^{-s}` form a moment sequence of a positive measure on
/// `[0, 1]`, so the CVZ alternating-series acceleration applies for every
/// `s > 0`, including the slowly converging region near `s = 0`.
pub fn dirichlet_beta(s: f64) -> Result<f64> {
    check_finite(s, "beta argument")?;
    if s <= 0.0 {
        return domain(format!("dirichlet_beta requires s > 0, got {s}"));
    }
    Ok(cvz_alternating_sum(CVZ_ORDER, |k| {
        (2.0 * k as f64 + 1.0).powf(-s)
    }))
}

/// Algorithm 1 of Cohen, Rodriguez Villegas and Zagier for
/// `sum_{k>=0} (-1)^k a_k`.
fn cvz_alternating_sum(n: usize, term: impl Fn(usize) -> f64) -> f64 {
    let d = (3.0 + 8f64.sqrt()).powi(n as i32);
    let d = (d + 1.0 / d) / 2.0;
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for k in 0..n {
        c = b - c;
        s += c * term(k);
        let kf = k as f64;
        let nf = n as f64;
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// Standard normal upper tail `P(N > t)`.
pub fn normal_tail(t: f64) -> Result<f64> {
    check_finite(t, "normal_tail argument")?;
    Ok(0.5 * libm::erfc(t / std::f64::consts::SQRT_2))
}

/// `P(N > t)` for callers that have already validated `t`.
pub(crate) fn psi(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

fn euler_table() -> &'static RwLock<Vec<BigInt>> {
    static TABLE: OnceLock<RwLock<Vec<BigInt>>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(vec![BigInt::one()]))
}

/// Euler number `E_n` as an exact integer (zero for odd `n`).
///
/// Uses the even-index recurrence `sum_{k=0}^{m} C(2m, 2k) E_{2k} = 0`
/// for `m >= 1`, which follows from `sech(t) cosh(t) = 1`.
pub fn euler_number(n: EulerIndex) -> BigInt {
    let n = n.0 as usize;
    if n % 2 == 1 {
        return BigInt::zero();
    }
    let m = n / 2;
    {
        let table = euler_table().read().expect("euler table poisoned");
        if let Some(e) = table.get(m) {
            return e.clone();
        }
    }
    let mut table = euler_table().write().expect("euler table poisoned");
    while table.len() <= m {
        let next = table.len();
        let row = binomial_row(2 * next as u32);
        let mut acc = BigInt::zero();
        for (k, e) in table.iter().enumerate() {
            acc += &row[2 * k] * e;
        }
        table.push(-acc);
    }
    table[m].clone()
}

fn binomial_row(n: u32) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * BigInt::from(n - k) / BigInt::from(k + 1);
        row.push(c.clone());
    }
    row
}

/// Exact coefficients of an Euler polynomial in two bases.
#[derive(Debug, Clone)]
pub struct EulerPolynomial {
    /// Coefficients of `x^j`, lowest degree first.
    pub monomial: Vec<BigRational>,
    /// Coefficients of `(x - 1/2)^j`, lowest degree first.
    pub centered: Vec<BigRational>,
    monomial_f64: Vec<f64>,
    centered_f64: Vec<f64>,
}

impl EulerPolynomial {
    fn build(n: u32) -> Self {
        // E_n(x) = sum_k C(n,k) E_k / 2^k (x - 1/2)^{n-k}
        let row = binomial_row(n);
        let mut centered = vec![BigRational::zero(); n as usize + 1];
        for k in (0..=n).step_by(2) {
            let ek = euler_number(EulerIndex(k));
            let coeff = BigRational::new(&row[k as usize] * ek, BigInt::one() << k);
            centered[(n - k) as usize] = coeff;
        }
        // expand (x - 1/2)^j into monomials
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut monomial = vec![BigRational::zero(); n as usize + 1];
        for (j, c) in centered.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let row_j = binomial_row(j as u32);
            for (i, b) in row_j.iter().enumerate() {
                // C(j,i) x^i (-1/2)^{j-i}
                let mut term = c * BigRational::from_integer(b.clone());
                let p = (j - i) as i32;
                term *= num_traits::pow(half.clone(), p as usize);
                if p % 2 == 1 {
                    term = -term;
                }
                monomial[i] += term;
            }
        }
        Self {
            monomial_f64: to_f64(&monomial),
            centered_f64: to_f64(&centered),
            monomial,
            centered,
        }
    }

    pub fn degree(&self) -> usize {
        self.monomial.len() - 1
    }

    /// Horner evaluation of the monomial form.
    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.monomial_f64, x)
    }

    /// Horner evaluation in powers of `u = x - 1/2`.
    pub fn eval_centered(&self, u: f64) -> f64 {
        horner(&self.centered_f64, u)
    }

    /// Exact value at a rational point.
    pub fn eval_exact(&self, x: &BigRational) -> BigRational {
        self.monomial
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + c)
    }
}

fn to_f64(coeffs: &[BigRational]) -> Vec<f64> {
    coeffs
        .iter()
        .map(|c| c.to_f64().unwrap_or(f64::NAN))
        .collect()
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn polynomial_cache() -> &'static RwLock<HashMap<u32, Arc<EulerPolynomial>>> {
    static CACHE: OnceLock<RwLock<HashMap<u32, Arc<EulerPolynomial>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached exact Euler polynomial `E_n(x)`.
pub fn euler_polynomial_coefficients(n: EulerIndex) -> Arc<EulerPolynomial> {
    if let Some(p) = polynomial_cache()
        .read()
        .expect("polynomial cache poisoned")
        .get(&n.0)
    {
        return Arc::clone(p);
    }
    let built = Arc::new(EulerPolynomial::build(n.0));
    let mut cache = polynomial_cache()
        .write()
        .expect("polynomial cache poisoned");
    Arc::clone(cache.entry(n.0).or_insert(built))
}

/// Euler polynomial `E_n(x)` evaluated in floating point.
pub fn euler_polynomial(n: EulerIndex, x: f64) -> Result<f64> {
    check_finite(x, "euler_polynomial argument")?;
    Ok(euler_polynomial_coefficients(n).eval(x))
}

/// `|E_n|` as a float. Exact for the magnitudes used here.
pub(crate) fn euler_number_abs_f64(n: EulerIndex) -> f64 {
    euler_number(n).abs().to_f64().unwrap_or(f64::INFINITY)
}
