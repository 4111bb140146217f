//! Location-scale Student-t: negative log-likelihood, its gradient, CDF and
//! quantiles.

use serde::{Deserialize, Serialize};

use crate::special::{beta_reg, digamma, ln_gamma};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTParams<T = f64> {
    pub mu: T,
    pub sigma: T,
    pub nu: T,
}

/// Partial derivatives of the NLL with respect to (μ, σ, ν).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllGradient<T> {
    pub mu: T,
    pub sigma: T,
    pub nu: T,
}

impl<T: Scalar> StudentTParams<T> {
    pub fn new(mu: T, sigma: T, nu: T) -> Self {
        Self { mu, sigma, nu }
    }

    fn check(&self, y: T) -> Result<()> {
        if !(y.is_finite() && self.mu.is_finite() && self.sigma.is_finite() && self.nu.is_finite()) {
            return Err(Error::invalid("non-finite Student-t input"));
        }
        if !(self.sigma > T::zero() && self.nu > T::zero()) {
            return Err(Error::invalid(format!(
                "invalid Student-t scale {} / dof {}",
                self.sigma, self.nu
            )));
        }
        Ok(())
    }

    /// −ln p(y).
    pub fn nll(&self, y: T) -> Result<T> {
        self.check(y)?;
        Ok(nll_unchecked(y, self.mu, self.sigma, self.nu))
    }

    pub fn nll_gradient(&self, y: T) -> Result<NllGradient<T>> {
        self.check(y)?;
        Ok(nll_gradient_unchecked(y, self.mu, self.sigma, self.nu))
    }

    pub fn cdf(&self, y: T) -> T {
        standard_cdf((y - self.mu) / self.sigma, self.nu)
    }

    /// Inverse CDF by bisection on the standardized variable; exact μ at 0.5.
    pub fn quantile(&self, p: T) -> T {
        self.mu + self.sigma * standard_quantile(p, self.nu)
    }
}

pub(crate) fn nll_unchecked<T: Scalar>(y: T, mu: T, sigma: T, nu: T) -> T {
    let half = T::c(0.5);
    let z = (y - mu) / sigma;
    -ln_gamma((nu + T::one()) * half)
        + ln_gamma(nu * half)
        + half * (nu * T::PI()).ln()
        + sigma.ln()
        + (nu + T::one()) * half * (z * z / nu).ln_1p()
}

pub(crate) fn nll_gradient_unchecked<T: Scalar>(y: T, mu: T, sigma: T, nu: T) -> NllGradient<T> {
    let half = T::c(0.5);
    let z = (y - mu) / sigma;
    let z2 = z * z;
    let denom = nu + z2;
    let d_mu = -(nu + T::one()) * z / (sigma * denom);
    let d_sigma = T::one() / sigma - (nu + T::one()) * z2 / (sigma * denom);
    let d_nu =
        -half * digamma((nu + T::one()) * half) + half * digamma(nu * half) + half / nu + half * (z2 / nu).ln_1p()
            - (nu + T::one()) * z2 / (T::c(2.0) * nu * denom);
    NllGradient {
        mu: d_mu,
        sigma: d_sigma,
        nu: d_nu,
    }
}

/// CDF of the standard Student-t with `nu` degrees of freedom.
pub fn standard_cdf<T: Scalar>(t: T, nu: T) -> T {
    if t.is_nan() {
        return t;
    }
    if t.is_infinite() {
        return if t > T::zero() { T::one() } else { T::zero() };
    }
    let half = T::c(0.5);
    let tail = half * beta_reg(nu * half, half, nu / (nu + t * t));
    if t > T::zero() {
        T::one() - tail
    } else {
        tail
    }
}

pub fn standard_quantile<T: Scalar>(p: T, nu: T) -> T {
    let half = T::c(0.5);
    if p == half {
        return T::zero();
    }
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    if p < half {
        return -standard_quantile(T::one() - p, nu);
    }
    let mut hi = T::one();
    while standard_cdf(hi, nu) < p {
        hi *= T::c(2.0);
        if !hi.is_finite() {
            return hi;
        }
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if standard_cdf(mid, nu) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}

/// Levels reported with every forecast.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];
