//! Standardized innovation distributions: the standard normal and the
//! skewed Student's t.
//!
//! # Skewed Student's t
//!
//! The skewed t used here is the Fernández–Steel construction in the
//! standardized form of Lambert and Laurent. Start from the unit-variance
//! Student's t density with `nu > 2` degrees of freedom,
//!
//! ```text
//! g(u) = Γ((ν+1)/2) / (Γ(ν/2) √(π(ν−2))) · (1 + u²/(ν−2))^(−(ν+1)/2)
//! ```
//!
//! and skew it by stretching the positive half by `ξ` and compressing the
//! negative half by `1/ξ`:
//!
//! ```text
//! p(x) = 2/(ξ + 1/ξ) · [ g(x/ξ) 1{x ≥ 0} + g(ξx) 1{x < 0} ]
//! ```
//!
//! `p` has mean `m = M₁(ξ − 1/ξ)` with `M₁ = Γ((ν−1)/2) √(ν−2) / (√π Γ(ν/2))`
//! and variance `s² = ξ² + 1/ξ² − 1 − m²`, so the standardized innovation
//! `Z = (X − m)/s` has density `f(z) = s · p(s z + m)`, zero mean and unit
//! variance. `ξ > 1` skews to the right, `ξ < 1` to the left, and `ξ = 1`
//! recovers the symmetric standardized t.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Which family an innovation distribution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationKind {
    Normal,
    #[serde(rename = "skewt")]
    SkewedT,
}

impl InnovationKind {
    pub fn tag(self) -> &'static str {
        match self {
            InnovationKind::Normal => "normal",
            InnovationKind::SkewedT => "skewt",
        }
    }
}

/// A zero-mean, unit-variance innovation distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationDist {
    Normal,
    SkewedT { nu: f64, xi: f64 },
}

impl InnovationDist {
    pub fn skewed_t(nu: f64, xi: f64) -> Result<Self> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(Error::domain(format!("skewed-t needs nu > 2, got {nu}")));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::domain(format!("skewed-t needs xi > 0, got {xi}")));
        }
        Ok(InnovationDist::SkewedT { nu, xi })
    }

    pub fn kind(&self) -> InnovationKind {
        match self {
            InnovationDist::Normal => InnovationKind::Normal,
            InnovationDist::SkewedT { .. } => InnovationKind::SkewedT,
        }
    }

    pub fn log_density(&self, z: f64) -> f64 {
        match self {
            InnovationDist::Normal => -0.5 * z * z - LN_SQRT_2PI,
            InnovationDist::SkewedT { nu, xi } => SkewT::new(*nu, *xi).log_density(z),
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        self.log_density(z).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            InnovationDist::Normal => standard_normal().cdf(z),
            InnovationDist::SkewedT { nu, xi } => SkewT::new(*nu, *xi).cdf(z),
        }
    }

    /// The `p`-quantile. Skewed-t quantiles are found by bracketed root
    /// finding on the CDF to an absolute CDF tolerance below 1e-10.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile needs 0 < p < 1, got {p}")));
        }
        Ok(match self {
            InnovationDist::Normal => standard_normal().inverse_cdf(p),
            InnovationDist::SkewedT { nu, xi } => SkewT::new(*nu, *xi).quantile(p),
        })
    }

    /// `E|Z|`, needed by the EGARCH recursion.
    pub fn expected_abs(&self) -> f64 {
        match self {
            InnovationDist::Normal => (2.0 / PI).sqrt(),
            InnovationDist::SkewedT { nu, xi } => skewed_t_expected_abs(*nu, *xi),
        }
    }

    /// Precomputes the constants of the log-density for tight loops.
    pub(crate) fn prepared(&self) -> PreparedDensity {
        match self {
            InnovationDist::Normal => PreparedDensity::Normal,
            InnovationDist::SkewedT { nu, xi } => PreparedDensity::SkewT(SkewT::new(*nu, *xi)),
        }
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid standard normal")
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum PreparedDensity {
    Normal,
    SkewT(SkewT),
}

impl PreparedDensity {
    #[inline]
    pub(crate) fn log_density(&self, z: f64) -> f64 {
        match self {
            PreparedDensity::Normal => -0.5 * z * z - LN_SQRT_2PI,
            PreparedDensity::SkewT(t) => t.log_density(z),
        }
    }
}

/// Precomputed constants of the standardized skewed t.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SkewT {
    nu: f64,
    xi: f64,
    /// Mean of the unstandardized skewed variable.
    m: f64,
    /// Standard deviation of the unstandardized skewed variable.
    s: f64,
    /// `ln(2/(ξ+1/ξ)) + ln s + ln` of the symmetric normalizing constant.
    log_const: f64,
    half_nu_p1: f64,
    inv_nu_m2: f64,
}

impl SkewT {
    pub(crate) fn new(nu: f64, xi: f64) -> Self {
        let m1 = (ln_gamma(0.5 * (nu - 1.0)) - ln_gamma(0.5 * nu)).exp() * (nu - 2.0).sqrt() / PI.sqrt();
        let m = m1 * (xi - 1.0 / xi);
        let s = (xi * xi + 1.0 / (xi * xi) - 1.0 - m * m).sqrt();
        let log_g0 = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (PI * (nu - 2.0)).ln();
        let log_const = (2.0 / (xi + 1.0 / xi)).ln() + s.ln() + log_g0;
        Self {
            nu,
            xi,
            m,
            s,
            log_const,
            half_nu_p1: 0.5 * (nu + 1.0),
            inv_nu_m2: 1.0 / (nu - 2.0),
        }
    }

    #[inline]
    pub(crate) fn log_density(&self, z: f64) -> f64 {
        let x = self.s * z + self.m;
        let u = if x >= 0.0 { x / self.xi } else { x * self.xi };
        self.log_const - self.half_nu_p1 * (u * u * self.inv_nu_m2).ln_1p()
    }

    /// CDF of the unit-variance symmetric t.
    fn unit_t_cdf(&self, u: f64) -> f64 {
        let t = StudentsT::new(0.0, 1.0, self.nu).expect("nu > 2");
        t.cdf(u * (self.nu * self.inv_nu_m2).sqrt())
    }

    pub(crate) fn cdf(&self, z: f64) -> f64 {
        let x = self.s * z + self.m;
        let xi2 = self.xi * self.xi;
        if x < 0.0 {
            2.0 / (xi2 + 1.0) * self.unit_t_cdf(x * self.xi)
        } else {
            1.0 / (1.0 + xi2) + 2.0 * xi2 / (1.0 + xi2) * (self.unit_t_cdf(x / self.xi) - 0.5)
        }
    }

    pub(crate) fn quantile(&self, p: f64) -> f64 {
        let f = |z: f64| self.cdf(z) - p;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while f(lo) > 0.0 {
            hi = lo;
            lo *= 2.0;
        }
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        numeric::brent(f, lo, hi, 1e-14, 1e-13)
    }
}

fn expected_abs_cache() -> &'static Mutex<HashMap<(u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const EXPECTED_ABS_CACHE_CAP: usize = 16_384;

/// `E|Z|` for the standardized skewed t by adaptive quadrature, cached per
/// `(nu, xi)`.
fn skewed_t_expected_abs(nu: f64, xi: f64) -> f64 {
    let key = (nu.to_bits(), xi.to_bits());
    if let Some(v) = expected_abs_cache().lock().expect("cache lock").get(&key) {
        return *v;
    }
    let dist = SkewT::new(nu, xi);
    let integrand = |z: f64| z.abs() * dist.log_density(z).exp();
    // Split at the kink of |z| and at the switch between the two halves.
    let kink = -dist.m / dist.s;
    let (a, b) = if kink < 0.0 { (kink, 0.0) } else { (0.0, kink) };
    let tol = 1e-11;
    let value = numeric::integrate_lower(integrand, a, tol)
        + numeric::integrate(integrand, a, b, tol)
        + numeric::integrate_upper(integrand, b, tol);
    let mut cache = expected_abs_cache().lock().expect("cache lock");
    if cache.len() >= EXPECTED_ABS_CACHE_CAP {
        cache.clear();
    }
    cache.insert(key, value);
    value
}
