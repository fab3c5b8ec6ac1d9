//! Conditional-variance recursions and their maximum-likelihood calibration.
//!
//! | kind          | one-step variance                                              |
//! |---------------|----------------------------------------------------------------|
//! | `Arch1`       | `σ²ₜ₊₁ = ω + α εₜ²`                                             |
//! | `Garch11`     | `σ²ₜ₊₁ = ω + α εₜ² + β σ²ₜ`                                     |
//! | `Egarch11`    | `ln σ²ₜ₊₁ = ω + β ln σ²ₜ + α(|zₜ| − E|z|) + γ zₜ`, `zₜ = εₜ/σₜ` |
//! | `RiskMetrics` | `σ²ₜ₊₁ = λ σ²ₜ + (1 − λ) εₜ²`, `λ = 0.94`                       |
//!
//! Fits maximize `Σ [ln f(εₜ/σₜ) − ln σₜ]` over a reparameterized,
//! unconstrained space: logs for positivity, a logistic simplex for
//! `α + β < 1`, `tanh` for the EGARCH persistence `|β| < 1`, and bounded
//! maps for the skewed-t shape (`ν ∈ (2.1, 100)`, `ξ ∈ (0.2, 5)`).

mod optimize;

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{InnovationDist, InnovationKind, PreparedDensity};
use crate::error::{Error, Result};

pub const RISKMETRICS_LAMBDA: f64 = 0.94;
pub const MIN_WINDOW: usize = 250;

const NU_MIN: f64 = 2.1;
const NU_MAX: f64 = 100.0;
const LN_XI_MAX: f64 = 1.609_437_912_434_100_3; // ln 5
const LN_VAR_CLAMP: f64 = 60.0;
const VAR_BAND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolKind {
    Arch1,
    Garch11,
    Egarch11,
    #[serde(rename = "riskmetrics")]
    RiskMetrics,
}

impl VolKind {
    pub fn tag(self) -> &'static str {
        match self {
            VolKind::Arch1 => "arch1",
            VolKind::Garch11 => "garch11",
            VolKind::Egarch11 => "egarch11",
            VolKind::RiskMetrics => "riskmetrics",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        [
            VolKind::Arch1,
            VolKind::Garch11,
            VolKind::Egarch11,
            VolKind::RiskMetrics,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
        .ok_or_else(|| Error::Config(format!("unknown volatility model {tag:?}")))
    }

    fn n_variance_params(self) -> usize {
        match self {
            VolKind::Arch1 => 2,
            VolKind::Garch11 => 3,
            VolKind::Egarch11 => 4,
            VolKind::RiskMetrics => 0,
        }
    }
}

impl fmt::Display for VolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VolModelSpec {
    pub kind: VolKind,
    pub innovation: InnovationKind,
}

impl VolModelSpec {
    pub fn new(kind: VolKind, innovation: InnovationKind) -> Self {
        Self { kind, innovation }
    }

    pub fn tag(&self) -> String {
        format!("{}-{}", self.kind.tag(), self.innovation.tag())
    }
}

/// How the conditional mean is removed before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanModel {
    /// `εₜ = rₜ`.
    #[default]
    Zero,
    /// `εₜ = rₜ − r̄` with `r̄` the window mean.
    SampleMean,
}

/// Whether skewed-t shape parameters are estimated with the variance
/// parameters or held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ShapeEstimation {
    #[default]
    Joint,
    Fixed {
        nu: f64,
        xi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub mean: MeanModel,
    pub shape: ShapeEstimation,
    /// Objective evaluations allowed per optimization attempt.
    pub max_evaluations: usize,
    /// Convergence threshold on successive log-likelihoods.
    pub tolerance: f64,
    /// Jittered restarts after a failed attempt.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mean: MeanModel::Zero,
            shape: ShapeEstimation::Joint,
            max_evaluations: 2000,
            tolerance: 1e-8,
            restarts: 3,
            seed: 0,
        }
    }
}

/// Variance-equation parameters. Unused entries are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VolParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Filter state at the last observation of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredState {
    pub sigma2: f64,
    pub eps: f64,
}

/// A calibrated volatility model.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedVolModel {
    pub spec: VolModelSpec,
    pub params: VolParams,
    pub dist: InnovationDist,
    /// Smoothing constant; `Some(0.94)` for RiskMetrics only.
    pub lambda: Option<f64>,
    /// Mean removed from the returns before filtering.
    pub mean: f64,
    pub loglik: f64,
    pub state: FilteredState,
    pub evaluations: usize,
    /// Length of the calibration window.
    pub n_obs: usize,
    /// Optimizer curvature at the solution, reused by warm starts.
    curvature: Option<Vec<f64>>,
}

impl FittedVolModel {
    /// A model with given parameters and filter state, as if fitted
    /// elsewhere. The log-likelihood is unknown (`NaN`).
    pub fn from_parts(
        spec: VolModelSpec,
        params: VolParams,
        dist: InnovationDist,
        mean: f64,
        state: FilteredState,
    ) -> Self {
        Self {
            spec,
            params,
            dist,
            lambda: (spec.kind == VolKind::RiskMetrics).then_some(RISKMETRICS_LAMBDA),
            mean,
            loglik: f64::NAN,
            state,
            evaluations: 0,
            n_obs: 0,
            curvature: None,
        }
    }

    /// Parameters by name, in a fixed order per model kind.
    pub fn named_params(&self) -> Vec<(&'static str, f64)> {
        let p = &self.params;
        let mut out = match self.spec.kind {
            VolKind::Arch1 => vec![("omega", p.omega), ("alpha", p.alpha)],
            VolKind::Garch11 => vec![("omega", p.omega), ("alpha", p.alpha), ("beta", p.beta)],
            VolKind::Egarch11 => vec![
                ("omega", p.omega),
                ("alpha", p.alpha),
                ("beta", p.beta),
                ("gamma", p.gamma),
            ],
            VolKind::RiskMetrics => vec![("lambda", RISKMETRICS_LAMBDA)],
        };
        if let InnovationDist::SkewedT { nu, xi } = self.dist {
            out.push(("nu", nu));
            out.push(("xi", xi));
        }
        out
    }

    /// Asymptotic standard errors of the estimated parameters (variance
    /// parameters, then `nu`, `xi` when estimated), from the inverse of the
    /// numerically differentiated observed information at the optimum.
    pub fn standard_errors(&self, window: &[f64]) -> Result<Vec<f64>> {
        let residuals: Vec<f64> = window.iter().map(|r| r - self.mean).collect();
        let theta = natural_vector(self);
        let k = theta.len();
        if k == 0 {
            return Ok(Vec::new());
        }
        let scale: Vec<f64> = theta.iter().map(|t| t.abs().max(1e-6)).collect();
        let ll = |u: &[f64]| {
            let nat: Vec<f64> = u.iter().zip(&scale).map(|(a, c)| a * c).collect();
            let (params, dist) = from_natural(self.spec, &nat, self.dist);
            loglik(self.spec.kind, &params, &dist, &residuals).0
        };
        let u0: Vec<f64> = theta.iter().zip(&scale).map(|(t, c)| t / c).collect();
        let h = 1e-4;
        let mut hess = DMatrix::zeros(k, k);
        let mut probe = u0.clone();
        let f0 = ll(&u0);
        for i in 0..k {
            for j in i..k {
                let v = if i == j {
                    probe[i] = u0[i] + h;
                    let up = ll(&probe);
                    probe[i] = u0[i] - h;
                    let down = ll(&probe);
                    probe[i] = u0[i];
                    (up - 2.0 * f0 + down) / (h * h)
                } else {
                    let mut corner = |di: f64, dj: f64| {
                        probe[i] = u0[i] + di;
                        probe[j] = u0[j] + dj;
                        let v = ll(&probe);
                        probe[i] = u0[i];
                        probe[j] = u0[j];
                        v
                    };
                    (corner(h, h) - corner(h, -h) - corner(-h, h) + corner(-h, -h)) / (4.0 * h * h)
                };
                hess[(i, j)] = -v;
                hess[(j, i)] = -v;
            }
        }
        let cov = hess
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular observed information".into()))?;
        (0..k)
            .map(|i| {
                let v = cov[(i, i)];
                if v > 0.0 {
                    Ok(v.sqrt() * scale[i])
                } else {
                    Err(Error::Numerical("observed information is not positive definite".into()))
                }
            })
            .collect()
    }
}

/// Log-likelihood and end-of-window state for given parameters.
///
/// The recursion starts from the sample second moment of the residuals.
pub fn loglik(kind: VolKind, params: &VolParams, dist: &InnovationDist, residuals: &[f64]) -> (f64, FilteredState) {
    let density = dist.prepared();
    let e_abs = if kind == VolKind::Egarch11 {
        dist.expected_abs()
    } else {
        0.0
    };
    filter(kind, params, &density, e_abs, residuals)
}

fn filter(kind: VolKind, p: &VolParams, density: &PreparedDensity, e_abs: f64, eps: &[f64]) -> (f64, FilteredState) {
    let n = eps.len();
    let mut sigma2 = eps.iter().map(|e| e * e).sum::<f64>() / n as f64;
    // Paths that leave this band only arise from explosive or collapsing
    // filters (e.g. a non-invertible EGARCH); they are treated as invalid.
    let (lo, hi) = (sigma2 * VAR_BAND.recip(), sigma2 * VAR_BAND);
    let mut ll = 0.0;
    for (t, &e) in eps.iter().enumerate() {
        if !(sigma2 > lo && sigma2 < hi) {
            return (
                f64::NEG_INFINITY,
                FilteredState {
                    sigma2: f64::NAN,
                    eps: e,
                },
            );
        }
        let sd = sigma2.sqrt();
        let z = e / sd;
        ll += density.log_density(z) - sd.ln();
        if t + 1 == n {
            break;
        }
        sigma2 = step(kind, p, e_abs, sigma2, e);
    }
    let last = eps[n - 1];
    let state = FilteredState { sigma2, eps: last };
    if ll.is_nan() {
        (f64::NEG_INFINITY, state)
    } else {
        (ll, state)
    }
}

#[inline]
fn step(kind: VolKind, p: &VolParams, e_abs: f64, sigma2: f64, eps: f64) -> f64 {
    match kind {
        VolKind::Arch1 => p.omega + p.alpha * eps * eps,
        VolKind::Garch11 => p.omega + p.alpha * eps * eps + p.beta * sigma2,
        VolKind::Egarch11 => {
            let z = eps / sigma2.sqrt();
            let ln_next = p.omega + p.beta * sigma2.ln() + p.alpha * (z.abs() - e_abs) + p.gamma * z;
            ln_next.clamp(-LN_VAR_CLAMP, LN_VAR_CLAMP).exp()
        }
        VolKind::RiskMetrics => RISKMETRICS_LAMBDA * sigma2 + (1.0 - RISKMETRICS_LAMBDA) * eps * eps,
    }
}

/// One-day-ahead variance `σ²ₜ₊₁` from the filtered end-of-window state.
pub fn forecast_variance(model: &FittedVolModel) -> f64 {
    let e_abs = if model.spec.kind == VolKind::Egarch11 {
        model.dist.expected_abs()
    } else {
        0.0
    };
    step(
        model.spec.kind,
        &model.params,
        e_abs,
        model.state.sigma2,
        model.state.eps,
    )
}

/// `√(ω / (1 − α − β))`, the unconditional volatility of a GARCH(1,1).
pub fn long_run_volatility(model: &FittedVolModel) -> Result<f64> {
    if model.spec.kind != VolKind::Garch11 {
        return Err(Error::Unsupported(format!(
            "long-run volatility is defined for garch11, not {}",
            model.spec.kind
        )));
    }
    let p = &model.params;
    let persistence = p.alpha + p.beta;
    if persistence >= 1.0 {
        return Err(Error::domain(format!("alpha + beta = {persistence} is not stationary")));
    }
    Ok((p.omega / (1.0 - persistence)).sqrt())
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn estimates_shape(spec: VolModelSpec, options: &FitOptions) -> bool {
    spec.innovation == InnovationKind::SkewedT && matches!(options.shape, ShapeEstimation::Joint)
}

/// Maps an unconstrained vector to parameters and innovation distribution.
fn decode(
    spec: VolModelSpec,
    theta: &[f64],
    fixed_dist: InnovationDist,
    with_shape: bool,
) -> (VolParams, InnovationDist) {
    let mut p = VolParams::default();
    match spec.kind {
        VolKind::Arch1 => {
            p.omega = theta[0].exp();
            p.alpha = theta[1].exp();
        }
        VolKind::Garch11 => {
            p.omega = theta[0].exp();
            let persistence = logistic(theta[1]);
            let share = logistic(theta[2]);
            p.alpha = persistence * share;
            p.beta = persistence * (1.0 - share);
        }
        VolKind::Egarch11 => {
            p.omega = theta[0];
            p.alpha = theta[1];
            p.beta = theta[2].tanh();
            p.gamma = theta[3];
        }
        VolKind::RiskMetrics => {}
    }
    let dist = if with_shape {
        let k = spec.kind.n_variance_params();
        let nu = NU_MIN + (NU_MAX - NU_MIN) * logistic(theta[k]);
        let xi = (LN_XI_MAX * theta[k + 1].tanh()).exp();
        InnovationDist::SkewedT { nu, xi }
    } else {
        fixed_dist
    };
    (p, dist)
}

fn encode(spec: VolModelSpec, p: &VolParams, dist: &InnovationDist, with_shape: bool) -> Vec<f64> {
    let mut theta = match spec.kind {
        VolKind::Arch1 => vec![p.omega.ln(), p.alpha.max(1e-12).ln()],
        VolKind::Garch11 => {
            let persistence = (p.alpha + p.beta).clamp(1e-9, 1.0 - 1e-9);
            let share = (p.alpha / persistence).clamp(1e-9, 1.0 - 1e-9);
            vec![p.omega.ln(), logit(persistence), logit(share)]
        }
        VolKind::Egarch11 => vec![
            p.omega,
            p.alpha,
            p.beta.clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh(),
            p.gamma,
        ],
        VolKind::RiskMetrics => vec![],
    };
    if with_shape {
        let (nu, xi) = match dist {
            InnovationDist::SkewedT { nu, xi } => (*nu, *xi),
            InnovationDist::Normal => (8.0, 1.0),
        };
        let frac = ((nu - NU_MIN) / (NU_MAX - NU_MIN)).clamp(1e-9, 1.0 - 1e-9);
        theta.push(logit(frac));
        theta.push((xi.ln() / LN_XI_MAX).clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh());
    }
    theta
}

/// Natural-scale vector of the estimated parameters.
fn natural_vector(model: &FittedVolModel) -> Vec<f64> {
    let p = &model.params;
    let mut v = match model.spec.kind {
        VolKind::Arch1 => vec![p.omega, p.alpha],
        VolKind::Garch11 => vec![p.omega, p.alpha, p.beta],
        VolKind::Egarch11 => vec![p.omega, p.alpha, p.beta, p.gamma],
        VolKind::RiskMetrics => vec![],
    };
    if let InnovationDist::SkewedT { nu, xi } = model.dist {
        v.push(nu);
        v.push(xi);
    }
    v
}

fn from_natural(spec: VolModelSpec, v: &[f64], dist: InnovationDist) -> (VolParams, InnovationDist) {
    let mut p = VolParams::default();
    match spec.kind {
        VolKind::Arch1 => {
            p.omega = v[0];
            p.alpha = v[1];
        }
        VolKind::Garch11 => {
            p.omega = v[0];
            p.alpha = v[1];
            p.beta = v[2];
        }
        VolKind::Egarch11 => {
            p.omega = v[0];
            p.alpha = v[1];
            p.beta = v[2];
            p.gamma = v[3];
        }
        VolKind::RiskMetrics => {}
    }
    let k = spec.kind.n_variance_params();
    let dist = match dist {
        InnovationDist::SkewedT { .. } if v.len() >= k + 2 => InnovationDist::SkewedT { nu: v[k], xi: v[k + 1] },
        other => other,
    };
    (p, dist)
}

fn default_start(kind: VolKind, second_moment: f64) -> VolParams {
    match kind {
        VolKind::Arch1 => VolParams {
            omega: 0.8 * second_moment,
            alpha: 0.2,
            ..Default::default()
        },
        VolKind::Garch11 => VolParams {
            omega: 0.02 * second_moment,
            alpha: 0.08,
            beta: 0.90,
            gamma: 0.0,
        },
        VolKind::Egarch11 => VolParams {
            omega: second_moment.ln() * (1.0 - 0.97),
            alpha: 0.12,
            beta: 0.97,
            gamma: -0.06,
        },
        VolKind::RiskMetrics => VolParams::default(),
    }
}

/// A random parameter vector satisfying the model's constraints, for
/// optimizer sanity checks.
pub fn random_feasible<R: Rng>(spec: VolModelSpec, second_moment: f64, rng: &mut R) -> (VolParams, InnovationDist) {
    let p = match spec.kind {
        VolKind::Arch1 => VolParams {
            omega: second_moment * rng.random_range(0.05..1.5),
            alpha: rng.random_range(0.0..0.95),
            ..Default::default()
        },
        VolKind::Garch11 => {
            let persistence: f64 = rng.random_range(0.5..0.999);
            let share: f64 = rng.random_range(0.01..0.5);
            VolParams {
                omega: second_moment * (1.0 - persistence) * rng.random_range(0.2..5.0),
                alpha: persistence * share,
                beta: persistence * (1.0 - share),
                gamma: 0.0,
            }
        }
        VolKind::Egarch11 => {
            let beta: f64 = rng.random_range(0.5..0.999);
            VolParams {
                omega: second_moment.ln() * (1.0 - beta) * rng.random_range(0.5..1.5),
                alpha: rng.random_range(-0.1..0.4),
                beta,
                gamma: rng.random_range(-0.3..0.3),
            }
        }
        VolKind::RiskMetrics => VolParams::default(),
    };
    let dist = match spec.innovation {
        InnovationKind::Normal => InnovationDist::Normal,
        InnovationKind::SkewedT => InnovationDist::SkewedT {
            nu: rng.random_range(2.5..50.0),
            xi: rng.random_range(0.5..2.0),
        },
    };
    (p, dist)
}

/// Calibrates `spec` on a return window by maximum likelihood.
///
/// RiskMetrics has no variance parameters to estimate; with a skewed-t
/// innovation only the shape is fitted along the fixed EWMA path.
pub fn fit(spec: VolModelSpec, window: &[f64], options: &FitOptions) -> Result<FittedVolModel> {
    fit_from(spec, window, options, None)
}

/// As [`fit`], starting the optimizer from `warm` when given (typically the
/// previous day's fit on an overlapping window).
pub fn fit_from(
    spec: VolModelSpec,
    window: &[f64],
    options: &FitOptions,
    warm: Option<&FittedVolModel>,
) -> Result<FittedVolModel> {
    if window.len() < MIN_WINDOW {
        return Err(Error::domain(format!(
            "calibration window of {} returns; need at least {MIN_WINDOW}",
            window.len()
        )));
    }
    if let Some(i) = window.iter().position(|r| !r.is_finite()) {
        return Err(Error::domain(format!("non-finite return at window position {i}")));
    }
    let n = window.len() as f64;
    let sample_mean = window.iter().sum::<f64>() / n;
    let sample_var = window.iter().map(|r| (r - sample_mean).powi(2)).sum::<f64>() / n;
    if !(sample_var > 1e-24 * sample_mean.powi(2).max(1e-300)) {
        return Err(Error::domain("zero-variance calibration window"));
    }
    let mean = match options.mean {
        MeanModel::Zero => 0.0,
        MeanModel::SampleMean => sample_mean,
    };
    let residuals: Vec<f64> = window.iter().map(|r| r - mean).collect();
    let second_moment = residuals.iter().map(|e| e * e).sum::<f64>() / n;

    let with_shape = estimates_shape(spec, options);
    let fixed_dist = match (spec.innovation, options.shape) {
        (InnovationKind::Normal, _) => InnovationDist::Normal,
        (InnovationKind::SkewedT, ShapeEstimation::Fixed { nu, xi }) => InnovationDist::skewed_t(nu, xi)?,
        (InnovationKind::SkewedT, ShapeEstimation::Joint) => InnovationDist::SkewedT { nu: 8.0, xi: 1.0 },
    };

    let warm = warm.filter(|w| w.spec == spec);
    let curvature = warm.and_then(|w| w.curvature.as_deref());
    let cold = encode(
        spec,
        &default_start(spec.kind, second_moment),
        &InnovationDist::SkewedT { nu: 8.0, xi: 0.95 },
        with_shape,
    );
    // A failed warm start gets one extra attempt from the cold start before
    // the jittered restarts.
    let mut starts: Vec<(Vec<f64>, Option<&[f64]>)> = Vec::new();
    if let Some(w) = warm {
        starts.push((encode(spec, &w.params, &w.dist, with_shape), curvature));
    }
    starts.push((cold.clone(), None));

    let objective = |theta: &[f64]| {
        let (p, d) = decode(spec, theta, fixed_dist, with_shape);
        -loglik(spec.kind, &p, &d, &residuals).0
    };
    let settings = optimize::Settings {
        tolerance: options.tolerance,
        max_evaluations: options.max_evaluations,
    };

    let mut evaluations = 0;
    let mut best: Option<optimize::Minimum> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let attempts = starts.len() + options.restarts;
    for attempt in 0..attempts {
        let (x0, seed_curvature) = match starts.get(attempt) {
            Some((x, h)) => (x.clone(), *h),
            None => (
                cold.iter()
                    .map(|x| x + 0.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                None,
            ),
        };
        let m = optimize::bfgs_from(objective, &x0, settings, seed_curvature);
        evaluations += m.evaluations;
        let converged = m.converged && m.value.is_finite();
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
        if converged {
            break;
        }
        if attempt + 1 == attempts {
            let b = best.expect("at least one attempt");
            return Err(Error::Calibration {
                evaluations,
                best_loglik: -b.value,
                best_params: b.x,
            });
        }
    }
    let best = best.expect("at least one attempt");
    let (params, dist) = decode(spec, &best.x, fixed_dist, with_shape);
    let (ll, state) = loglik(spec.kind, &params, &dist, &residuals);
    Ok(FittedVolModel {
        spec,
        params,
        dist,
        lambda: (spec.kind == VolKind::RiskMetrics).then_some(RISKMETRICS_LAMBDA),
        mean,
        loglik: ll,
        state,
        evaluations,
        n_obs: window.len(),
        curvature: Some(best.inverse_hessian),
    })
}

/// Simulates `n` returns from a model driven by standard-normal innovations,
/// discarding `burn` initial draws.
pub fn simulate<R: Rng>(kind: VolKind, params: &VolParams, n: usize, burn: usize, rng: &mut R) -> Vec<f64> {
    let e_abs = (2.0 / std::f64::consts::PI).sqrt();
    let mut sigma2 = match kind {
        VolKind::Arch1 => params.omega / (1.0 - params.alpha),
        VolKind::Garch11 => params.omega / (1.0 - params.alpha - params.beta),
        VolKind::Egarch11 => (params.omega / (1.0 - params.beta)).exp(),
        VolKind::RiskMetrics => 1e-4,
    };
    let mut out = Vec::with_capacity(n);
    for t in 0..n + burn {
        let z: f64 = rng.sample(StandardNormal);
        let eps = sigma2.sqrt() * z;
        if t >= burn {
            out.push(eps);
        }
        sigma2 = step(kind, params, e_abs, sigma2, eps);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: VolKind, params: VolParams, sigma2: f64, eps: f64) -> FittedVolModel {
        FittedVolModel {
            spec: VolModelSpec::new(kind, InnovationKind::Normal),
            params,
            dist: InnovationDist::Normal,
            lambda: (kind == VolKind::RiskMetrics).then_some(RISKMETRICS_LAMBDA),
            mean: 0.0,
            loglik: 0.0,
            state: FilteredState { sigma2, eps },
            evaluations: 0,
            n_obs: 0,
            curvature: None,
        }
    }

    #[test]
    fn riskmetrics_arithmetic() {
        let m = model(VolKind::RiskMetrics, VolParams::default(), 1e-4, 0.02);
        assert!((forecast_variance(&m) - 1.18e-4).abs() < 1e-18);
    }

    #[test]
    fn arch_arithmetic() {
        let p = VolParams {
            omega: 1e-5,
            alpha: 0.1,
            ..Default::default()
        };
        let m = model(VolKind::Arch1, p, 5e-4, 0.03);
        assert!((forecast_variance(&m) - 1.0e-4).abs() < 1e-18);
    }

    #[test]
    fn egarch_symmetric_without_leverage() {
        let p = VolParams {
            omega: -0.2,
            alpha: 0.1,
            beta: 0.97,
            gamma: 0.0,
        };
        let up = forecast_variance(&model(VolKind::Egarch11, p, 1e-4, 0.02));
        let down = forecast_variance(&model(VolKind::Egarch11, p, 1e-4, -0.02));
        assert_eq!(up, down);
    }

    #[test]
    fn egarch_leverage() {
        let p = VolParams {
            omega: -0.2,
            alpha: 0.1,
            beta: 0.97,
            gamma: -0.08,
        };
        let up = forecast_variance(&model(VolKind::Egarch11, p, 1e-4, 0.02));
        let down = forecast_variance(&model(VolKind::Egarch11, p, 1e-4, -0.02));
        assert!(down > up);
    }

    #[test]
    fn long_run_closed_form() {
        let p = |omega, alpha, beta| VolParams {
            omega,
            alpha,
            beta,
            gamma: 0.0,
        };
        let m = model(VolKind::Garch11, p(0.05, 0.10, 0.85), 1.0, 0.0);
        assert!((long_run_volatility(&m).unwrap() - 1.0).abs() < 1e-12);
        let m = model(VolKind::Garch11, p(2e-6, 0.08, 0.90), 1.0, 0.0);
        assert!((long_run_volatility(&m).unwrap() - 0.01).abs() < 1e-12);
        let m = model(VolKind::Garch11, p(1e-6, 0.099, 0.9), 1.0, 0.0);
        let v = long_run_volatility(&m).unwrap();
        assert!(v.is_finite() && v > 0.03);
        let m = model(VolKind::Arch1, p(1e-6, 0.1, 0.0), 1.0, 0.0);
        assert!(matches!(long_run_volatility(&m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn short_and_constant_windows_rejected() {
        let spec = VolModelSpec::new(VolKind::Garch11, InnovationKind::Normal);
        assert!(matches!(
            fit(spec, &[0.01; 100], &FitOptions::default()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit(spec, &[0.01; 500], &FitOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn encode_decode_inverse() {
        let spec = VolModelSpec::new(VolKind::Garch11, InnovationKind::SkewedT);
        let p = VolParams {
            omega: 3e-6,
            alpha: 0.07,
            beta: 0.91,
            gamma: 0.0,
        };
        let d = InnovationDist::SkewedT { nu: 7.0, xi: 0.9 };
        let theta = encode(spec, &p, &d, true);
        let (p2, d2) = decode(spec, &theta, InnovationDist::Normal, true);
        assert!((p2.omega - p.omega).abs() < 1e-15);
        assert!((p2.alpha - p.alpha).abs() < 1e-12);
        assert!((p2.beta - p.beta).abs() < 1e-12);
        match d2 {
            InnovationDist::SkewedT { nu, xi } => {
                assert!((nu - 7.0).abs() < 1e-9 && (xi - 0.9).abs() < 1e-12)
            }
            _ => panic!(),
        }
    }

    #[test]
    fn riskmetrics_normal_filters_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<f64> = (0..300).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let m = fit(
            VolModelSpec::new(VolKind::RiskMetrics, InnovationKind::Normal),
            &r,
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(m.lambda, Some(0.94));
        assert!(m.evaluations <= 1);
        let mut s2 = r.iter().map(|x| x * x).sum::<f64>() / 300.0;
        for x in &r[..299] {
            s2 = 0.94 * s2 + 0.06 * x * x;
        }
        assert!((m.state.sigma2 - s2).abs() < 1e-18);
    }
}
