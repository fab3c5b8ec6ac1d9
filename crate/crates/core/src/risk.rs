//! One-day VaR under each model family, horizon scaling, and the collated
//! stressed window.
//!
//! VaR figures are loss fractions: a positive number `v` means a loss of
//! `v` times the portfolio value at the stated confidence.

use std::cmp::Ordering;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::distributions::InnovationDist;
use crate::error::{Error, Result};
use crate::volatility::{forecast_variance, FittedVolModel};

/// Minimum window for the empirical and delta-normal estimators.
pub const MIN_VAR_WINDOW: usize = 100;

/// One dated 10-day 99% VaR or SVaR figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskForecast {
    pub date: NaiveDate,
    pub model_id: String,
    pub horizon_days: u32,
    pub confidence: f64,
    pub var_fraction: f64,
    pub stressed: bool,
}

/// A one-day VaR estimate, plus whether it came out non-positive (the
/// alpha-quantile of the window was a gain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarEstimate {
    pub loss: f64,
    pub non_positive: bool,
}

impl VarEstimate {
    fn new(loss: f64) -> Self {
        Self {
            loss,
            non_positive: loss <= 0.0,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Order-statistic rank `k = ⌈αN⌉`, clamped to `[1, N]`.
pub fn tail_rank(alpha: f64, n: usize) -> usize {
    // Guard against 0.01 * 100 landing a hair above 1.
    let k = (alpha * n as f64 - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

/// Historical simulation: minus the `⌈αN⌉`-th smallest return, without
/// interpolation.
pub fn hs_var(window: &[f64], alpha: f64) -> Result<VarEstimate> {
    check_alpha(alpha)?;
    if window.len() < MIN_VAR_WINDOW {
        return Err(Error::domain(format!(
            "historical simulation needs {MIN_VAR_WINDOW} returns, got {}",
            window.len()
        )));
    }
    let k = tail_rank(alpha, window.len());
    let mut scratch = window.to_vec();
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(VarEstimate::new(-*kth))
}

/// Delta-normal: `−z_α · s`, with `s` the zero-mean root second moment of the
/// window and `z_α` the normal quantile.
pub fn delta_normal_var(window: &[f64], alpha: f64) -> Result<VarEstimate> {
    check_alpha(alpha)?;
    if window.len() < MIN_VAR_WINDOW {
        return Err(Error::domain(format!(
            "delta-normal needs {MIN_VAR_WINDOW} returns, got {}",
            window.len()
        )));
    }
    let s = (window.iter().map(|r| r * r).sum::<f64>() / window.len() as f64).sqrt();
    if !(s > 0.0) {
        return Err(Error::domain("zero-variance window"));
    }
    let z = InnovationDist::Normal.quantile(alpha)?;
    Ok(VarEstimate::new(-z * s))
}

/// Conditional VaR from a fitted volatility model:
/// `−(μ + q_α σₜ₊₁)` with `q_α` the innovation quantile.
pub fn parametric_var(model: &FittedVolModel, alpha: f64) -> Result<VarEstimate> {
    check_alpha(alpha)?;
    let sigma2 = forecast_variance(model);
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Numerical(format!(
            "{} produced variance forecast {sigma2}",
            model.spec.tag()
        )));
    }
    let q = model.dist.quantile(alpha)?;
    Ok(VarEstimate::new(-(model.mean + q * sigma2.sqrt())))
}

/// Square-root-of-time scaling to an `h`-day horizon.
pub fn scale_to_horizon(var_1d: f64, h: u32) -> f64 {
    debug_assert!(h >= 1);
    var_1d * f64::from(h).sqrt()
}

/// One member of a collated stressed window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressedMember {
    pub date: NaiveDate,
    pub value: f64,
    /// `true` for the injected forecast return.
    pub forecast: bool,
}

/// The `length` worst returns of a history, re-ordered chronologically.
#[derive(Debug, Clone, PartialEq)]
pub struct StressedWindow {
    pub source_span: (NaiveDate, NaiveDate),
    pub members: Vec<StressedMember>,
}

impl StressedWindow {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.value).collect()
    }
}

/// Collates the `length` smallest returns of `history` (plus an optional
/// forecast return dated after the history) into a stressed window.
///
/// Ties are broken by earlier date first; the forecast return, being the
/// latest, loses ties and is placed last when selected.
pub fn stressed_window(
    history_dates: &[NaiveDate],
    history: &[f64],
    length: usize,
    extra: Option<(NaiveDate, f64)>,
) -> Result<StressedWindow> {
    debug_assert_eq!(history_dates.len(), history.len());
    let pool = history.len() + usize::from(extra.is_some());
    if length == 0 || pool < length {
        return Err(Error::domain(format!(
            "stressed pool of {pool} returns cannot supply {length} members"
        )));
    }
    let value_at = |i: usize| {
        if i < history.len() {
            history[i]
        } else {
            extra.expect("index past history implies a forecast").1
        }
    };
    // Pool positions are chronological, so comparing positions breaks ties by
    // date.
    let by_rank = |a: &usize, b: &usize| -> Ordering { value_at(*a).total_cmp(&value_at(*b)).then(a.cmp(b)) };
    let mut idx: Vec<usize> = (0..pool).collect();
    if length < pool {
        idx.select_nth_unstable_by(length - 1, by_rank);
        idx.truncate(length);
    }
    idx.sort_unstable();
    let members = idx
        .into_iter()
        .map(|i| {
            if i < history.len() {
                StressedMember {
                    date: history_dates[i],
                    value: history[i],
                    forecast: false,
                }
            } else {
                let (date, value) = extra.expect("forecast present");
                StressedMember {
                    date,
                    value,
                    forecast: true,
                }
            }
        })
        .collect();
    let first = history_dates
        .first()
        .copied()
        .or(extra.map(|e| e.0))
        .expect("non-empty pool");
    let last = extra
        .map(|e| e.0)
        .or(history_dates.last().copied())
        .expect("non-empty pool");
    Ok(StressedWindow {
        source_span: (first, last),
        members,
    })
}

/// Historical simulation over the most recent returns with one network
/// forecast return appended.
pub fn bn_var(historical: &[f64], forecast_return: f64, alpha: f64) -> Result<VarEstimate> {
    let mut pool = Vec::with_capacity(historical.len() + 1);
    pool.extend_from_slice(historical);
    pool.push(forecast_return);
    hs_var(&pool, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::InnovationKind;
    use crate::volatility::{FilteredState, VolKind, VolModelSpec, VolParams};

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        (0..n as u64).map(|i| start + chrono::Days::new(i)).collect()
    }

    #[test]
    fn rank_convention() {
        assert_eq!(tail_rank(0.01, 100), 1);
        assert_eq!(tail_rank(0.01, 1264), 13);
        assert_eq!(tail_rank(0.01, 1263), 13);
        assert_eq!(tail_rank(0.01, 1200), 12);
        assert_eq!(tail_rank(0.05, 250), 13);
    }

    #[test]
    fn hs_single_worst() {
        let mut w = vec![0.001; 100];
        w[40] = -0.05;
        let v = hs_var(&w, 0.01).unwrap();
        assert_eq!(v.loss, 0.05);
        assert!(!v.non_positive);
    }

    #[test]
    fn hs_all_positive_is_flagged() {
        let w: Vec<f64> = (1..=100).map(|i| i as f64 * 1e-4).collect();
        let v = hs_var(&w, 0.01).unwrap();
        assert_eq!(v.loss, -1e-4);
        assert!(v.non_positive);
    }

    #[test]
    fn hs_short_window() {
        assert!(hs_var(&[0.0; 99], 0.01).is_err());
        assert!(hs_var(&[0.0; 100], 0.0).is_err());
    }

    #[test]
    fn delta_normal_arithmetic() {
        // Alternating ±0.011 has zero-mean root second moment 0.011.
        let w: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.011 } else { -0.011 }).collect();
        let v = delta_normal_var(&w, 0.01).unwrap();
        assert!((v.loss - 0.025590).abs() < 1e-6);
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        assert_eq!(delta_normal_var(&w2, 0.01).unwrap().loss, 2.0 * v.loss);
        assert!(delta_normal_var(&[0.0; 100], 0.01).is_err());
    }

    #[test]
    fn horizon_scaling() {
        assert!((scale_to_horizon(0.03, 10) - 0.0948683).abs() < 1e-7);
        assert_eq!(scale_to_horizon(0.0123, 1), 0.0123);
        assert!((scale_to_horizon(0.025590, 10) - 0.080922).abs() < 1e-6);
    }

    fn normal_model(sigma2_next: f64) -> FittedVolModel {
        // RiskMetrics with eps = 0 forecasts 0.94 σ²; invert for the target.
        FittedVolModel::from_parts(
            VolModelSpec::new(VolKind::RiskMetrics, InnovationKind::Normal),
            VolParams::default(),
            InnovationDist::Normal,
            0.0,
            FilteredState {
                sigma2: sigma2_next / 0.94,
                eps: 0.0,
            },
        )
    }

    #[test]
    fn parametric_normal() {
        let v = parametric_var(&normal_model(1e-4), 0.01).unwrap();
        assert!((v.loss - 0.023263).abs() < 1e-6);
        let v5 = parametric_var(&normal_model(1e-4), 0.05).unwrap();
        assert!(v.loss > v5.loss);
        let v2 = parametric_var(&normal_model(4e-4), 0.01).unwrap();
        assert!((v2.loss - 2.0 * v.loss).abs() < 1e-15);
    }

    #[test]
    fn parametric_symmetric_skew_t() {
        let mut m = normal_model(1e-4);
        m.dist = InnovationDist::SkewedT { nu: 6.0, xi: 1.0 };
        let v = parametric_var(&m, 0.01).unwrap();
        let t = statrs::distribution::StudentsT::new(0.0, 1.0, 6.0).unwrap();
        use statrs::distribution::ContinuousCDF;
        let q = t.inverse_cdf(0.01) * (4.0f64 / 6.0).sqrt();
        assert!((v.loss + q * 0.01).abs() < 1e-10);
    }

    #[test]
    fn stressed_identity_case() {
        let d = dates(1264);
        let h: Vec<f64> = (0..1264).map(|i| ((i * 37) % 101) as f64 * 1e-4 - 0.005).collect();
        let w = stressed_window(&d, &h, 1264, None).unwrap();
        assert_eq!(w.values(), h);
        assert_eq!(w.source_span, (d[0], d[1263]));
    }

    #[test]
    fn stressed_forecast_displaces_boundary_member() {
        let d = dates(2000);
        let h: Vec<f64> = (0..2000).map(|i| -(i as f64) * 1e-5).collect();
        // The 1,264 worst are positions 736..2000; position 736 is the boundary.
        let base = stressed_window(&d, &h, 1264, None).unwrap();
        assert_eq!(base.members[0].date, d[736]);
        let extra_date = d[1999] + chrono::Days::new(1);
        let w = stressed_window(&d, &h, 1264, Some((extra_date, -1.0))).unwrap();
        assert_eq!(w.members[0].date, d[737]);
        let last = w.members.last().unwrap();
        assert!(last.forecast && last.value == -1.0);
    }

    #[test]
    fn stressed_ties_prefer_earlier() {
        let d = dates(5);
        let h = [-0.01, -0.02, -0.01, -0.01, 0.0];
        let w = stressed_window(&d, &h, 2, Some((d[4] + chrono::Days::new(1), -0.01))).unwrap();
        let picked: Vec<_> = w.members.iter().map(|m| m.date).collect();
        assert_eq!(picked, vec![d[0], d[1]]);
    }

    #[test]
    fn stressed_pool_too_small() {
        let d = dates(10);
        assert!(stressed_window(&d, &[0.0; 10], 12, Some((d[9], 0.0))).is_err());
        assert!(stressed_window(&d, &[0.0; 10], 11, Some((d[9] + chrono::Days::new(1), 0.0))).is_ok());
    }

    #[test]
    fn bn_var_forecast_is_minimum() {
        let h: Vec<f64> = (1..=1263).map(|i| i as f64 * 1e-5).collect();
        let v = bn_var(&h, 0.0, 0.01).unwrap();
        // 13th smallest of {0, 1e-5, ..., } is 12e-5.
        assert!((v.loss + 12e-5).abs() < 1e-15);
        let only = bn_var(&h[..99], -0.5, 0.01).unwrap();
        assert_eq!(only.loss, 0.5);
    }
}
