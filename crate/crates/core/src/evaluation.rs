//! Breach counting, regulatory backtests, and forecast-error measures.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::risk::RiskForecast;

/// Significance used for the Kupiec and Christoffersen tests.
pub const BACKTEST_SIGNIFICANCE: f64 = 0.01;

/// Basel zone boundaries on the binomial CDF of the breach count.
pub const YELLOW_CDF: f64 = 0.95;
pub const RED_CDF: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BreachSeries {
    pub dates: Vec<NaiveDate>,
    pub indicators: Vec<bool>,
}

impl BreachSeries {
    pub fn n_days(&self) -> usize {
        self.indicators.len()
    }

    pub fn n_breaches(&self) -> usize {
        self.indicators.iter().filter(|b| **b).count()
    }

    pub fn breach_dates(&self) -> Vec<NaiveDate> {
        self.dates
            .iter()
            .zip(&self.indicators)
            .filter_map(|(d, b)| b.then_some(*d))
            .collect()
    }
}

/// Realized return on each forecast date.
fn aligned_returns(forecasts: &[RiskForecast], returns: &ReturnSeries) -> Result<Vec<f64>> {
    forecasts
        .iter()
        .map(|f| {
            returns
                .position(f.date)
                .map(|i| returns.values()[i])
                .ok_or_else(|| Error::Input(format!("no return on forecast date {}", f.date)))
        })
        .collect()
}

/// A breach is a day whose loss `−rₜ` exceeds the forecast loss fraction.
pub fn count_breaches(forecasts: &[RiskForecast], returns: &ReturnSeries) -> Result<BreachSeries> {
    for pair in forecasts.windows(2) {
        if pair[1].date <= pair[0].date {
            return Err(Error::Input(format!(
                "forecast dates not increasing at {}",
                pair[1].date
            )));
        }
    }
    let realized = aligned_returns(forecasts, returns)?;
    Ok(BreachSeries {
        dates: forecasts.iter().map(|f| f.date).collect(),
        indicators: forecasts
            .iter()
            .zip(&realized)
            .map(|(f, r)| -r > f.var_fraction)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Green,
    Yellow,
    Red,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Zone::Green => "green",
            Zone::Yellow => "yellow",
            Zone::Red => "red",
        })
    }
}

/// Basel traffic light generalized to any sample size through the binomial
/// CDF thresholds 0.95 and 0.9999.
pub fn traffic_light(breaches: usize, n: usize, p: f64) -> Zone {
    if breaches == 0 || n == 0 {
        return Zone::Green;
    }
    let cdf = Binomial::new(p, n as u64).expect("valid binomial").cdf(breaches as u64);
    if cdf < YELLOW_CDF {
        Zone::Green
    } else if cdf < RED_CDF {
        Zone::Yellow
    } else {
        Zone::Red
    }
}

fn chi2_1() -> ChiSquared {
    ChiSquared::new(1.0).expect("one degree of freedom")
}

/// Critical value of the chi-square(1) distribution at significance `sig`.
pub fn chi2_1_critical(sig: f64) -> f64 {
    chi2_1().inverse_cdf(1.0 - sig)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

impl LrTest {
    fn from_statistic(statistic: f64, sig: f64) -> Self {
        let statistic = statistic.max(0.0);
        Self {
            statistic,
            p_value: 1.0 - chi2_1().cdf(statistic),
            reject: statistic > chi2_1_critical(sig),
        }
    }
}

/// `x ln y` with the `0 ln 0 = 0` convention.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Kupiec proportion-of-failures likelihood-ratio test.
pub fn kupiec_pof(breaches: usize, n: usize, p: f64, sig: f64) -> LrTest {
    let x = breaches as f64;
    let nf = n as f64;
    let phat = if n == 0 { 0.0 } else { x / nf };
    let null = xlny(nf - x, 1.0 - p) + xlny(x, p);
    let alt = xlny(nf - x, 1.0 - phat) + xlny(x, phat);
    LrTest::from_statistic(-2.0 * (null - alt), sig)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTest {
    pub test: LrTest,
    /// Transition counts `[n00, n01, n10, n11]`.
    pub transitions: [usize; 4],
    /// `false` when there are no breaches (or no transitions out of a breach
    /// day) and the statistic cannot be formed; the test then does not
    /// reject.
    pub defined: bool,
}

/// Christoffersen first-order Markov independence test.
pub fn christoffersen_independence(breaches: &BreachSeries, sig: f64) -> IndependenceTest {
    let mut t = [0usize; 4];
    for w in breaches.indicators.windows(2) {
        t[usize::from(w[0]) * 2 + usize::from(w[1])] += 1;
    }
    let [n00, n01, n10, n11] = t.map(|c| c as f64);
    let defined = n00 + n01 > 0.0 && n10 + n11 > 0.0 && n01 + n11 > 0.0;
    if !defined {
        return IndependenceTest {
            test: LrTest {
                statistic: 0.0,
                p_value: 1.0,
                reject: false,
            },
            transitions: t,
            defined: false,
        };
    }
    let pi0 = n01 / (n00 + n01);
    let pi1 = n11 / (n10 + n11);
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let restricted = xlny(n00 + n10, 1.0 - pi) + xlny(n01 + n11, pi);
    let unrestricted = xlny(n00, 1.0 - pi0) + xlny(n01, pi0) + xlny(n10, 1.0 - pi1) + xlny(n11, pi1);
    IndependenceTest {
        test: LrTest::from_statistic(-2.0 * (restricted - unrestricted), sig),
        transitions: t,
        defined: true,
    }
}

/// Which magnitude divides the absolute error in MAPE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapeDenominator {
    /// `|qₜ|`, the forecast threshold. Keeps the measure finite on days with
    /// near-zero returns.
    #[default]
    Forecast,
    /// `|rₜ|`, the realized return.
    Actual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMeasures {
    pub mae: f64,
    pub rmse: f64,
    /// Percent; `None` when some denominator is zero.
    pub mape: Option<f64>,
    /// Percent.
    pub smape: f64,
}

impl ErrorMeasures {
    /// MAPE, or SMAPE where MAPE is undefined.
    pub fn mape_or_smape(&self) -> f64 {
        self.mape.unwrap_or(self.smape)
    }
}

/// Error measures between the forecast return threshold `qₜ = −VaRₜ` and the
/// realized return `rₜ`.
pub fn error_measures_from(
    var_fractions: &[f64],
    realized: &[f64],
    denominator: MapeDenominator,
) -> Result<ErrorMeasures> {
    if var_fractions.len() != realized.len() {
        return Err(Error::Input(format!(
            "{} forecasts but {} returns",
            var_fractions.len(),
            realized.len()
        )));
    }
    if var_fractions.is_empty() {
        return Err(Error::Input("no forecasts to evaluate".into()));
    }
    let n = var_fractions.len() as f64;
    let (mut abs, mut sq, mut pct, mut spct) = (0.0, 0.0, 0.0, 0.0);
    let mut mape_defined = true;
    for (v, r) in var_fractions.iter().zip(realized) {
        let q = -v;
        let e = r - q;
        abs += e.abs();
        sq += e * e;
        let denom = match denominator {
            MapeDenominator::Forecast => q.abs(),
            MapeDenominator::Actual => r.abs(),
        };
        if denom == 0.0 {
            mape_defined = false;
        } else {
            pct += e.abs() / denom;
        }
        let sdenom = r.abs() + q.abs();
        if sdenom > 0.0 {
            spct += 2.0 * e.abs() / sdenom;
        }
    }
    Ok(ErrorMeasures {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape: mape_defined.then_some(100.0 * pct / n),
        smape: 100.0 * spct / n,
    })
}

pub fn error_measures(
    forecasts: &[RiskForecast],
    returns: &ReturnSeries,
    denominator: MapeDenominator,
) -> Result<ErrorMeasures> {
    let realized = aligned_returns(forecasts, returns)?;
    let v: Vec<f64> = forecasts.iter().map(|f| f.var_fraction).collect();
    error_measures_from(&v, &realized, denominator)
}

/// All backtests and error measures for one model's forecast series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub model_id: String,
    pub stressed: bool,
    pub n_days: usize,
    pub n_breaches: usize,
    pub breach_dates: Vec<NaiveDate>,
    pub zone: Zone,
    pub kupiec: LrTest,
    pub christoffersen: IndependenceTest,
    pub errors: ErrorMeasures,
}

pub fn backtest(
    forecasts: &[RiskForecast],
    returns: &ReturnSeries,
    alpha: f64,
    denominator: MapeDenominator,
) -> Result<BacktestReport> {
    let first = forecasts
        .first()
        .ok_or_else(|| Error::Input("empty forecast series".into()))?;
    let breaches = count_breaches(forecasts, returns)?;
    let n = breaches.n_days();
    let x = breaches.n_breaches();
    Ok(BacktestReport {
        model_id: first.model_id.clone(),
        stressed: first.stressed,
        n_days: n,
        n_breaches: x,
        breach_dates: breaches.breach_dates(),
        zone: traffic_light(x, n, alpha),
        kupiec: kupiec_pof(x, n, alpha, BACKTEST_SIGNIFICANCE),
        christoffersen: christoffersen_independence(&breaches, BACKTEST_SIGNIFICANCE),
        errors: error_measures(forecasts, returns, denominator)?,
    })
}
