use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ModelKind, ModelVariant, PARALLELISM_ENV};
use crate::dbn::{fit_parameters, forecast_return, learn_structure, Algorithm, DbnStructure, TwoSliceDataset};
use crate::error::{Error, Result};
use crate::evaluation::{backtest, BacktestReport};
use crate::market_data::{align_to_target, log_returns, PanelManifest, PriceSeries, ReturnSeries, VariablePanel};
use crate::risk::{
    bn_var, delta_normal_var, hs_var, parametric_var, scale_to_horizon, stressed_window, RiskForecast, VarEstimate,
};
use crate::volatility::{fit_from, FitOptions, FittedVolModel, VolModelSpec};

/// Market data a run draws on.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub prices: PriceSeries,
    pub returns: ReturnSeries,
    /// Aligned to the target's trading days; required by network models.
    pub panel: Option<VariablePanel>,
}

impl ExperimentData {
    /// Loads the target, and the panel when the config has network models.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let manifest = PanelManifest::load(&config.manifest)?;
        let prices = manifest.load_target()?;
        let panel = match &config.dbn {
            Some(dbn) if !dbn.algorithms.is_empty() => {
                let mut series = manifest.load_series()?;
                if let Some(keep) = &dbn.variables {
                    for id in keep {
                        if !series.iter().any(|s| s.id() == id) {
                            return Err(Error::Config(format!("network variable {id:?} is not in the manifest")));
                        }
                    }
                    series.retain(|s| s.id() == manifest.target || keep.contains(&s.id().to_string()));
                }
                Some(align_to_target(&series, &manifest.target)?)
            }
            _ => None,
        };
        Self::new(prices, panel)
    }

    pub fn new(prices: PriceSeries, panel: Option<VariablePanel>) -> Result<Self> {
        let returns = log_returns(&prices)?;
        if let Some(p) = &panel {
            if p.dates() != prices.dates() {
                return Err(Error::Input("panel grid differs from the target's trading days".into()));
            }
        }
        Ok(Self { prices, returns, panel })
    }
}

/// A date on which a model failed or produced a degenerate figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    pub date: NaiveDate,
    pub model_id: String,
    pub stressed: bool,
    pub message: String,
}

/// One forecast series with its backtest.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub variant: ModelVariant,
    pub forecasts: Vec<RiskForecast>,
    pub report: BacktestReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub date: NaiveDate,
    pub predicted_close: f64,
    pub forecast_return: f64,
}

/// Per-date network forecasts for one learner.
#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub algorithm: Algorithm,
    /// Successful forecasts only; failures appear among the flags.
    pub trace: Vec<TraceRow>,
    /// Structure in force on the last forecast date.
    pub final_structure: Option<DbnStructure>,
    pub structures_learned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    /// SHA-256 of the canonical config, ignoring thread count and output
    /// location.
    pub config_hash: String,
    pub data_span: (NaiveDate, NaiveDate),
    pub out_of_sample: (NaiveDate, NaiveDate),
    pub n_dates: usize,
    /// First return date feeding the stressed pool.
    pub staging_start: NaiveDate,
    pub threads: usize,
    pub wall_clock_secs: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub metadata: RunMetadata,
    pub runs: Vec<ModelRun>,
    pub networks: Vec<NetworkRun>,
    pub flags: Vec<Flag>,
    /// Realized returns over the out-of-sample span.
    pub returns: ReturnSeries,
}

impl ReportBundle {
    pub fn run(&self, model_id: &str, stressed: bool) -> Option<&ModelRun> {
        self.runs
            .iter()
            .find(|r| r.variant.model_id() == model_id && r.variant.stressed == stressed)
    }

    pub fn has_flags(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Hash of the settings that determine the forecasts.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut canonical = config.clone();
    canonical.parallelism = None;
    canonical.output_dir = None;
    let digest = Sha256::digest(canonical.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Thread count from the config, else the environment, else the machine.
pub fn resolve_parallelism(config: &ExperimentConfig) -> usize {
    config
        .parallelism
        .or_else(|| {
            std::env::var(PARALLELISM_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .filter(|n: &usize| *n > 0)
        })
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Loads the configured data and runs every model.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    config.validate()?;
    let data = ExperimentData::load(config)?;
    run_on(config, &data)
}

/// Out-of-sample return indices, after checking the history behind them.
struct Staging {
    dates: std::ops::Range<usize>,
    pool_start: usize,
}

fn stage(config: &ExperimentConfig, data: &ExperimentData) -> Result<Staging> {
    let dates = data.returns.dates();
    let first = dates.partition_point(|d| *d < config.start);
    let last = dates.partition_point(|d| *d <= config.end);
    let Some(&data_end) = dates.last() else {
        return Err(Error::Staging("no returns in the data".into()));
    };
    if config.end > data_end {
        return Err(Error::Staging(format!(
            "returns end on {data_end}; cannot forecast through {}",
            config.end
        )));
    }
    if first >= last {
        return Err(Error::Staging(format!(
            "no trading days between {} and {}",
            config.start, config.end
        )));
    }
    // One window of history for the first rolling calibration and another
    // ahead of it, so the stressed pool starts twice as deep.
    let needed = 2 * config.window_length;
    if first < needed {
        let uncovered = dates[first];
        return Err(Error::Staging(format!(
            "{uncovered} is the first date without {needed} prior returns ({first} available)"
        )));
    }
    Ok(Staging {
        dates: first..last,
        pool_start: first - needed,
    })
}

type Outcome = std::result::Result<VarEstimate, String>;

/// Runs every configured model over the out-of-sample span of `data`.
pub fn run_on(config: &ExperimentConfig, data: &ExperimentData) -> Result<ReportBundle> {
    config.validate()?;
    let clock = Instant::now();
    let staging = stage(config, data)?;
    let variants = config.variants();
    if variants.is_empty() {
        log::warn!("the model grid is empty; only metadata will be produced");
    }
    let algorithms: Vec<Algorithm> = config.dbn.as_ref().map(|d| d.algorithms.clone()).unwrap_or_default();
    if !algorithms.is_empty() && data.panel.is_none() {
        return Err(Error::Input("network models need a variable panel".into()));
    }

    let threads = resolve_parallelism(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let n = staging.dates.len();
    let chunks: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(config.chunk_len)
        .map(|s| staging.dates.start + s..staging.dates.start + (s + config.chunk_len).min(n))
        .collect();
    let refresh = config.dbn.as_ref().map_or(1, |d| d.structure_refresh);
    let blocks: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(refresh)
        .map(|s| staging.dates.start + s..staging.dates.start + (s + refresh).min(n))
        .collect();

    enum Task {
        Model(ModelVariant, std::ops::Range<usize>),
        Network(Algorithm, std::ops::Range<usize>),
    }
    enum Done {
        Model(Vec<Outcome>),
        Network(NetworkBlock),
    }
    let mut tasks = Vec::new();
    for v in variants.iter().filter(|v| !matches!(v.kind, ModelKind::Network(_))) {
        for c in &chunks {
            tasks.push(Task::Model(*v, c.clone()));
        }
    }
    for a in &algorithms {
        for b in &blocks {
            tasks.push(Task::Network(*a, b.clone()));
        }
    }
    let ctx = Ctx {
        config,
        data,
        pool_start: staging.pool_start,
    };
    let done: Vec<Done> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| match t {
                Task::Model(v, range) => Done::Model(ctx.model_chunk(*v, range.clone())),
                Task::Network(a, range) => Done::Network(ctx.network_block(*a, range.clone())),
            })
            .collect()
    });

    // Gather per-variant outcomes in date order.
    let mut outcomes: Vec<(ModelVariant, Vec<Outcome>)> = Vec::new();
    let mut network_blocks: Vec<(Algorithm, Vec<NetworkBlock>)> = algorithms.iter().map(|a| (*a, Vec::new())).collect();
    for (task, result) in tasks.iter().zip(done) {
        match (task, result) {
            (Task::Model(v, _), Done::Model(o)) => match outcomes.iter_mut().find(|(w, _)| w == v) {
                Some((_, all)) => all.extend(o),
                None => outcomes.push((*v, o)),
            },
            (Task::Network(a, _), Done::Network(b)) => {
                network_blocks
                    .iter_mut()
                    .find(|(x, _)| x == a)
                    .expect("listed above")
                    .1
                    .push(b);
            }
            _ => unreachable!("results follow task order"),
        }
    }

    let oos_dates = &data.returns.dates()[staging.dates.clone()];
    let mut flags = Vec::new();
    let mut networks = Vec::new();
    for (algo, blocks) in network_blocks {
        let mut forecasts: Vec<std::result::Result<f64, String>> = Vec::with_capacity(n);
        let mut trace = Vec::new();
        let mut final_structure = None;
        let mut learned = 0;
        for b in blocks {
            learned += b.structures_learned;
            if b.structure.is_some() {
                final_structure = b.structure;
            }
            for r in b.forecasts {
                forecasts.push(r.map(|row| {
                    let ret = row.forecast_return;
                    trace.push(row);
                    ret
                }));
            }
        }
        for stressed in [false, true] {
            let variant = ModelVariant {
                kind: ModelKind::Network(algo),
                stressed,
            };
            if !variants.contains(&variant) {
                continue;
            }
            let o = staging
                .dates
                .clone()
                .zip(&forecasts)
                .map(|(i, f)| match f {
                    Ok(ret) => ctx.network_var(i, *ret, stressed).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                })
                .collect();
            outcomes.push((variant, o));
        }
        networks.push(NetworkRun {
            algorithm: algo,
            trace,
            final_structure,
            structures_learned: learned,
        });
    }
    outcomes.sort_by_key(|(v, _)| variants.iter().position(|w| w == v));

    let oos_returns = data.returns.slice(staging.dates.clone());
    let mut runs = Vec::new();
    for (variant, o) in outcomes {
        let forecasts = carry_forward(config, variant, oos_dates, o, &mut flags)?;
        let report = backtest(&forecasts, &oos_returns, config.alpha(), config.mape_denominator)?;
        runs.push(ModelRun {
            variant,
            forecasts,
            report,
        });
    }

    let metadata = RunMetadata {
        config_hash: config_hash(config),
        data_span: (
            data.prices.dates()[0],
            *data.prices.dates().last().expect("returns exist"),
        ),
        out_of_sample: (oos_dates[0], *oos_dates.last().expect("non-empty")),
        n_dates: n,
        staging_start: data.returns.dates()[staging.pool_start],
        threads,
        wall_clock_secs: clock.elapsed().as_secs_f64(),
    };
    Ok(ReportBundle {
        config: config.clone(),
        metadata,
        runs,
        networks,
        flags,
        returns: oos_returns,
    })
}

/// Turns per-date outcomes into forecasts, repeating the previous figure on
/// failed dates and flagging both failures and non-positive figures.
fn carry_forward(
    config: &ExperimentConfig,
    variant: ModelVariant,
    dates: &[NaiveDate],
    outcomes: Vec<Outcome>,
    flags: &mut Vec<Flag>,
) -> Result<Vec<RiskForecast>> {
    let model_id = variant.model_id();
    let mut out: Vec<RiskForecast> = Vec::with_capacity(outcomes.len());
    for (date, o) in dates.iter().zip(outcomes) {
        let mut flag = |message: String| {
            flags.push(Flag {
                date: *date,
                model_id: model_id.clone(),
                stressed: variant.stressed,
                message,
            })
        };
        let var_fraction = match o {
            Ok(v) => {
                if v.non_positive {
                    flag(format!("non-positive one-day VaR {}", v.loss));
                }
                scale_to_horizon(v.loss, config.horizon)
            }
            Err(message) => match out.last() {
                Some(prev) => {
                    flag(format!("carried forward: {message}"));
                    prev.var_fraction
                }
                None => {
                    return Err(Error::Input(format!(
                        "{variant} failed on its first date {date} with nothing to carry forward: {message}"
                    )));
                }
            },
        };
        out.push(RiskForecast {
            date: *date,
            model_id: model_id.clone(),
            horizon_days: config.horizon,
            confidence: config.confidence,
            var_fraction,
            stressed: variant.stressed,
        });
    }
    Ok(out)
}

struct NetworkBlock {
    forecasts: Vec<std::result::Result<TraceRow, String>>,
    structure: Option<DbnStructure>,
    structures_learned: usize,
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    data: &'a ExperimentData,
    pool_start: usize,
}

impl Ctx<'_> {
    fn window(&self, i: usize) -> &[f64] {
        &self.data.returns.values()[i - self.config.window_length..i]
    }

    fn stressed_values(&self, i: usize, extra: Option<(NaiveDate, f64)>) -> Result<Vec<f64>> {
        let r = &self.data.returns;
        let w = stressed_window(
            &r.dates()[self.pool_start..i],
            &r.values()[self.pool_start..i],
            self.config.window_length,
            extra,
        )?;
        Ok(w.values())
    }

    fn fit_options(&self, i: usize) -> FitOptions {
        FitOptions {
            seed: self.config.seed.wrapping_add(i as u64),
            ..FitOptions::default()
        }
    }

    /// One warm-started pass over a chunk of dates for a traditional model.
    fn model_chunk(&self, variant: ModelVariant, range: std::ops::Range<usize>) -> Vec<Outcome> {
        let alpha = self.config.alpha();
        let mut warm: Option<FittedVolModel> = None;
        range
            .map(|i| {
                let sample = if variant.stressed {
                    self.stressed_values(i, None)
                } else {
                    Ok(self.window(i).to_vec())
                };
                let sample = sample.map_err(|e| e.to_string())?;
                let estimate = match variant.kind {
                    ModelKind::Historical => hs_var(&sample, alpha),
                    ModelKind::DeltaNormal => delta_normal_var(&sample, alpha),
                    ModelKind::Parametric(spec) => self.parametric(spec, &sample, i, &mut warm),
                    ModelKind::Network(_) => unreachable!("networks run separately"),
                };
                estimate.map_err(|e| e.to_string())
            })
            .collect()
    }

    fn parametric(
        &self,
        spec: VolModelSpec,
        sample: &[f64],
        i: usize,
        warm: &mut Option<FittedVolModel>,
    ) -> Result<VarEstimate> {
        let fitted = fit_from(spec, sample, &self.fit_options(i), warm.as_ref())?;
        let v = parametric_var(&fitted, self.config.alpha());
        *warm = Some(fitted);
        v
    }

    fn network_var(&self, i: usize, forecast: f64, stressed: bool) -> Result<VarEstimate> {
        let alpha = self.config.alpha();
        if stressed {
            let date = self.data.returns.dates()[i];
            hs_var(&self.stressed_values(i, Some((date, forecast)))?, alpha)
        } else {
            let w = self.config.window_length;
            bn_var(&self.data.returns.values()[i + 1 - w..i], forecast, alpha)
        }
    }

    /// Network forecasts over a block that shares one learned structure.
    fn network_block(&self, algo: Algorithm, range: std::ops::Range<usize>) -> NetworkBlock {
        let dbn = self.config.dbn.as_ref().expect("networks configured");
        let panel = self.data.panel.as_ref().expect("checked before the run");
        let w = self.config.window_length;
        let mut structure: Option<DbnStructure> = None;
        let mut learned = 0;
        let mut forecasts = Vec::with_capacity(range.len());
        for i in range {
            // Return i ends on panel row i + 1; train on the `w` rows before.
            let p = i + 1;
            let row = (|| -> Result<TraceRow> {
                let ds = TwoSliceDataset::from_rows(panel, p - w..p)?;
                let s = match structure.take() {
                    Some(s) => s,
                    None => {
                        learned += 1;
                        learn_structure(&ds, algo, &dbn.learner())?
                    }
                };
                let fitted = fit_parameters(&s, &ds);
                structure = Some(s);
                let predicted_close = fitted?.forecast_one_step(&panel.row(p - 1))?;
                let last_close = self.data.prices.values()[p - 1];
                Ok(TraceRow {
                    date: self.data.returns.dates()[i],
                    predicted_close,
                    forecast_return: forecast_return(predicted_close, last_close)?,
                })
            })();
            forecasts.push(row.map_err(|e| e.to_string()));
        }
        NetworkBlock {
            forecasts,
            structure,
            structures_learned: learned,
        }
    }
}
