use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dbn::{Algorithm, LearnerSettings};
use crate::distributions::InnovationKind;
use crate::error::{Error, Result};
use crate::evaluation::MapeDenominator;
use crate::volatility::{VolKind, VolModelSpec};

/// Environment variable read when the config leaves `parallelism` unset.
pub const PARALLELISM_ENV: &str = "VARCAST_THREADS";

/// How a variant produces its one-day VaR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Historical,
    DeltaNormal,
    Parametric(VolModelSpec),
    Network(Algorithm),
}

impl ModelKind {
    pub fn id(&self) -> String {
        match self {
            ModelKind::Historical => "hs".into(),
            ModelKind::DeltaNormal => "delta-normal".into(),
            ModelKind::Parametric(spec) => spec.tag(),
            ModelKind::Network(a) => format!("bn-{}", a.tag()),
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "hs" => return Ok(ModelKind::Historical),
            "delta-normal" => return Ok(ModelKind::DeltaNormal),
            _ => {}
        }
        if let Some(algo) = id.strip_prefix("bn-") {
            return Algorithm::parse(algo).map(ModelKind::Network);
        }
        let (kind, innov) = id
            .rsplit_once('-')
            .ok_or_else(|| Error::Config(format!("unknown model id {id:?}")))?;
        let kind = VolKind::parse(kind)?;
        let innov = match innov {
            "normal" => InnovationKind::Normal,
            "skewt" => InnovationKind::SkewedT,
            _ => return Err(Error::Config(format!("unknown innovation in {id:?}"))),
        };
        Ok(ModelKind::Parametric(VolModelSpec::new(kind, innov)))
    }
}

/// One forecast series: a model, either on its rolling window or on the
/// stressed window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelVariant {
    pub kind: ModelKind,
    pub stressed: bool,
}

impl ModelVariant {
    pub fn model_id(&self) -> String {
        self.kind.id()
    }

    /// Stem of the variant's forecast file.
    pub fn file_stem(&self) -> String {
        if self.stressed {
            format!("{}-svar", self.kind.id())
        } else {
            self.kind.id()
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file_stem())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Hs,
    DeltaNormal,
    Arch1,
    Garch11,
    Egarch11,
    Riskmetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Stressed,
}

/// Traditional models to run: families × innovations × variants. The
/// empirical families ignore the innovation list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelGrid {
    #[serde(default)]
    pub families: Vec<Family>,
    #[serde(default = "default_innovations")]
    pub innovations: Vec<InnovationKind>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
}

fn default_innovations() -> Vec<InnovationKind> {
    vec![InnovationKind::Normal, InnovationKind::SkewedT]
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Standard, Variant::Stressed]
}

impl Default for ModelGrid {
    fn default() -> Self {
        Self {
            families: vec![
                Family::Hs,
                Family::DeltaNormal,
                Family::Arch1,
                Family::Garch11,
                Family::Egarch11,
                Family::Riskmetrics,
            ],
            innovations: default_innovations(),
            variants: default_variants(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbnConfig {
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_significance")]
    pub significance: f64,
    #[serde(default = "default_cap")]
    pub max_conditioning: usize,
    /// Relearn the structure every this many forecast dates; parameters are
    /// refit daily regardless.
    #[serde(default = "one")]
    pub structure_refresh: usize,
    /// Number of lagged slices. Only 1 is supported.
    #[serde(default = "one")]
    pub markov_order: usize,
    /// Panel variables to use; all of them when absent.
    #[serde(default)]
    pub variables: Option<Vec<String>>,
}

fn default_significance() -> f64 {
    0.05
}

fn default_cap() -> usize {
    3
}

fn one() -> usize {
    1
}

impl DbnConfig {
    pub fn learner(&self) -> LearnerSettings {
        LearnerSettings {
            significance: self.significance,
            max_conditioning: self.max_conditioning,
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Panel manifest; relative paths resolve against the config file.
    pub manifest: PathBuf,
    /// First and last out-of-sample forecast dates, inclusive.
    pub start: NaiveDate,
    pub end: NaiveDate,
    #[serde(default = "default_window")]
    pub window_length: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; falls back to `VARCAST_THREADS`, then to the core count.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Dates per warm-started work unit. Fixed so output does not depend on
    /// the thread count.
    #[serde(default = "default_chunk")]
    pub chunk_len: usize,
    #[serde(default)]
    pub mape_denominator: MapeDenominator,
    #[serde(default)]
    pub models: ModelGrid,
    #[serde(default)]
    pub dbn: Option<DbnConfig>,
}

fn default_window() -> usize {
    1264
}

fn default_horizon() -> u32 {
    10
}

fn default_confidence() -> f64 {
    0.99
}

fn default_chunk() -> usize {
    64
}

impl ExperimentConfig {
    /// A config with every default and no models.
    pub fn new(manifest: impl Into<PathBuf>, start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            manifest: manifest.into(),
            start,
            end,
            window_length: default_window(),
            horizon: default_horizon(),
            confidence: default_confidence(),
            seed: 0,
            parallelism: None,
            output_dir: None,
            chunk_len: default_chunk(),
            mape_denominator: MapeDenominator::default(),
            models: ModelGrid {
                families: Vec::new(),
                innovations: default_innovations(),
                variants: default_variants(),
            },
            dbn: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.manifest.is_relative() {
            config.manifest = base.join(&config.manifest);
        }
        if let Some(out) = config.output_dir.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window_length < 250 {
            return bad(format!("window_length {} is below 250", self.window_length));
        }
        if !(self.confidence > 0.9 && self.confidence < 0.9999) {
            return bad(format!("confidence {} outside (0.9, 0.9999)", self.confidence));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least one day".into());
        }
        if self.end < self.start {
            return bad(format!("end {} precedes start {}", self.end, self.start));
        }
        if self.chunk_len == 0 {
            return bad("chunk_len must be positive".into());
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be positive".into());
        }
        if let Some(dbn) = &self.dbn {
            if dbn.structure_refresh == 0 {
                return bad("structure_refresh must be at least 1".into());
            }
            if dbn.markov_order != 1 {
                return bad(format!(
                    "markov_order {} unsupported; only two-slice networks are implemented",
                    dbn.markov_order
                ));
            }
            if !(dbn.significance > 0.0 && dbn.significance < 1.0) {
                return bad(format!("significance {} outside (0, 1)", dbn.significance));
            }
        }
        Ok(())
    }

    /// Tail probability `1 − confidence`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.confidence
    }

    /// Every configured variant in report order: empirical models, then the
    /// volatility models by family and innovation, then networks; standard
    /// before stressed within each model.
    pub fn variants(&self) -> Vec<ModelVariant> {
        let mut kinds = Vec::new();
        for f in &self.models.families {
            match f {
                Family::Hs => kinds.push(ModelKind::Historical),
                Family::DeltaNormal => kinds.push(ModelKind::DeltaNormal),
                Family::Arch1 | Family::Garch11 | Family::Egarch11 | Family::Riskmetrics => {
                    let vk = match f {
                        Family::Arch1 => VolKind::Arch1,
                        Family::Garch11 => VolKind::Garch11,
                        Family::Egarch11 => VolKind::Egarch11,
                        _ => VolKind::RiskMetrics,
                    };
                    for &i in &self.models.innovations {
                        kinds.push(ModelKind::Parametric(VolModelSpec::new(vk, i)));
                    }
                }
            }
        }
        if let Some(dbn) = &self.dbn {
            kinds.extend(dbn.algorithms.iter().map(|a| ModelKind::Network(*a)));
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for kind in kinds {
            for v in [Variant::Standard, Variant::Stressed] {
                if !self.models.variants.contains(&v) {
                    continue;
                }
                let variant = ModelVariant {
                    kind,
                    stressed: v == Variant::Stressed,
                };
                if seen.insert(variant) {
                    out.push(variant);
                }
            }
        }
        out
    }
}
