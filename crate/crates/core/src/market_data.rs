//! Price and indicator series, log returns, and the daily-aligned variable panel.
//!
//! Every series is stored column-wise (dates next to values) with strictly
//! increasing calendar dates. Returns are natural-log decimals throughout.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Level,
    Rate,
}

/// Publication frequency of a raw series. Informational only: every series is
/// forward filled onto the trading grid regardless of its tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    #[default]
    Daily,
    Weekly,
    Monthly,
    Quarterly,
}

fn check_dates(id: &str, dates: &[NaiveDate]) -> Result<()> {
    for pair in dates.windows(2) {
        if pair[1] <= pair[0] {
            let message = if pair[1] == pair[0] {
                format!("duplicate date {}", pair[0])
            } else {
                format!("dates out of order: {} then {}", pair[0], pair[1])
            };
            return Err(Error::Integrity {
                series: id.to_string(),
                message,
            });
        }
    }
    Ok(())
}

fn check_finite(id: &str, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Integrity {
            series: id.to_string(),
            message: format!("non-finite value on {}", dates[i]),
        }),
        None => Ok(()),
    }
}

/// A dated sequence of closes or indicator readings.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    id: String,
    units: Units,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl PriceSeries {
    pub fn new(id: impl Into<String>, units: Units, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(Error::Integrity {
                series: id,
                message: format!("{} dates but {} values", dates.len(), values.len()),
            });
        }
        check_dates(&id, &dates)?;
        check_finite(&id, &dates, &values)?;
        Ok(Self {
            id,
            units,
            dates,
            values,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the last observation dated on or before `date`.
    pub fn index_on_or_before(&self, date: NaiveDate) -> Option<usize> {
        self.dates.partition_point(|d| *d <= date).checked_sub(1)
    }
}

/// Dated log returns `ln(P_t / P_{t-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    id: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(id: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(Error::Integrity {
                series: id,
                message: format!("{} dates but {} values", dates.len(), values.len()),
            });
        }
        check_dates(&id, &dates)?;
        check_finite(&id, &dates, &values)?;
        Ok(Self { id, dates, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Sub-series over `range` of positions.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ReturnSeries {
        ReturnSeries {
            id: self.id.clone(),
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }

    /// Moments and extremes of the returns. `None` for fewer than two.
    pub fn summary(&self) -> Option<SampleStats> {
        SampleStats::of(&self.values)
    }

    /// Rebuilds the price path by cumulative exponentiation from a base close
    /// dated just before the first return.
    pub fn to_prices(&self, base_date: NaiveDate, base_close: f64) -> Result<PriceSeries> {
        let mut dates = Vec::with_capacity(self.len() + 1);
        let mut values = Vec::with_capacity(self.len() + 1);
        dates.push(base_date);
        values.push(base_close);
        let mut level = base_close;
        for (d, r) in self.dates.iter().zip(&self.values) {
            level *= r.exp();
            dates.push(*d);
            values.push(level);
        }
        PriceSeries::new(self.id.clone(), Units::Level, dates, values)
    }
}

/// Descriptive statistics of a return sample.
///
/// `sd` uses the `n − 1` divisor; skewness and kurtosis are the moment ratios
/// `m₃/m₂^{3/2}` and `m₄/m₂²` (so a normal sample has kurtosis near 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl SampleStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        let sd = (m2 / (nf - 1.0)).sqrt();
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        Some(Self {
            n,
            mean,
            sd,
            min,
            max,
            skewness: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2),
        })
    }
}

/// Which CSV columns hold the date and the value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub date_column: String,
    pub value_column: String,
    pub units: Units,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            value_column: "value".into(),
            units: Units::Level,
        }
    }
}

/// Reads a `date,value` CSV file (ISO-8601 dates) into a validated series.
///
/// Parse failures report the 1-based data row; duplicate or decreasing dates
/// are integrity errors.
pub fn load_price_series(path: impl AsRef<Path>, id: impl Into<String>, schema: &ColumnMapping) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_series(file, path, id, schema)
}

pub(crate) fn read_price_series<R: std::io::Read>(
    reader: R,
    path: &Path,
    id: impl Into<String>,
    schema: &ColumnMapping,
) -> Result<PriceSeries> {
    let format_err = |row: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| format_err(0, e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_err(0, format!("missing column `{name}`")))
    };
    let date_col = find(&schema.date_column)?;
    let value_col = find(&schema.value_column)?;

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| format_err(row, e.to_string()))?;
        let raw_date = record.get(date_col).unwrap_or_default();
        let raw_value = record.get(value_col).unwrap_or_default();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| format_err(row, format!("bad date `{raw_date}`: {e}")))?;
        let value = f64::from_str(raw_value).map_err(|e| format_err(row, format!("bad value `{raw_value}`: {e}")))?;
        if !value.is_finite() {
            return Err(format_err(row, format!("non-finite value `{raw_value}`")));
        }
        dates.push(date);
        values.push(value);
    }
    PriceSeries::new(id, schema.units, dates, values)
}

/// `ln(P_t / P_{t-1})` for each consecutive pair.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::domain(format!(
            "`{}` needs at least two prices for a return",
            prices.id()
        )));
    }
    if let Some(i) = prices.values().iter().position(|p| *p <= 0.0) {
        return Err(Error::domain(format!(
            "`{}` has non-positive price {} on {}",
            prices.id(),
            prices.values()[i],
            prices.dates()[i]
        )));
    }
    let values = prices.values().windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    ReturnSeries::new(prices.id(), prices.dates()[1..].to_vec(), values)
}

/// Variables aligned onto one daily trading grid with no gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct VariablePanel {
    dates: Vec<NaiveDate>,
    ids: Vec<String>,
    columns: Vec<Vec<f64>>,
    /// Grid position of each column's first true observation; positions
    /// before it carry the head backfill.
    first_observed: Vec<usize>,
    target: usize,
}

impl VariablePanel {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn target_id(&self) -> &str {
        &self.ids[self.target]
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn column(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|c| c == id)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn column_at(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn target(&self) -> &[f64] {
        &self.columns[self.target]
    }

    /// Number of leading grid days filled backward for column `index`.
    pub fn backfilled_days(&self, index: usize) -> usize {
        self.first_observed[index]
    }

    /// All variables on grid day `row`, in column order.
    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Each aligned column as a series on the grid, target first.
    pub fn to_series(&self) -> Vec<PriceSeries> {
        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by_key(|i| *i != self.target);
        order
            .into_iter()
            .map(|i| PriceSeries {
                id: self.ids[i].clone(),
                units: Units::Level,
                dates: self.dates.clone(),
                values: self.columns[i].clone(),
            })
            .collect()
    }
}

/// Aligns every series onto `grid` by forward fill, with the earliest known
/// value propagated backward for series that start after the grid does.
///
/// Observations dated between grid days (weekends, holidays, mid-month
/// releases) take effect on the next grid day.
pub fn align_panel(series: &[PriceSeries], grid: &[NaiveDate], target_id: &str) -> Result<VariablePanel> {
    if grid.is_empty() {
        return Err(Error::domain("empty trading grid"));
    }
    check_dates("grid", grid)?;
    let mut seen = HashSet::new();
    for s in series {
        if !seen.insert(s.id()) {
            return Err(Error::Integrity {
                series: s.id().to_string(),
                message: "variable listed twice".into(),
            });
        }
    }
    let target = series
        .iter()
        .position(|s| s.id() == target_id)
        .ok_or_else(|| Error::Input(format!("target `{target_id}` not among the series")))?;

    let grid_end = *grid.last().expect("non-empty grid");
    let mut ids = Vec::with_capacity(series.len());
    let mut columns = Vec::with_capacity(series.len());
    let mut first_observed = Vec::with_capacity(series.len());
    for s in series {
        if s.is_empty() {
            return Err(Error::domain(format!("series `{}` is empty", s.id())));
        }
        if s.dates()[0] > grid_end {
            return Err(Error::Coverage {
                series: s.id().to_string(),
                first: s.dates()[0],
                grid_end,
            });
        }
        let mut column = Vec::with_capacity(grid.len());
        let mut cursor = 0usize;
        let mut first = None;
        for (g, day) in grid.iter().enumerate() {
            while cursor < s.len() && s.dates()[cursor] <= *day {
                cursor += 1;
            }
            if cursor == 0 {
                column.push(s.values()[0]);
            } else {
                first.get_or_insert(g);
                column.push(s.values()[cursor - 1]);
            }
        }
        ids.push(s.id().to_string());
        columns.push(column);
        first_observed.push(first.unwrap_or(grid.len()));
    }
    Ok(VariablePanel {
        dates: grid.to_vec(),
        ids,
        columns,
        first_observed,
        target,
    })
}

/// Aligns onto the target series' own dates.
pub fn align_to_target(series: &[PriceSeries], target_id: &str) -> Result<VariablePanel> {
    let grid = series
        .iter()
        .find(|s| s.id() == target_id)
        .ok_or_else(|| Error::Input(format!("target `{target_id}` not among the series")))?
        .dates()
        .to_vec();
    align_panel(series, &grid, target_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub frequency: Frequency,
    #[serde(default)]
    pub units: Units,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_value_column")]
    pub value_column: String,
}

fn default_date_column() -> String {
    "date".into()
}

fn default_value_column() -> String {
    "value".into()
}

/// TOML manifest listing the variable files that make up a panel.
///
/// ```toml
/// target = "spx"
///
/// [[variable]]
/// id = "spx"
/// path = "sp500.csv"
/// frequency = "daily"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelManifest {
    pub target: String,
    #[serde(rename = "variable")]
    pub variables: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl PanelManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: PanelManifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if !manifest.variables.iter().any(|v| v.id == manifest.target) {
            return Err(Error::Config(format!(
                "{}: target `{}` has no [[variable]] entry",
                path.display(),
                manifest.target
            )));
        }
        Ok(manifest)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn load_series(&self) -> Result<Vec<PriceSeries>> {
        self.variables
            .iter()
            .map(|v| {
                let schema = ColumnMapping {
                    date_column: v.date_column.clone(),
                    value_column: v.value_column.clone(),
                    units: v.units,
                };
                load_price_series(self.resolve(v), v.id.clone(), &schema)
            })
            .collect()
    }

    pub fn load_target(&self) -> Result<PriceSeries> {
        let entry = self
            .variables
            .iter()
            .find(|v| v.id == self.target)
            .expect("validated on load");
        let schema = ColumnMapping {
            date_column: entry.date_column.clone(),
            value_column: entry.value_column.clone(),
            units: entry.units,
        };
        load_price_series(self.resolve(entry), entry.id.clone(), &schema)
    }

    /// Loads every variable and aligns it to the target's trading days.
    pub fn load_panel(&self) -> Result<VariablePanel> {
        align_to_target(&self.load_series()?, &self.target)
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Level => "level",
            Units::Rate => "rate",
        })
    }
}
