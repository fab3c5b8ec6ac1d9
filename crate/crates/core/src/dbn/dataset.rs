use chrono::NaiveDate;
use nalgebra::DMatrix;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::market_data::VariablePanel;

/// Time slice of a node in the two-slice network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slice {
    /// The earlier day, `d − 1`. Always observed.
    Lagged,
    /// The later day, `d`.
    Current,
}

impl Slice {
    pub fn label(self) -> &'static str {
        match self {
            Slice::Lagged => "t-1",
            Slice::Current => "t",
        }
    }
}

/// Pairs of consecutive days `(all variables at d − 1, all variables at d)`
/// from one training window.
///
/// Node `i < n_vars` is variable `i` at the lagged slice; node `n_vars + i`
/// is the same variable at the current slice.
#[derive(Debug, Clone)]
pub struct TwoSliceDataset {
    names: Vec<String>,
    target: usize,
    /// Raw columns, one per node.
    columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    /// Population standard deviations.
    sds: Vec<f64>,
    /// Correlation matrix of the node columns; rows and columns of constant
    /// nodes are zero.
    corr: DMatrix<f64>,
}

impl TwoSliceDataset {
    /// Builds the dataset from consecutive panel rows `rows`.
    pub fn from_rows(panel: &VariablePanel, rows: std::ops::Range<usize>) -> Result<Self> {
        if rows.end > panel.len() || rows.start >= rows.end {
            return Err(Error::domain(format!(
                "row range {rows:?} outside a panel of {} days",
                panel.len()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::domain("a two-slice dataset needs at least two days"));
        }
        let v = panel.n_vars();
        let mut columns = Vec::with_capacity(2 * v);
        for i in 0..v {
            columns.push(panel.column_at(i)[rows.start..rows.end - 1].to_vec());
        }
        for i in 0..v {
            columns.push(panel.column_at(i)[rows.start + 1..rows.end].to_vec());
        }
        Ok(Self::from_columns(panel.ids().to_vec(), panel.target_index(), columns))
    }

    /// Builds a dataset directly from node columns (lagged slice first).
    pub fn from_columns(names: Vec<String>, target: usize, columns: Vec<Vec<f64>>) -> Self {
        let v = names.len();
        assert_eq!(columns.len(), 2 * v, "need two columns per variable");
        let n = columns[0].len();
        assert!(columns.iter().all(|c| c.len() == n), "ragged columns");
        let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
        let sds: Vec<f64> = columns
            .iter()
            .zip(&means)
            .map(|(c, m)| (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt())
            .collect();
        // Relative threshold: a column whose spread is negligible against its
        // level carries no information.
        let constant: Vec<bool> = sds
            .iter()
            .zip(&means)
            .map(|(s, m)| *s <= 1e-12 * m.abs().max(1.0))
            .collect();
        let z: Vec<Vec<f64>> = columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if constant[i] {
                    vec![0.0; n]
                } else {
                    c.iter().map(|x| (x - means[i]) / sds[i]).collect()
                }
            })
            .collect();
        let k = 2 * v;
        let mut corr = DMatrix::zeros(k, k);
        for i in 0..k {
            if constant[i] {
                continue;
            }
            corr[(i, i)] = 1.0;
            for j in i + 1..k {
                if constant[j] {
                    continue;
                }
                let r = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                corr[(i, j)] = r;
                corr[(j, i)] = r;
            }
        }
        let sds = sds
            .into_iter()
            .zip(&constant)
            .map(|(s, c)| if *c { 0.0 } else { s })
            .collect();
        Self {
            names,
            target,
            columns,
            means,
            sds,
            corr,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target_var(&self) -> usize {
        self.target
    }

    /// Node index of the target at the current slice.
    pub fn target_node(&self) -> usize {
        self.n_vars() + self.target
    }

    pub fn slice_of(&self, node: usize) -> Slice {
        if node < self.n_vars() {
            Slice::Lagged
        } else {
            Slice::Current
        }
    }

    pub fn var_of(&self, node: usize) -> usize {
        node % self.n_vars()
    }

    pub fn node_label(&self, node: usize) -> String {
        format!("{}:{}", self.slice_of(node).label(), self.names[self.var_of(node)])
    }

    pub fn column(&self, node: usize) -> &[f64] {
        &self.columns[node]
    }

    pub fn mean(&self, node: usize) -> f64 {
        self.means[node]
    }

    pub fn sd(&self, node: usize) -> f64 {
        self.sds[node]
    }

    pub fn is_constant(&self, node: usize) -> bool {
        self.sds[node] == 0.0
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Whether an edge between `a` and `b` may exist at all: never inside
    /// the lagged slice, never touching a constant column.
    pub fn adjacency_allowed(&self, a: usize, b: usize) -> bool {
        a != b
            && !(self.slice_of(a) == Slice::Lagged && self.slice_of(b) == Slice::Lagged)
            && !self.is_constant(a)
            && !self.is_constant(b)
    }

    /// Fisher-z test of `x ⟂ y | given` on the partial correlation.
    pub fn ci_test(&self, x: usize, y: usize, given: &[usize]) -> Result<f64> {
        let n = self.n_rows();
        if n <= given.len() + 3 {
            return Err(Error::domain(format!(
                "{n} rows cannot support a conditioning set of {}",
                given.len()
            )));
        }
        if self.is_constant(x) || self.is_constant(y) {
            return Ok(1.0);
        }
        let r = partial_correlation(&self.corr, x, y, given)?;
        Ok(fisher_z_p_value(r, n, given.len()))
    }
}

/// Two-sided p-value of the Fisher z statistic for a partial correlation.
pub(crate) fn fisher_z_p_value(r: f64, n: usize, conditioning: usize) -> f64 {
    let r = r.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * ((n - conditioning - 3) as f64).sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Partial correlation of `x` and `y` given `given`, from the inverse of the
/// correlation submatrix over `{x, y} ∪ given`.
pub(crate) fn partial_correlation(corr: &DMatrix<f64>, x: usize, y: usize, given: &[usize]) -> Result<f64> {
    if given.is_empty() {
        return Ok(corr[(x, y)]);
    }
    let mut idx = Vec::with_capacity(given.len() + 2);
    idx.push(x);
    idx.push(y);
    idx.extend_from_slice(given);
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| corr[(idx[i], idx[j])]);
    let precision = invert_spd(&sub).ok_or_else(|| {
        Error::Numerical(format!(
            "conditioning set {given:?} is collinear with nodes {x} and {y}"
        ))
    })?;
    let r = -precision[(0, 1)] / (precision[(0, 0)] * precision[(1, 1)]).sqrt();
    Ok(r)
}

/// Inverse of a symmetric positive-definite matrix by Cholesky, or `None`
/// when a pivot falls below a relative tolerance.
pub(crate) fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = m.nrows();
    let mut l = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut d = m[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > 1e-10 * m[(j, j)].abs().max(1e-300)) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..k {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    let l_inv = l.solve_lower_triangular(&DMatrix::identity(k, k))?;
    Some(l_inv.transpose() * l_inv)
}

/// Builds the two-slice dataset over panel days `start..=end`.
pub fn build_slices(panel: &VariablePanel, start: NaiveDate, end: NaiveDate) -> Result<TwoSliceDataset> {
    let first = panel.dates().partition_point(|d| *d < start);
    let last = panel.dates().partition_point(|d| *d <= end);
    if last <= first + 1 {
        return Err(Error::domain(format!(
            "window {start}..={end} covers fewer than two panel days"
        )));
    }
    TwoSliceDataset::from_rows(panel, first..last)
}

/// Fisher-z conditional-independence p-value for `x ⟂ y | given`.
pub fn ci_test(data: &TwoSliceDataset, x: usize, y: usize, given: &[usize]) -> Result<f64> {
    data.ci_test(x, y, given)
}
