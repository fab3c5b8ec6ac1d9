use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::dataset::{Slice, TwoSliceDataset};
use super::structure::DbnStructure;
use crate::error::{Error, Result};

/// Linear-Gaussian conditional of one node on its parents, in the units of
/// the raw data.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeParams {
    pub intercept: f64,
    /// `(parent node, coefficient)`, parents ascending.
    pub coefficients: Vec<(usize, f64)>,
    pub residual_variance: f64,
}

/// A two-slice structure with fitted conditionals.
#[derive(Debug, Clone)]
pub struct GaussianDbn {
    structure: DbnStructure,
    params: Vec<NodeParams>,
    order: Vec<usize>,
    loglik: f64,
    fit_aic: f64,
    n_rows: usize,
}

impl GaussianDbn {
    /// Assembles a model from explicit conditionals, one per node.
    pub fn from_params(structure: DbnStructure, params: Vec<NodeParams>) -> Result<Self> {
        structure.validate()?;
        if params.len() != structure.n_nodes() {
            return Err(Error::domain(format!(
                "{} node conditionals for {} nodes",
                params.len(),
                structure.n_nodes()
            )));
        }
        for (node, p) in params.iter().enumerate() {
            let parents: Vec<usize> = p.coefficients.iter().map(|(q, _)| *q).collect();
            if parents != structure.parents(node) {
                return Err(Error::domain(format!(
                    "conditional of {} does not match its parents",
                    structure.node_label(node)
                )));
            }
            if !(p.residual_variance >= 0.0) {
                return Err(Error::domain(format!(
                    "negative residual variance at {}",
                    structure.node_label(node)
                )));
            }
        }
        let order = structure.topological_order().expect("validated acyclic");
        Ok(Self {
            structure,
            params,
            order,
            loglik: f64::NAN,
            fit_aic: f64::NAN,
            n_rows: 0,
        })
    }

    pub fn structure(&self) -> &DbnStructure {
        &self.structure
    }

    pub fn node_params(&self, node: usize) -> &NodeParams {
        &self.params[node]
    }

    /// Total parameter count: an intercept, a residual variance and one
    /// coefficient per parent, for every node.
    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.coefficients.len() + 2).sum()
    }

    /// Gaussian log-likelihood of the training data; `NaN` for models built
    /// by [`from_params`](Self::from_params).
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// `2k − 2·loglik`.
    pub fn fit_aic(&self) -> f64 {
        self.fit_aic
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Conditional mean of the current-slice target given every variable's
    /// value on the evidence day, in panel order.
    pub fn forecast_one_step(&self, evidence: &[f64]) -> Result<f64> {
        let v = self.structure.n_vars();
        if evidence.len() != v {
            return Err(Error::Input(format!(
                "evidence has {} values for {v} variables",
                evidence.len()
            )));
        }
        if let Some(i) = evidence.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!(
                "evidence for {} is not finite",
                self.structure.names()[i]
            )));
        }
        let mut values = vec![0.0; 2 * v];
        values[..v].copy_from_slice(evidence);
        // Means propagate exactly through a linear-Gaussian network, so
        // evaluating the conditionals in topological order marginalizes the
        // unobserved current-slice nodes.
        for &node in &self.order {
            if self.structure.slice_of(node) == Slice::Lagged {
                continue;
            }
            let p = &self.params[node];
            values[node] = p.intercept + p.coefficients.iter().map(|&(q, b)| b * values[q]).sum::<f64>();
        }
        Ok(values[self.structure.target_node()])
    }

    /// As [`forecast_one_step`](Self::forecast_one_step) with evidence keyed
    /// by variable name.
    pub fn forecast_from(&self, evidence: &BTreeMap<String, f64>) -> Result<f64> {
        let row = self
            .structure
            .names()
            .iter()
            .map(|n| {
                evidence
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("no evidence for {n:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        self.forecast_one_step(&row)
    }
}

/// Least-squares linear-Gaussian fit of every node on its parents.
///
/// Regressions run on standardized columns and are mapped back to raw
/// units, so the stored conditionals and the likelihood refer to the data
/// as given.
pub fn fit_parameters(structure: &DbnStructure, data: &TwoSliceDataset) -> Result<GaussianDbn> {
    structure.validate()?;
    if structure.names() != data.names() || structure.target_var() != data.target_var() {
        return Err(Error::domain("structure and dataset describe different variables"));
    }
    let n = data.n_rows();
    let mut params = Vec::with_capacity(data.n_nodes());
    let mut loglik = 0.0;
    for node in 0..data.n_nodes() {
        let parents = structure.parents(node);
        if n <= parents.len() + 1 {
            return Err(Error::domain(format!(
                "{n} rows cannot fit {} with {} parents",
                data.node_label(node),
                parents.len()
            )));
        }
        let p = fit_node(data, node, &parents)?;
        let y = data.column(node);
        let mut rss = 0.0;
        for i in 0..n {
            let fitted = p.intercept + p.coefficients.iter().map(|&(q, b)| b * data.column(q)[i]).sum::<f64>();
            rss += (y[i] - fitted).powi(2);
        }
        let variance = rss / n as f64;
        if variance > 0.0 {
            loglik += -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * variance).ln() + 1.0);
        }
        params.push(NodeParams {
            residual_variance: variance,
            ..p
        });
    }
    let mut model = GaussianDbn::from_params(structure.clone(), params)?;
    model.loglik = loglik;
    model.fit_aic = 2.0 * model.parameter_count() as f64 - 2.0 * loglik;
    model.n_rows = n;
    Ok(model)
}

fn fit_node(data: &TwoSliceDataset, node: usize, parents: &[usize]) -> Result<NodeParams> {
    let mean_y = data.mean(node);
    if parents.is_empty() {
        return Ok(NodeParams {
            intercept: mean_y,
            coefficients: Vec::new(),
            residual_variance: 0.0,
        });
    }
    let rank_deficient = || {
        Error::Numerical(format!(
            "parents of {} are collinear or constant",
            data.node_label(node)
        ))
    };
    if parents.iter().any(|&q| data.is_constant(q)) {
        return Err(rank_deficient());
    }
    let n = data.n_rows();
    let k = parents.len();
    let sd_y = data.sd(node);
    // Centered and scaled design; the intercept is then the mean of the
    // scaled response, zero unless the child is constant.
    let x = DMatrix::from_fn(n, k, |i, j| {
        let q = parents[j];
        (data.column(q)[i] - data.mean(q)) / data.sd(q)
    });
    let scale_y = if sd_y > 0.0 { sd_y } else { 1.0 };
    let y = DVector::from_fn(n, |i, _| (data.column(node)[i] - mean_y) / scale_y);
    let qr = x.qr();
    let r = qr.r();
    let r_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| !(r[(i, i)].abs() > 1e-10 * r_max.max(1e-300))) {
        return Err(rank_deficient());
    }
    let qty = qr.q().transpose() * y;
    let b = r.solve_upper_triangular(&qty).ok_or_else(rank_deficient)?;
    let mut intercept = mean_y;
    let coefficients = parents
        .iter()
        .enumerate()
        .map(|(j, &q)| {
            let a = scale_y * b[j] / data.sd(q);
            intercept -= a * data.mean(q);
            (q, a)
        })
        .collect();
    Ok(NodeParams {
        intercept,
        coefficients,
        residual_variance: 0.0,
    })
}
