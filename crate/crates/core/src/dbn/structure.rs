use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::dataset::Slice;
use crate::error::{Error, Result};

/// Directed acyclic graph over the nodes of a two-slice network.
///
/// Nodes follow the [`TwoSliceDataset`](super::TwoSliceDataset) numbering:
/// `0..n_vars` are the lagged slice, `n_vars..2 * n_vars` the current one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbnStructure {
    names: Vec<String>,
    target: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DbnStructure {
    /// An edgeless structure.
    pub fn empty(names: Vec<String>, target: usize) -> Self {
        assert!(target < names.len(), "target outside the variable list");
        Self {
            names,
            target,
            edges: BTreeSet::new(),
        }
    }

    /// Builds a structure from `(parent, child)` node pairs, rejecting edges
    /// that point into the lagged slice or close a cycle.
    pub fn from_edges(
        names: Vec<String>,
        target: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut s = Self::empty(names, target);
        for (p, c) in edges {
            s.add_edge(p, c)?;
        }
        Ok(s)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.names.len()
    }

    pub fn target_node(&self) -> usize {
        self.n_vars() + self.target
    }

    pub fn target_var(&self) -> usize {
        self.target
    }

    pub fn slice_of(&self, node: usize) -> Slice {
        if node < self.n_vars() {
            Slice::Lagged
        } else {
            Slice::Current
        }
    }

    pub fn node_label(&self, node: usize) -> String {
        format!("{}:{}", self.slice_of(node).label(), self.names[node % self.n_vars()])
    }

    /// Edges as `(parent, child)`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    /// Parents of `node`, ascending.
    pub fn parents(&self, node: usize) -> Vec<usize> {
        self.edges.iter().filter(|(_, c)| *c == node).map(|(p, _)| *p).collect()
    }

    /// Whether `to` is reachable from `from` along directed edges.
    pub fn reachable(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &(p, c) in self.edges.range((u, 0)..(u + 1, 0)) {
                debug_assert_eq!(p, u);
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    pub fn add_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        let n = self.n_nodes();
        if parent >= n || child >= n || parent == child {
            return Err(Error::domain(format!("invalid edge {parent} -> {child}")));
        }
        if self.slice_of(child) == Slice::Lagged {
            return Err(Error::domain(format!(
                "edge {} -> {} ends in the lagged slice",
                self.node_label(parent),
                self.node_label(child)
            )));
        }
        if self.reachable(child, parent) {
            return Err(Error::domain(format!(
                "edge {} -> {} closes a cycle",
                self.node_label(parent),
                self.node_label(child)
            )));
        }
        self.edges.insert((parent, child));
        Ok(())
    }

    pub fn remove_edge(&mut self, parent: usize, child: usize) -> bool {
        self.edges.remove(&(parent, child))
    }

    /// Checks acyclicity and the temporal constraint.
    pub fn validate(&self) -> Result<()> {
        for &(p, c) in &self.edges {
            if self.slice_of(c) == Slice::Lagged {
                return Err(Error::domain(format!(
                    "edge {} -> {} ends in the lagged slice",
                    self.node_label(p),
                    self.node_label(c)
                )));
            }
        }
        if self.topological_order().is_none() {
            return Err(Error::domain("structure contains a cycle"));
        }
        Ok(())
    }

    /// Kahn ordering with smallest-index-first tie-breaks, or `None` for a
    /// cyclic graph.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n_nodes();
        let mut indegree = vec![0usize; n];
        for &(_, c) in &self.edges {
            indegree[c] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop_first() {
            order.push(u);
            for &(_, c) in self.edges.range((u, 0)..(u + 1, 0)) {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// One `parent_slice:parent_name -> child_slice:child_name` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(p, c) in &self.edges {
            let _ = writeln!(out, "{} -> {}", self.node_label(p), self.node_label(c));
        }
        out
    }

    /// Parses the format written by [`to_edge_list`](Self::to_edge_list).
    pub fn from_edge_list(names: Vec<String>, target: usize, text: &str) -> Result<Self> {
        let v = names.len();
        let node = |label: &str| -> Result<usize> {
            let (slice, name) = label
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Input(format!("node label {label:?} lacks a slice")))?;
            let var = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Input(format!("unknown variable {name:?}")))?;
            match slice {
                "t-1" => Ok(var),
                "t" => Ok(v + var),
                other => Err(Error::Input(format!("unknown slice {other:?}"))),
            }
        };
        let mut edges = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (p, c) = line
                .split_once("->")
                .ok_or_else(|| Error::Input(format!("malformed edge line {line:?}")))?;
            edges.push((node(p)?, node(c)?));
        }
        Self::from_edges(names, target, edges)
    }
}
