use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::{invert_spd, Slice, TwoSliceDataset};
use super::structure::DbnStructure;
use crate::error::{Error, Result};

/// Structure-learning algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    PcStable,
    Mmhc,
    SiHitonPc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::PcStable, Algorithm::Mmhc, Algorithm::SiHitonPc];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::PcStable => "pc-stable",
            Algorithm::Mmhc => "mmhc",
            Algorithm::SiHitonPc => "si-hiton-pc",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.tag() == tag)
            .ok_or_else(|| Error::Config(format!("unknown structure learner {tag:?}")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSettings {
    /// Level of the conditional-independence tests.
    pub significance: f64,
    /// Largest conditioning set tried.
    pub max_conditioning: usize,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        Self {
            significance: 0.05,
            max_conditioning: 3,
        }
    }
}

/// Moves must lower AIC by more than this to be taken.
const MIN_IMPROVEMENT: f64 = 1e-9;

/// Learns a two-slice structure from `data`.
///
/// Edges never end in the lagged slice, never join two lagged nodes, and
/// never touch a constant column. Tests that fail on a collinear
/// conditioning set are skipped rather than treated as evidence either way.
pub fn learn_structure(data: &TwoSliceDataset, algo: Algorithm, settings: &LearnerSettings) -> Result<DbnStructure> {
    if !(settings.significance > 0.0 && settings.significance < 1.0) {
        return Err(Error::domain(format!(
            "significance level {} outside (0, 1)",
            settings.significance
        )));
    }
    if data.n_rows() <= settings.max_conditioning + 3 {
        return Err(Error::domain(format!(
            "{} rows are too few for a conditioning cap of {}",
            data.n_rows(),
            settings.max_conditioning
        )));
    }
    let ctx = Context::new(data, settings);
    let structure = match algo {
        Algorithm::PcStable => {
            let skeleton = ctx.pc_skeleton();
            ctx.prune(ctx.orient(&skeleton))
        }
        Algorithm::Mmhc => {
            let candidates = ctx.symmetric_neighbourhoods(|t| ctx.mmpc(t));
            ctx.hill_climb(&candidates)
        }
        Algorithm::SiHitonPc => {
            let skeleton = ctx.symmetric_neighbourhoods(|t| ctx.hiton_pc(t));
            ctx.prune(ctx.orient(&skeleton))
        }
    };
    structure.validate()?;
    Ok(structure)
}

struct Context<'a> {
    data: &'a TwoSliceDataset,
    alpha: f64,
    cap: usize,
    scores: RefCell<HashMap<(usize, Vec<usize>), f64>>,
}

impl<'a> Context<'a> {
    fn new(data: &'a TwoSliceDataset, settings: &LearnerSettings) -> Self {
        Self {
            data,
            alpha: settings.significance,
            cap: settings.max_conditioning,
            scores: RefCell::new(HashMap::new()),
        }
    }

    fn n(&self) -> usize {
        self.data.n_nodes()
    }

    fn current_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (self.data.n_vars()..self.n()).filter(|&t| !self.data.is_constant(t))
    }

    fn neighbours_allowed(&self, t: usize) -> Vec<usize> {
        (0..self.n()).filter(|&x| self.data.adjacency_allowed(x, t)).collect()
    }

    /// p-value, or `None` when the conditioning set is collinear.
    fn p_value(&self, x: usize, y: usize, given: &[usize]) -> Option<f64> {
        match self.data.ci_test(x, y, given) {
            Ok(p) => Some(p),
            Err(Error::Numerical(_)) => None,
            Err(e) => panic!("conditional-independence test failed: {e}"),
        }
    }

    /// Whether some subset of `pool` of size at most the cap, and at least
    /// `min_size`, separates `x` from `t`. With `must_contain`, only subsets
    /// holding that node are tried.
    fn separable(&self, x: usize, t: usize, pool: &[usize], min_size: usize, must_contain: Option<usize>) -> bool {
        self.max_p_value(x, t, pool, min_size, must_contain, true) > self.alpha
    }

    /// Largest p-value over the admissible subsets; with `stop_early`, returns
    /// as soon as one exceeds the significance level.
    fn max_p_value(
        &self,
        x: usize,
        t: usize,
        pool: &[usize],
        min_size: usize,
        must_contain: Option<usize>,
        stop_early: bool,
    ) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let (fixed, rest): (Vec<usize>, Vec<usize>) = match must_contain {
            Some(z) => (vec![z], pool.iter().copied().filter(|&p| p != z).collect()),
            None => (Vec::new(), pool.to_vec()),
        };
        let lo = min_size.saturating_sub(fixed.len());
        let hi = self.cap.saturating_sub(fixed.len()).min(rest.len());
        if fixed.len() > self.cap {
            return best;
        }
        let mut set = Vec::with_capacity(self.cap);
        for size in lo..=hi {
            let done = for_each_subset(&rest, size, |s| {
                set.clear();
                set.extend_from_slice(&fixed);
                set.extend_from_slice(s);
                if let Some(p) = self.p_value(x, t, &set) {
                    best = best.max(p);
                    if stop_early && p > self.alpha {
                        return true;
                    }
                }
                false
            });
            if done {
                break;
            }
        }
        best
    }

    /// Skeleton of the stable PC algorithm: at each level, conditioning sets
    /// come from the adjacencies fixed at the start of that level.
    fn pc_skeleton(&self) -> BTreeSet<(usize, usize)> {
        let n = self.n();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for a in 0..n {
            for b in a + 1..n {
                if self.data.adjacency_allowed(a, b) {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
        for level in 0..=self.cap {
            let frozen = adj.clone();
            let mut tested = false;
            for a in 0..n {
                for &b in frozen[a].range(a + 1..) {
                    for (x, y) in [(a, b), (b, a)] {
                        let pool: Vec<usize> = frozen[x].iter().copied().filter(|&z| z != y).collect();
                        if pool.len() < level {
                            continue;
                        }
                        tested = true;
                        let separated =
                            for_each_subset(&pool, level, |s| self.p_value(a, b, s).is_some_and(|p| p > self.alpha));
                        if separated {
                            adj[a].remove(&b);
                            adj[b].remove(&a);
                            break;
                        }
                    }
                }
            }
            if !tested {
                break;
            }
        }
        let mut pairs = BTreeSet::new();
        for (a, set) in adj.iter().enumerate() {
            for &b in set.range(a + 1..) {
                pairs.insert((a, b));
            }
        }
        pairs
    }

    /// Max-min parents and children of `t`.
    fn mmpc(&self, t: usize) -> Vec<usize> {
        let mut open = self.neighbours_allowed(t);
        // Running maximum p-value of each open candidate over the subsets
        // of the current set seen so far.
        let mut max_p: Vec<f64> = open
            .iter()
            .map(|&x| self.p_value(x, t, &[]).unwrap_or(f64::NEG_INFINITY))
            .collect();
        let mut cpc: Vec<usize> = Vec::new();
        loop {
            let mut keep = Vec::with_capacity(open.len());
            let mut keep_p = Vec::with_capacity(open.len());
            for (&x, &p) in open.iter().zip(&max_p) {
                if p <= self.alpha {
                    keep.push(x);
                    keep_p.push(p);
                }
            }
            open = keep;
            max_p = keep_p;
            let Some(best) = (0..open.len()).min_by(|&i, &j| max_p[i].total_cmp(&max_p[j]).then(open[i].cmp(&open[j])))
            else {
                break;
            };
            let z = open.remove(best);
            max_p.remove(best);
            cpc.push(z);
            for (i, &x) in open.iter().enumerate() {
                let p = self.max_p_value(x, t, &cpc, 1, Some(z), true);
                max_p[i] = max_p[i].max(p);
            }
        }
        self.backward(t, cpc)
    }

    /// Semi-interleaved HITON parents and children of `t`.
    fn hiton_pc(&self, t: usize) -> Vec<usize> {
        let mut ranked: Vec<(f64, usize)> = self
            .neighbours_allowed(t)
            .into_iter()
            .filter_map(|x| self.p_value(x, t, &[]).map(|p| (p, x)))
            .filter(|(p, _)| *p <= self.alpha)
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut cpc: Vec<usize> = Vec::new();
        for (_, x) in ranked {
            if !self.separable(x, t, &cpc, 1, None) {
                cpc.push(x);
            }
        }
        self.backward(t, cpc)
    }

    fn backward(&self, t: usize, mut cpc: Vec<usize>) -> Vec<usize> {
        let mut i = 0;
        while i < cpc.len() {
            let x = cpc[i];
            let others: Vec<usize> = cpc.iter().copied().filter(|&y| y != x).collect();
            if self.separable(x, t, &others, 1, None) {
                cpc.remove(i);
            } else {
                i += 1;
            }
        }
        cpc.sort_unstable();
        cpc
    }

    /// Runs a local parents-and-children search at every current-slice node
    /// and keeps a pair when both ends agree (a lagged node is accepted on
    /// the current node's word alone).
    fn symmetric_neighbourhoods(&self, local: impl Fn(usize) -> Vec<usize>) -> BTreeSet<(usize, usize)> {
        let n = self.n();
        let mut pc: Vec<Option<BTreeSet<usize>>> = vec![None; n];
        for t in self.current_nodes() {
            pc[t] = Some(local(t).into_iter().collect());
        }
        let mut pairs = BTreeSet::new();
        for t in self.current_nodes() {
            for &x in pc[t].as_ref().expect("computed above") {
                let agreed = match self.data.slice_of(x) {
                    Slice::Lagged => true,
                    Slice::Current => pc[x].as_ref().is_some_and(|s| s.contains(&t)),
                };
                if agreed {
                    pairs.insert((x.min(t), x.max(t)));
                }
            }
        }
        pairs
    }

    /// Local AIC of `child` on `parents`, computed on standardized columns.
    fn score(&self, child: usize, parents: &[usize]) -> f64 {
        let mut key_parents = parents.to_vec();
        key_parents.sort_unstable();
        let key = (child, key_parents);
        if let Some(&s) = self.scores.borrow().get(&key) {
            return s;
        }
        let s = local_aic(self.data, child, &key.1);
        self.scores.borrow_mut().insert(key, s);
        s
    }

    fn delta_add(&self, s: &DbnStructure, parent: usize, child: usize) -> f64 {
        let mut pa = s.parents(child);
        let before = self.score(child, &pa);
        pa.push(parent);
        self.score(child, &pa) - before
    }

    fn delta_remove(&self, s: &DbnStructure, parent: usize, child: usize) -> f64 {
        let pa = s.parents(child);
        let before = self.score(child, &pa);
        let rest: Vec<usize> = pa.into_iter().filter(|&p| p != parent).collect();
        self.score(child, &rest) - before
    }

    /// Directs a skeleton: lagged-to-current edges point forward; each
    /// current-slice pair, in ascending order, takes the acyclic direction
    /// with the lower AIC (ties go from the smaller node to the larger).
    fn orient(&self, skeleton: &BTreeSet<(usize, usize)>) -> DbnStructure {
        let mut s = DbnStructure::empty(self.data.names().to_vec(), self.data.target_var());
        for &(a, b) in skeleton {
            if self.data.slice_of(a) == Slice::Lagged {
                s.add_edge(a, b).expect("forward temporal edge is always valid");
            }
        }
        for &(a, b) in skeleton {
            if self.data.slice_of(a) == Slice::Lagged {
                continue;
            }
            let forward = (!s.reachable(b, a)).then(|| self.delta_add(&s, a, b));
            let backward = (!s.reachable(a, b)).then(|| self.delta_add(&s, b, a));
            let (p, c) = match (forward, backward) {
                (Some(f), Some(r)) if r < f => (b, a),
                (Some(_), _) => (a, b),
                (None, _) => (b, a),
            };
            s.add_edge(p, c).expect("orientation checked for cycles");
        }
        s
    }

    /// Repeatedly drops the edge whose removal lowers AIC the most.
    fn prune(&self, mut s: DbnStructure) -> DbnStructure {
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (p, c) in s.edges() {
                let d = self.delta_remove(&s, p, c);
                if d < -MIN_IMPROVEMENT && best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, p, c));
                }
            }
            match best {
                Some((_, p, c)) => {
                    s.remove_edge(p, c);
                }
                None => return s,
            }
        }
    }

    /// Greedy AIC search over add, delete and reverse moves restricted to
    /// the candidate pairs. Equal-AIC moves prefer deletion, then the
    /// smallest `(parent, child)`.
    fn hill_climb(&self, candidates: &BTreeSet<(usize, usize)>) -> DbnStructure {
        let mut s = DbnStructure::empty(self.data.names().to_vec(), self.data.target_var());
        let limit = 10 * (candidates.len() + 1) * (candidates.len() + 1);
        for _ in 0..limit {
            // (delta, kind, parent, child); kind 0 delete, 1 add, 2 reverse.
            let mut best: Option<(f64, u8, usize, usize)> = None;
            let mut offer = |m: (f64, u8, usize, usize)| {
                if m.0 < -MIN_IMPROVEMENT
                    && best.is_none_or(|b| {
                        m.0.total_cmp(&b.0)
                            .then(m.1.cmp(&b.1))
                            .then(m.2.cmp(&b.2))
                            .then(m.3.cmp(&b.3))
                            .is_lt()
                    })
                {
                    best = Some(m);
                }
            };
            for (p, c) in s.edges() {
                offer((self.delta_remove(&s, p, c), 0, p, c));
            }
            for &(a, b) in candidates {
                if s.has_edge(a, b) || s.has_edge(b, a) {
                    continue;
                }
                let lagged = self.data.slice_of(a) == Slice::Lagged;
                for (p, c) in [(a, b), (b, a)] {
                    if lagged && p != a {
                        continue;
                    }
                    if !s.reachable(c, p) {
                        offer((self.delta_add(&s, p, c), 1, p, c));
                    }
                }
            }
            let intra: Vec<(usize, usize)> = s
                .edges()
                .filter(|&(p, _)| self.data.slice_of(p) == Slice::Current)
                .collect();
            for (p, c) in intra {
                let mut t = s.clone();
                t.remove_edge(p, c);
                if t.reachable(p, c) {
                    continue;
                }
                let d = self.delta_remove(&s, p, c) + self.delta_add(&t, c, p);
                offer((d, 2, p, c));
            }
            let Some((_, kind, p, c)) = best else {
                break;
            };
            match kind {
                0 => {
                    s.remove_edge(p, c);
                }
                1 => s.add_edge(p, c).expect("checked for cycles"),
                _ => {
                    s.remove_edge(p, c);
                    s.add_edge(c, p).expect("checked for cycles");
                }
            }
        }
        s
    }
}

/// AIC of a linear-Gaussian regression of standardized `child` on
/// standardized `parents`, with `|parents| + 2` parameters. Collinear
/// parents score `+∞`.
pub(crate) fn local_aic(data: &TwoSliceDataset, child: usize, parents: &[usize]) -> f64 {
    let n = data.n_rows() as f64;
    let k = parents.len() as f64 + 2.0;
    if data.is_constant(child) || parents.iter().any(|&p| data.is_constant(p)) {
        return f64::INFINITY;
    }
    let residual_var = if parents.is_empty() {
        1.0
    } else {
        let corr = data.correlation();
        let mut idx = Vec::with_capacity(parents.len() + 1);
        idx.push(child);
        idx.extend_from_slice(parents);
        let m = idx.len();
        let sub = DMatrix::from_fn(m, m, |i, j| corr[(idx[i], idx[j])]);
        match invert_spd(&sub) {
            Some(p) => 1.0 / p[(0, 0)],
            None => return f64::INFINITY,
        }
    };
    let ll = -0.5 * n * ((2.0 * std::f64::consts::PI * residual_var).ln() + 1.0);
    2.0 * k - 2.0 * ll
}

/// Calls `f` on each `size`-subset of `items` in lexicographic position
/// order until it returns `true`; reports whether it did.
fn for_each_subset(items: &[usize], size: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    if size > items.len() {
        return false;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    let mut buf = vec![0; size];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        if f(&buf) {
            return true;
        }
        let mut i = size;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] < items.len() - size + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
