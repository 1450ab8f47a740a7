//! Regression forest over unit-cube encoded configurations.
//!
//! Every leaf stores the box of the unit cube it covers, so marginal
//! predictions can be computed by a single pass over the leaves.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FanovaError;
use crate::seed;

/// How a forest dimension is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimKind {
    /// Ordered dimension; uniform measure on `[0, 1]`.
    Continuous,
    /// `n` unordered choices encoded as `index / (n - 1)`, each of mass `1 / n`.
    Categorical(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dim {
    pub name: String,
    pub kind: DimKind,
}

impl Dim {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: DimKind::Continuous,
        }
    }

    pub fn categorical(name: &str, n: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: DimKind::Categorical(n),
        }
    }

    pub(crate) fn category(&self, u: f64) -> usize {
        match self.kind {
            DimKind::Categorical(n) => ((u.clamp(0.0, 1.0) * (n - 1) as f64).round() as usize).min(n - 1),
            DimKind::Continuous => 0,
        }
    }

    pub(crate) fn full_extent(&self) -> Extent {
        match self.kind {
            DimKind::Continuous => Extent::Interval(0.0, 1.0),
            DimKind::Categorical(n) => Extent::Choices(if n == 64 { u64::MAX } else { (1u64 << n) - 1 }),
        }
    }
}

/// Per-dimension extent of a leaf box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    Interval(f64, f64),
    /// Bit mask over category indices.
    Choices(u64),
}

impl Extent {
    /// Measure of this extent under the uniform measure of `dim`.
    pub fn size(&self, dim: &Dim) -> f64 {
        match (*self, dim.kind) {
            (Extent::Interval(lo, hi), _) => hi - lo,
            (Extent::Choices(mask), DimKind::Categorical(n)) => mask.count_ones() as f64 / n as f64,
            (Extent::Choices(_), DimKind::Continuous) => unreachable!("choice extent on continuous dim"),
        }
    }

    pub fn contains(&self, dim: &Dim, u: f64) -> bool {
        match *self {
            Extent::Interval(lo, hi) => lo <= u && (u < hi || hi >= 1.0),
            Extent::Choices(mask) => mask & (1u64 << dim.category(u)) != 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    /// `x < t` goes left.
    Threshold(f64),
    /// Categories in the mask go left.
    Subset(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        dim: usize,
        split: Split,
        left: usize,
        right: usize,
    },
    Leaf {
        prediction: f64,
        cell: Vec<Extent>,
        /// Dimensions restricted by ancestors, in order of first appearance on the path.
        path_dims: Vec<usize>,
    },
}

/// A regression tree stored as an arena, root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

/// Hand-specified tree structure, used to plant exact surrogates.
#[derive(Debug, Clone)]
pub enum TreeSpec {
    Leaf(f64),
    Split {
        dim: usize,
        split: Split,
        left: Box<TreeSpec>,
        right: Box<TreeSpec>,
    },
}

impl TreeSpec {
    pub fn leaf(v: f64) -> Self {
        TreeSpec::Leaf(v)
    }

    pub fn threshold(dim: usize, t: f64, left: TreeSpec, right: TreeSpec) -> Self {
        TreeSpec::Split {
            dim,
            split: Split::Threshold(t),
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn from_spec(spec: &TreeSpec, dims: &[Dim]) -> Result<Self, FanovaError> {
        let mut nodes = Vec::new();
        let cell: Vec<Extent> = dims.iter().map(Dim::full_extent).collect();
        Self::push_spec(spec, dims, cell, Vec::new(), &mut nodes)?;
        Ok(Self { nodes })
    }

    fn push_spec(
        spec: &TreeSpec,
        dims: &[Dim],
        cell: Vec<Extent>,
        path: Vec<usize>,
        nodes: &mut Vec<TreeNode>,
    ) -> Result<usize, FanovaError> {
        let at = nodes.len();
        match spec {
            TreeSpec::Leaf(v) => {
                if !v.is_finite() {
                    return Err(FanovaError::NonFinite);
                }
                nodes.push(TreeNode::Leaf {
                    prediction: *v,
                    cell,
                    path_dims: path,
                });
            }
            TreeSpec::Split { dim, split, left, right } => {
                if *dim >= dims.len() {
                    return Err(FanovaError::UnknownDim(*dim));
                }
                let (lc, rc) = split_cell(&cell, *dim, split, &dims[*dim])?;
                let mut path = path;
                if !path.contains(dim) {
                    path.push(*dim);
                }
                nodes.push(TreeNode::Internal {
                    dim: *dim,
                    split: *split,
                    left: 0,
                    right: 0,
                });
                let l = Self::push_spec(left, dims, lc, path.clone(), nodes)?;
                let r = Self::push_spec(right, dims, rc, path, nodes)?;
                if let TreeNode::Internal { left, right, .. } = &mut nodes[at] {
                    *left = l;
                    *right = r;
                }
            }
        }
        Ok(at)
    }

    pub fn predict(&self, x: &[f64], dims: &[Dim]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Internal { dim, split, left, right } => {
                    let goes_left = match *split {
                        Split::Threshold(t) => x[*dim] < t,
                        Split::Subset(mask) => mask & (1u64 << dims[*dim].category(x[*dim])) != 0,
                    };
                    i = if goes_left { *left } else { *right };
                }
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, &[Extent], &[usize])> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf {
                prediction,
                cell,
                path_dims,
            } => Some((*prediction, cell.as_slice(), path_dims.as_slice())),
            TreeNode::Internal { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Exact average over all completions of the fixed coordinates.
    pub fn marginal(&self, fixed: &[(usize, f64)], dims: &[Dim]) -> f64 {
        let mut total = 0.0;
        for (pred, cell, path) in self.leaves() {
            if fixed.iter().all(|&(d, u)| cell[d].contains(&dims[d], u)) {
                let mut w = pred;
                for &d in path {
                    if !fixed.iter().any(|&(f, _)| f == d) {
                        w *= cell[d].size(&dims[d]);
                    }
                }
                total += w;
            }
        }
        total
    }

    /// Relabels dimensions: old dimension `d` becomes `perm[d]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                TreeNode::Internal { dim, split, left, right } => TreeNode::Internal {
                    dim: perm[*dim],
                    split: *split,
                    left: *left,
                    right: *right,
                },
                TreeNode::Leaf {
                    prediction,
                    cell,
                    path_dims,
                } => {
                    let mut new_cell = cell.clone();
                    for (old, ext) in cell.iter().enumerate() {
                        new_cell[perm[old]] = *ext;
                    }
                    TreeNode::Leaf {
                        prediction: *prediction,
                        cell: new_cell,
                        path_dims: path_dims.iter().map(|d| perm[*d]).collect(),
                    }
                }
            })
            .collect();
        Self { nodes }
    }
}

fn split_cell(
    cell: &[Extent],
    dim: usize,
    split: &Split,
    info: &Dim,
) -> Result<(Vec<Extent>, Vec<Extent>), FanovaError> {
    let mut left = cell.to_vec();
    let mut right = cell.to_vec();
    match (*split, cell[dim]) {
        (Split::Threshold(t), Extent::Interval(lo, hi)) if lo < t && t < hi => {
            left[dim] = Extent::Interval(lo, t);
            right[dim] = Extent::Interval(t, hi);
        }
        (Split::Subset(mask), Extent::Choices(cur)) if info.kind != DimKind::Continuous => {
            let l = cur & mask;
            let r = cur & !mask;
            if l == 0 || r == 0 {
                return Err(FanovaError::EmptySplit(dim));
            }
            left[dim] = Extent::Choices(l);
            right[dim] = Extent::Choices(r);
        }
        _ => return Err(FanovaError::EmptySplit(dim)),
    }
    Ok((left, right))
}

/// Which trial field a forest was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    Nu,
    PerActivity(usize),
    F1,
}

impl std::fmt::Display for Response {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Response::Nu => write!(f, "nu"),
            Response::PerActivity(i) => write!(f, "per_activity_nu[{i}]"),
            Response::F1 => write!(f, "f1"),
        }
    }
}

impl std::str::FromStr for Response {
    type Err = FanovaError;
    fn from_str(s: &str) -> Result<Self, FanovaError> {
        match s {
            "nu" => Ok(Response::Nu),
            "f1" => Ok(Response::F1),
            _ => s
                .strip_prefix("per_activity_nu[")
                .and_then(|r| r.strip_suffix(']'))
                .and_then(|i| i.parse().ok())
                .map(Response::PerActivity)
                .ok_or_else(|| FanovaError::BadResponse(s.to_string())),
        }
    }
}

impl Response {
    pub fn extract(&self, trial: &crate::Trial) -> Option<f64> {
        match self {
            Response::Nu => Some(trial.nu),
            Response::F1 => Some(trial.f1),
            Response::PerActivity(i) => trial.per_activity_nu.get(*i).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_frac: f64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 64,
            max_depth: 10,
            min_leaf: 3,
            feature_frac: 5.0 / 6.0,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub response: String,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub dims: Vec<Dim>,
    pub training_meta: TrainingMeta,
}

impl Forest {
    pub fn from_trees(dims: Vec<Dim>, trees: Vec<Tree>, response: &str) -> Self {
        Self {
            trees,
            dims,
            training_meta: TrainingMeta {
                response: response.to_string(),
                n_trials: 0,
            },
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x, &self.dims)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    /// Relabels dimensions: old dimension `d` becomes `perm[d]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut dims = self.dims.clone();
        for (old, d) in self.dims.iter().enumerate() {
            dims[perm[old]] = d.clone();
        }
        Self {
            trees: self.trees.iter().map(|t| t.permuted(perm)).collect(),
            dims,
            training_meta: self.training_meta.clone(),
        }
    }
}

/// Fits a forest on raw unit-cube rows.
pub fn fit_forest_xy(
    x: &[Vec<f64>],
    y: &[f64],
    dims: Vec<Dim>,
    params: &ForestParams,
    seed: u64,
    response: &str,
) -> Result<Forest, FanovaError> {
    if x.len() != y.len() {
        return Err(FanovaError::Shape);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FanovaError::NonFinite);
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(|a, b| a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(FanovaError::TooFewConfigs);
    }
    if params.n_trees == 0 || params.min_leaf == 0 || !(params.feature_frac > 0.0 && params.feature_frac <= 1.0) {
        return Err(FanovaError::BadParams);
    }
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::child_rng(seed, t as u64);
            let n = x.len();
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = Builder {
                x,
                y,
                dims: &dims,
                params,
                rng,
                nodes: Vec::new(),
            };
            let cell: Vec<Extent> = dims.iter().map(Dim::full_extent).collect();
            builder.grow(idx, cell, Vec::new(), 0);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Ok(Forest {
        trees,
        dims,
        training_meta: TrainingMeta {
            response: response.to_string(),
            n_trials: x.len(),
        },
    })
}

/// Forest dimensions matching a search space's unit encoding.
pub fn space_dims(space: &crate::SearchSpace) -> Vec<Dim> {
    space
        .params()
        .iter()
        .map(|p| match p.kind {
            crate::ParamKind::Categorical => Dim::categorical(&p.name, p.n_choices()),
            _ => Dim::continuous(&p.name),
        })
        .collect()
}

/// Fits a forest to a trial log's chosen response.
pub fn fit_forest(
    trials: &[crate::Trial],
    space: &crate::SearchSpace,
    response: Response,
    params: &ForestParams,
    seed: u64,
) -> Result<Forest, FanovaError> {
    let mut x = Vec::with_capacity(trials.len());
    let mut y = Vec::with_capacity(trials.len());
    for t in trials {
        x.push(space.to_unit(&t.config)?);
        y.push(
            response
                .extract(t)
                .ok_or_else(|| FanovaError::BadResponse(response.to_string()))?,
        );
    }
    fit_forest_xy(&x, &y, space_dims(space), params, seed, &response.to_string())
}

/// Keeps only the trials evaluated at the largest budget in the log.
pub fn full_budget_trials(trials: &[crate::Trial]) -> Vec<crate::Trial> {
    let max = trials.iter().map(|t| t.budget).fold(f64::NEG_INFINITY, f64::max);
    trials.iter().filter(|t| t.budget == max).cloned().collect()
}

struct Builder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    dims: &'a [Dim],
    params: &'a ForestParams,
    rng: R,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    dim: usize,
    split: Split,
    gain: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: Vec<usize>, cell: Vec<Extent>, path: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        let best = if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf || constant {
            None
        } else {
            self.best_split(&idx, &cell)
        };
        let Some(best) = best else {
            self.nodes.push(TreeNode::Leaf {
                prediction: if constant { self.y[idx[0]] } else { mean },
                cell,
                path_dims: path,
            });
            return at;
        };
        let (lc, rc) = split_cell(&cell, best.dim, &best.split, &self.dims[best.dim])
            .expect("candidate split is inside the node cell");
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| lc[best.dim].contains(&self.dims[best.dim], self.x[i][best.dim]));
        let mut path = path;
        if !path.contains(&best.dim) {
            path.push(best.dim);
        }
        self.nodes.push(TreeNode::Internal {
            dim: best.dim,
            split: best.split,
            left: 0,
            right: 0,
        });
        let l = self.grow(li, lc, path.clone(), depth + 1);
        let r = self.grow(ri, rc, path, depth + 1);
        if let TreeNode::Internal { left, right, .. } = &mut self.nodes[at] {
            *left = l;
            *right = r;
        }
        at
    }

    fn best_split(&mut self, idx: &[usize], cell: &[Extent]) -> Option<Candidate> {
        let d = self.dims.len();
        let m = ((d as f64 * self.params.feature_frac).ceil() as usize).clamp(1, d);
        let mut order: Vec<usize> = (0..d).collect();
        let (chosen, _) = order.partial_shuffle(&mut self.rng, m);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        let mut best: Option<Candidate> = None;
        for dim in chosen {
            let cand = match self.dims[dim].kind {
                DimKind::Continuous => self.split_continuous(idx, dim),
                DimKind::Categorical(_) => self.split_categorical(idx, dim, cell[dim]),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.gain > 1e-12)
    }

    fn split_continuous(&self, idx: &[usize], dim: usize) -> Option<Candidate> {
        let mut pts: Vec<(f64, f64)> = idx.iter().map(|&i| (self.x[i][dim], self.y[i])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pts.len();
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let min_leaf = self.params.min_leaf;
        let mut left_sum = 0.0;
        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            left_sum += pts[k].1;
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf || pts[k].0 == pts[k + 1].0 {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - total * total / n as f64;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    dim,
                    split: Split::Threshold(0.5 * (pts[k].0 + pts[k + 1].0)),
                    gain,
                });
            }
        }
        best
    }

    fn split_categorical(&self, idx: &[usize], dim: usize, ext: Extent) -> Option<Candidate> {
        let info = &self.dims[dim];
        let DimKind::Categorical(n_cat) = info.kind else { return None };
        let Extent::Choices(current) = ext else { return None };
        let mut sums = vec![0.0; n_cat];
        let mut counts = vec![0usize; n_cat];
        for &i in idx {
            let c = info.category(self.x[i][dim]);
            sums[c] += self.y[i];
            counts[c] += 1;
        }
        // order present categories by mean response; optimal for squared loss
        let mut present: Vec<usize> = (0..n_cat).filter(|&c| counts[c] > 0).collect();
        if present.len() < 2 {
            return None;
        }
        present.sort_by(|&a, &b| (sums[a] / counts[a] as f64).total_cmp(&(sums[b] / counts[b] as f64)).then(a.cmp(&b)));
        let n = idx.len();
        let total: f64 = sums.iter().sum();
        let mut left_sum = 0.0;
        let mut nl = 0;
        let mut mask = 0u64;
        let mut best: Option<Candidate> = None;
        for &c in &present[..present.len() - 1] {
            left_sum += sums[c];
            nl += counts[c];
            mask |= 1u64 << c;
            let nr = n - nl;
            if nl < self.params.min_leaf || nr < self.params.min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - total * total / n as f64;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    dim,
                    split: Split::Subset(mask & current),
                    gain,
                });
            }
        }
        best
    }
}
