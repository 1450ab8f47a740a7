//! Exact order-1 and order-2 variance decomposition of tree ensembles.
//!
//! A tree is piecewise constant, so every marginal is piecewise constant on
//! the cells induced by the tree's own split points. Integrals reduce to
//! weighted sums over those cells.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::forest::{Dim, DimKind, Forest, Split, Tree, TreeNode};
use super::{ImportanceReport, PairImportance, ParamImportance};

/// Cells of one dimension: representative coordinate and measure.
struct Cells {
    reps: Vec<f64>,
    weights: Vec<f64>,
}

fn dim_cells(tree: &Tree, dim: usize, info: &Dim) -> Cells {
    match info.kind {
        DimKind::Continuous => {
            let mut cuts: Vec<f64> = tree
                .nodes()
                .iter()
                .filter_map(|n| match n {
                    TreeNode::Internal {
                        dim: d,
                        split: Split::Threshold(t),
                        ..
                    } if *d == dim => Some(*t),
                    _ => None,
                })
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut bounds = Vec::with_capacity(cuts.len() + 2);
            bounds.push(0.0);
            bounds.extend(cuts);
            bounds.push(1.0);
            let reps = bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            let weights = bounds.windows(2).map(|w| w[1] - w[0]).collect();
            Cells { reps, weights }
        }
        DimKind::Categorical(n) => Cells {
            reps: (0..n).map(|c| c as f64 / (n - 1) as f64).collect(),
            weights: vec![1.0 / n as f64; n],
        },
    }
}

/// One tree's variance decomposition, as fractions of its total variance.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDecomposition {
    pub mean: f64,
    pub variance: f64,
    pub individual: Vec<f64>,
    /// Keyed by `(u, v)` with `u < v`; pairs absent from the map are exactly zero.
    pub pairwise: BTreeMap<(usize, usize), f64>,
}

impl TreeDecomposition {
    pub fn total_fraction(&self) -> f64 {
        self.individual.iter().sum::<f64>() + self.pairwise.values().sum::<f64>()
    }
}

struct LeafView<'a> {
    pred: f64,
    cell: &'a [super::forest::Extent],
    path: &'a [usize],
}

impl LeafView<'_> {
    fn volume(&self, dims: &[Dim]) -> f64 {
        let mut w = 1.0;
        for &d in self.path {
            w *= self.cell[d].size(&dims[d]);
        }
        w
    }

    fn weight_excluding(&self, skip: &[usize], dims: &[Dim]) -> f64 {
        let mut w = self.pred;
        for &d in self.path {
            if !skip.contains(&d) {
                w *= self.cell[d].size(&dims[d]);
            }
        }
        w
    }
}

/// Decomposes one tree; `None` when the tree is constant.
pub fn decompose_tree(tree: &Tree, dims: &[Dim]) -> Option<TreeDecomposition> {
    let leaves: Vec<LeafView> = tree
        .leaves()
        .map(|(pred, cell, path)| LeafView { pred, cell, path })
        .collect();
    let first = leaves[0].pred;
    if leaves.iter().all(|l| l.pred == first) {
        return None;
    }
    let mean: f64 = leaves.iter().map(|l| l.weight_excluding(&[], dims)).sum();
    let variance: f64 = leaves
        .iter()
        .map(|l| {
            let vol = l.volume(dims);
            vol * (l.pred - mean) * (l.pred - mean)
        })
        .sum();
    if variance <= 0.0 {
        return None;
    }

    // split dimensions in order of first appearance (preorder arena)
    let mut split_dims: Vec<usize> = Vec::new();
    for n in tree.nodes() {
        if let TreeNode::Internal { dim, .. } = n {
            if !split_dims.contains(dim) {
                split_dims.push(*dim);
            }
        }
    }

    let cells: BTreeMap<usize, Cells> = split_dims.iter().map(|&d| (d, dim_cells(tree, d, &dims[d]))).collect();
    // compat[d][leaf] = indices of d-cells inside the leaf's extent
    let compat: BTreeMap<usize, Vec<Vec<usize>>> = split_dims
        .iter()
        .map(|&d| {
            let c = &cells[&d];
            let per_leaf = leaves
                .iter()
                .map(|l| (0..c.reps.len()).filter(|&i| l.cell[d].contains(&dims[d], c.reps[i])).collect())
                .collect();
            (d, per_leaf)
        })
        .collect();

    let mut individual = vec![0.0; dims.len()];
    let mut main_effects: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &d in &split_dims {
        let c = &cells[&d];
        let mut m = vec![0.0; c.reps.len()];
        for (li, l) in leaves.iter().enumerate() {
            let w = l.weight_excluding(&[d], dims);
            for &i in &compat[&d][li] {
                m[i] += w;
            }
        }
        let f: Vec<f64> = m.iter().map(|v| v - mean).collect();
        let v_u: f64 = f.iter().zip(&c.weights).map(|(fi, wi)| wi * fi * fi).sum();
        individual[d] = (v_u / variance).max(0.0);
        main_effects.insert(d, f);
    }

    let mut pairwise = BTreeMap::new();
    for (a, &u) in split_dims.iter().enumerate() {
        for &v in &split_dims[a + 1..] {
            let (cu, cv) = (&cells[&u], &cells[&v]);
            let nv = cv.reps.len();
            let mut m = vec![0.0; cu.reps.len() * nv];
            for (li, l) in leaves.iter().enumerate() {
                let w = l.weight_excluding(&[u, v], dims);
                for &i in &compat[&u][li] {
                    for &j in &compat[&v][li] {
                        m[i * nv + j] += w;
                    }
                }
            }
            let (fu, fv) = (&main_effects[&u], &main_effects[&v]);
            let mut v_uv = 0.0;
            for i in 0..cu.reps.len() {
                for j in 0..nv {
                    let f = m[i * nv + j] - (fu[i] + fv[j]) - mean;
                    v_uv += (cu.weights[i] * cv.weights[j]) * f * f;
                }
            }
            let key = if u < v { (u, v) } else { (v, u) };
            pairwise.insert(key, (v_uv / variance).max(0.0));
        }
    }

    Some(TreeDecomposition {
        mean,
        variance,
        individual,
        pairwise,
    })
}

/// Averages per-tree variance fractions over the non-constant trees.
pub fn decompose(forest: &Forest) -> ImportanceReport {
    let per_tree: Vec<Option<TreeDecomposition>> = forest
        .trees
        .par_iter()
        .map(|t| decompose_tree(t, &forest.dims))
        .collect();
    let d = forest.dims.len();
    let used: Vec<&TreeDecomposition> = per_tree.iter().flatten().collect();
    let total_variance = per_tree.iter().map(|t| t.as_ref().map_or(0.0, |t| t.variance)).sum::<f64>() / forest.trees.len().max(1) as f64;

    let mut individual = vec![0.0; d];
    let mut pairwise = vec![vec![0.0; d]; d];
    for t in &used {
        for (acc, v) in individual.iter_mut().zip(&t.individual) {
            *acc += v;
        }
        for (&(u, v), val) in &t.pairwise {
            pairwise[u][v] += val;
        }
    }
    let k = used.len().max(1) as f64;
    ImportanceReport {
        response: forest.training_meta.response.clone(),
        total_variance,
        degenerate: used.is_empty(),
        n_trees: forest.trees.len(),
        n_trees_used: used.len(),
        individual: forest
            .dims
            .iter()
            .zip(&individual)
            .map(|(dim, v)| ParamImportance {
                param: dim.name.clone(),
                importance: (v / k).max(0.0),
            })
            .collect(),
        pairwise: (0..d)
            .flat_map(|u| (u + 1..d).map(move |v| (u, v)))
            .map(|(u, v)| PairImportance {
                u: forest.dims[u].name.clone(),
                v: forest.dims[v].name.clone(),
                importance: (pairwise[u][v] / k).max(0.0),
            })
            .collect(),
    }
}
