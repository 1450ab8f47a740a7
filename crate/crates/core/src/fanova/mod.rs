//! Random-forest surrogate and functional ANOVA over the trial log.

mod decompose;
mod forest;

pub use decompose::{decompose, decompose_tree, TreeDecomposition};
pub use forest::{
    fit_forest, fit_forest_xy, full_budget_trials, space_dims, Dim, DimKind, Extent, Forest, ForestParams, Response,
    Split, TrainingMeta, Tree, TreeNode, TreeSpec,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperspace::SpaceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FanovaError {
    #[error("need at least 2 trials with distinct configurations")]
    TooFewConfigs,
    #[error("input rows and responses differ in length")]
    Shape,
    #[error("non-finite response or leaf value")]
    NonFinite,
    #[error("invalid forest parameters")]
    BadParams,
    #[error("unknown response selector `{0}`")]
    BadResponse(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("dimension index {0} out of range")]
    UnknownDim(usize),
    #[error("split on dimension {0} leaves an empty side")]
    EmptySplit(usize),
    #[error("marginal coordinates must be non-empty, distinct and within [0, 1]")]
    BadMarginal,
    #[error("pairwise marginal needs two distinct parameters and resolution >= 2")]
    BadPair,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamImportance {
    pub param: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairImportance {
    pub u: String,
    pub v: String,
    pub importance: f64,
}

/// Individual and pairwise variance fractions of one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub response: String,
    pub total_variance: f64,
    pub degenerate: bool,
    pub n_trees: usize,
    pub n_trees_used: usize,
    /// In parameter order.
    pub individual: Vec<ParamImportance>,
    /// Every unordered pair once, `u` before `v` in parameter order.
    pub pairwise: Vec<PairImportance>,
}

impl ImportanceReport {
    pub fn individual(&self, param: &str) -> Option<f64> {
        self.individual.iter().find(|p| p.param == param).map(|p| p.importance)
    }

    pub fn pairwise(&self, a: &str, b: &str) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|p| (p.u == a && p.v == b) || (p.u == b && p.v == a))
            .map(|p| p.importance)
    }

    pub fn total_fraction(&self) -> f64 {
        self.individual.iter().map(|p| p.importance).sum::<f64>() + self.pairwise.iter().map(|p| p.importance).sum::<f64>()
    }

    /// Rows `(param, F_u)` followed by `(param_u, param_v, F_uv)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,param_v,importance\n");
        for p in &self.individual {
            out.push_str(&format!("{},,{}\n", p.param, p.importance));
        }
        for p in &self.pairwise {
            out.push_str(&format!("{},{},{}\n", p.u, p.v, p.importance));
        }
        out
    }
}

/// Forest average over all completions of the fixed `(dimension, unit value)` pairs.
pub fn marginal_predict(forest: &Forest, fixed: &[(usize, f64)]) -> Result<f64, FanovaError> {
    if fixed.is_empty() {
        return Err(FanovaError::BadMarginal);
    }
    for (i, &(d, u)) in fixed.iter().enumerate() {
        if d >= forest.dims.len() {
            return Err(FanovaError::UnknownDim(d));
        }
        if !(0.0..=1.0).contains(&u) || fixed[..i].iter().any(|&(e, _)| e == d) {
            return Err(FanovaError::BadMarginal);
        }
    }
    let total: f64 = forest.trees.iter().map(|t| t.marginal(fixed, &forest.dims)).sum();
    Ok(total / forest.trees.len() as f64)
}

/// Named variant of [`marginal_predict`].
pub fn marginal_predict_named(forest: &Forest, fixed: &[(&str, f64)]) -> Result<f64, FanovaError> {
    let idx = fixed
        .iter()
        .map(|&(n, u)| {
            forest
                .dim_index(n)
                .map(|d| (d, u))
                .ok_or_else(|| FanovaError::UnknownParam(n.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    marginal_predict(forest, &idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalGrid {
    pub u: String,
    pub v: String,
    pub resolution: usize,
    /// Row-major over `theta_u`, each entry `(theta_u, theta_v, value)` in unit space.
    pub points: Vec<(f64, f64, f64)>,
}

impl MarginalGrid {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},marginal\n", self.u, self.v);
        for (a, b, m) in &self.points {
            out.push_str(&format!("{a},{b},{m}\n"));
        }
        out
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.points[i * self.resolution + j].2
    }
}

/// `resolution x resolution` grid of two-dimensional marginals, corners included.
pub fn pairwise_marginal_table(forest: &Forest, u: usize, v: usize, resolution: usize) -> Result<MarginalGrid, FanovaError> {
    if u == v || resolution < 2 {
        return Err(FanovaError::BadPair);
    }
    let d = forest.dims.len();
    if u >= d || v >= d {
        return Err(FanovaError::UnknownDim(u.max(v)));
    }
    let axis: Vec<f64> = (0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect();
    let mut points = Vec::with_capacity(resolution * resolution);
    for &a in &axis {
        for &b in &axis {
            points.push((a, b, marginal_predict(forest, &[(u, a), (v, b)])?));
        }
    }
    Ok(MarginalGrid {
        u: forest.dims[u].name.clone(),
        v: forest.dims[v].name.clone(),
        resolution,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEdge {
    pub u: String,
    pub v: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<InteractionEdge>,
    pub threshold: f64,
}

impl InteractionGraph {
    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.iter().any(|e| (e.u == a && e.v == b) || (e.u == b && e.v == a))
    }
}

/// Keeps the pairs whose pairwise importance reaches `threshold`; every parameter stays a node.
pub fn interaction_graph(report: &ImportanceReport, threshold: f64) -> InteractionGraph {
    InteractionGraph {
        nodes: report.individual.iter().map(|p| p.param.clone()).collect(),
        edges: report
            .pairwise
            .iter()
            .filter(|p| p.importance >= threshold)
            .map(|p| InteractionEdge {
                u: p.u.clone(),
                v: p.v.clone(),
                weight: p.importance,
            })
            .collect(),
        threshold,
    }
}
