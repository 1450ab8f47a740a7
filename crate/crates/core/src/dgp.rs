//! Source-level importance, interaction degrees and subset selection.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fanova::ImportanceReport;
use crate::hyperspace::SearchSpace;

/// Upper clip keeping importances inside the half-open unit interval.
pub const MU_CEILING: f64 = 1.0 - 1e-9;

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("search space has no source-tagged parameters")]
    EmptySourceMap,
    #[error("thresholds must lie in [0, 1), got tau_imp = {tau_imp}, tau_int = {tau_int}")]
    Thresholds { tau_imp: f64, tau_int: f64 },
    #[error("models disagree on {0}")]
    Mismatch(String),
    #[error("invalid model: {0}")]
    Schema(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceImportance {
    pub activity: String,
    pub mu: BTreeMap<String, f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDegrees {
    pub activity: String,
    /// Keyed by the lexicographically ordered source pair.
    pub degrees: BTreeMap<(String, String), f64>,
    pub degenerate: bool,
}

impl InteractionDegrees {
    pub fn degree(&self, a: &str, b: &str) -> f64 {
        let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.degrees.get(&key).copied().unwrap_or(0.0)
    }
}

fn source_of(space: &SearchSpace) -> Result<BTreeMap<&str, &str>, DgpError> {
    let mut out = BTreeMap::new();
    for s in space.sources() {
        for p in space.source_params(s).into_iter().flatten() {
            out.insert(p.as_str(), s);
        }
    }
    if out.is_empty() {
        return Err(DgpError::EmptySourceMap);
    }
    Ok(out)
}

/// Normalized share of individual plus within-source pairwise variance per source.
pub fn source_importance(report: &ImportanceReport, space: &SearchSpace) -> Result<SourceImportance, DgpError> {
    let owner = source_of(space)?;
    let mut raw: BTreeMap<String, f64> = space.sources().into_iter().map(|s| (s.to_string(), 0.0)).collect();
    for p in &report.individual {
        if let Some(s) = owner.get(p.param.as_str()) {
            *raw.get_mut(*s).expect("source listed") += p.importance;
        }
    }
    for p in &report.pairwise {
        if let (Some(a), Some(b)) = (owner.get(p.u.as_str()), owner.get(p.v.as_str())) {
            if a == b {
                *raw.get_mut(*a).expect("source listed") += p.importance;
            }
        }
    }
    let total: f64 = raw.values().sum();
    let degenerate = !(total > 0.0);
    let mu = raw
        .into_iter()
        .map(|(s, v)| (s, if degenerate { 0.0 } else { (v / total).min(MU_CEILING) }))
        .collect();
    Ok(SourceImportance {
        activity: report.response.clone(),
        mu,
        degenerate,
    })
}

/// Cross-source pairwise variance fractions summed per source pair.
///
/// Degrees stay fractions of the response variance, so an additive response
/// has degrees near zero whatever the number of sources.
pub fn source_interactions(report: &ImportanceReport, space: &SearchSpace) -> Result<InteractionDegrees, DgpError> {
    let owner = source_of(space)?;
    let mut mass: BTreeMap<(String, String), f64> = BTreeMap::new();
    for p in &report.pairwise {
        if let (Some(a), Some(b)) = (owner.get(p.u.as_str()), owner.get(p.v.as_str())) {
            if a != b {
                let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
                *mass.entry(key).or_default() += p.importance;
            }
        }
    }
    if !(mass.values().sum::<f64>() > 0.0) {
        return Ok(InteractionDegrees {
            activity: report.response.clone(),
            degrees: BTreeMap::new(),
            degenerate: true,
        });
    }
    Ok(InteractionDegrees {
        activity: report.response.clone(),
        degrees: mass.into_iter().map(|(k, v)| (k, v.clamp(0.0, 1.0))).collect(),
        degenerate: false,
    })
}

fn check_thresholds(tau_imp: f64, tau_int: f64) -> Result<(), DgpError> {
    let ok = |t: f64| (0.0..1.0).contains(&t);
    if ok(tau_imp) && ok(tau_int) {
        Ok(())
    } else {
        Err(DgpError::Thresholds { tau_imp, tau_int })
    }
}

/// Sources with `mu >= tau_imp`, closed under interaction degree `>= tau_int` (and `> 0`).
pub fn select_subset(mu: &BTreeMap<String, f64>, interactions: &BTreeMap<(String, String), f64>, tau_imp: f64, tau_int: f64) -> BTreeSet<String> {
    let mut selected: BTreeSet<String> = mu.iter().filter(|(_, &v)| v >= tau_imp).map(|(s, _)| s.clone()).collect();
    loop {
        let mut grew = false;
        for ((a, b), &d) in interactions {
            if d > 0.0 && d >= tau_int {
                if selected.contains(a) && !selected.contains(b) {
                    selected.insert(b.clone());
                    grew = true;
                } else if selected.contains(b) && !selected.contains(a) {
                    selected.insert(a.clone());
                    grew = true;
                }
            }
        }
        if !grew {
            return selected;
        }
    }
}

pub fn select_subsets(
    importances: &[SourceImportance],
    interactions: &[InteractionDegrees],
    tau_imp: f64,
    tau_int: f64,
) -> Result<BTreeMap<String, BTreeSet<String>>, DgpError> {
    check_thresholds(tau_imp, tau_int)?;
    importances
        .iter()
        .map(|imp| {
            let inter = interactions
                .iter()
                .find(|i| i.activity == imp.activity)
                .map(|i| i.degrees.clone())
                .unwrap_or_default();
            Ok((imp.activity.clone(), select_subset(&imp.mu, &inter, tau_imp, tau_int)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityDgp {
    #[serde(default)]
    pub mu: BTreeMap<String, f64>,
    /// `(a, b, degree)` with `a < b`.
    #[serde(default)]
    pub interactions: Vec<(String, String, f64)>,
    pub subset: BTreeSet<String>,
}

impl ActivityDgp {
    /// True when no importance values were supplied.
    pub fn is_degenerate(&self) -> bool {
        self.mu.is_empty() || self.mu.values().all(|&v| v == 0.0)
    }

    fn interaction_map(&self) -> BTreeMap<(String, String), f64> {
        self.interactions
            .iter()
            .map(|(a, b, d)| {
                let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                (key, *d)
            })
            .collect()
    }
}

/// Per-activity source structure and the subsets it selects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpModel {
    pub activities: Vec<String>,
    pub per_activity: BTreeMap<String, ActivityDgp>,
    #[serde(default)]
    pub tau_imp: f64,
    #[serde(default)]
    pub tau_int: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl DgpModel {
    /// Builds the model from `(activity, report)` pairs of per-activity responses.
    pub fn from_reports(reports: &[(String, ImportanceReport)], space: &SearchSpace, tau_imp: f64, tau_int: f64) -> Result<Self, DgpError> {
        check_thresholds(tau_imp, tau_int)?;
        let mut per_activity = BTreeMap::new();
        for (label, report) in reports {
            let imp = source_importance(report, space)?;
            let inter = source_interactions(report, space)?;
            let subset = select_subset(&imp.mu, &inter.degrees, tau_imp, tau_int);
            per_activity.insert(
                label.clone(),
                ActivityDgp {
                    mu: imp.mu,
                    interactions: inter.degrees.into_iter().map(|((a, b), d)| (a, b, d)).collect(),
                    subset,
                },
            );
        }
        Ok(Self {
            activities: reports.iter().map(|(l, _)| l.clone()).collect(),
            per_activity,
            tau_imp,
            tau_int,
            provenance: None,
        })
    }

    /// Recomputes every subset under new thresholds.
    pub fn with_thresholds(&self, tau_imp: f64, tau_int: f64) -> Result<Self, DgpError> {
        check_thresholds(tau_imp, tau_int)?;
        let mut out = self.clone();
        out.tau_imp = tau_imp;
        out.tau_int = tau_int;
        for a in out.per_activity.values_mut() {
            a.subset = select_subset(&a.mu, &a.interaction_map(), tau_imp, tau_int);
        }
        Ok(out)
    }

    pub fn subsets(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.per_activity.iter().map(|(k, v)| (k.clone(), v.subset.clone())).collect()
    }

    pub fn mean_subset_size(&self) -> f64 {
        let n = self.per_activity.len().max(1) as f64;
        self.per_activity.values().map(|a| a.subset.len() as f64).sum::<f64>() / n
    }

    /// Sources mentioned anywhere in the model.
    pub fn sources(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in self.per_activity.values() {
            out.extend(a.mu.keys().cloned());
            out.extend(a.subset.iter().cloned());
            for (x, y, _) in &a.interactions {
                out.insert(x.clone());
                out.insert(y.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), DgpError> {
        check_thresholds(self.tau_imp, self.tau_int).map_err(|e| DgpError::Schema(e.to_string()))?;
        let listed: BTreeSet<&String> = self.activities.iter().collect();
        let keyed: BTreeSet<&String> = self.per_activity.keys().collect();
        if listed != keyed || listed.len() != self.activities.len() {
            return Err(DgpError::Schema("`activities` must list each `per_activity` key once".into()));
        }
        for (label, a) in &self.per_activity {
            if a.mu.values().any(|v| !(0.0..1.0).contains(v)) {
                return Err(DgpError::Schema(format!("`{label}`: mu values must lie in [0, 1)")));
            }
            if a.interactions.iter().any(|(_, _, d)| !(0.0..=1.0).contains(d)) {
                return Err(DgpError::Schema(format!("`{label}`: interaction degrees must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DgpError> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), DgpError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Reads a hand-authored model; only `activities` and each `subset` are required.
pub fn load_hexp(path: &Path) -> Result<DgpModel, DgpError> {
    DgpModel::from_json(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub per_activity: BTreeMap<String, f64>,
    pub mean: f64,
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Per-activity Jaccard index between the subsets of two models.
pub fn agreement(a: &DgpModel, b: &DgpModel) -> Result<Agreement, DgpError> {
    let la: BTreeSet<&String> = a.activities.iter().collect();
    let lb: BTreeSet<&String> = b.activities.iter().collect();
    if la != lb {
        return Err(DgpError::Mismatch("activities".into()));
    }
    let (sa, sb) = (a.sources(), b.sources());
    let declares = |m: &DgpModel| m.per_activity.values().any(|x| !x.mu.is_empty());
    if declares(a) && declares(b) && sa != sb {
        return Err(DgpError::Mismatch("source universe".into()));
    }
    let per_activity: BTreeMap<String, f64> = a
        .activities
        .iter()
        .map(|y| (y.clone(), jaccard(&a.per_activity[y].subset, &b.per_activity[y].subset)))
        .collect();
    let mean = per_activity.values().sum::<f64>() / per_activity.len().max(1) as f64;
    Ok(Agreement { per_activity, mean })
}
