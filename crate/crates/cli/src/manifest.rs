//! Pipeline manifest: input and output paths, stage seeds, toggles and per-stage settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dynbias::explorer::Strategy;
use dynbias::fanova::ForestParams;
use dynbias::learner::{ModelConfig, ProtocolOptions};
use dynbias::seed;
use dynbias::sensors::GenerateOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const STAGES: [&str; 7] = ["generate", "partition", "explore", "analyze", "dgp", "train", "report"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub space: PathBuf,
    pub planted: PathBuf,
    pub hexp: Option<PathBuf>,
    pub data: PathBuf,
    pub folds: PathBuf,
    pub trials: PathBuf,
    pub reports: PathBuf,
    pub dgp: PathBuf,
    pub metrics: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            space: "space.json".into(),
            planted: "planted.json".into(),
            hexp: None,
            data: "out/data".into(),
            folds: "out/folds.json".into(),
            trials: "out/trials.jsonl".into(),
            reports: "out/reports".into(),
            dgp: "out/dgp.json".into(),
            metrics: "out/metrics".into(),
            report: "out/report".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub generate: u64,
    pub partition: u64,
    pub explore: u64,
    pub analyze: u64,
    pub train: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            generate: 7,
            partition: 1,
            explore: 42,
            analyze: 5,
            train: 3,
        }
    }
}

impl Seeds {
    /// Stage seeds derived from one base seed.
    pub fn from_base(base: u64) -> Self {
        Self {
            generate: seed::derive(base, 0),
            partition: seed::derive(base, 1),
            explore: seed::derive(base, 2),
            analyze: seed::derive(base, 3),
            train: seed::derive(base, 4),
        }
    }

    pub fn to_map(&self) -> BTreeMap<String, u64> {
        [
            ("generate", self.generate),
            ("partition", self.partition),
            ("explore", self.explore),
            ("analyze", self.analyze),
            ("train", self.train),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub generate: bool,
    pub partition: bool,
    pub explore: bool,
    pub analyze: bool,
    pub dgp: bool,
    pub train: bool,
    pub report: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            generate: true,
            partition: true,
            explore: true,
            analyze: true,
            dgp: true,
            train: true,
            report: true,
        }
    }
}

impl Toggles {
    pub fn enabled(&self, stage: &str) -> bool {
        match stage {
            "generate" => self.generate,
            "partition" => self.partition,
            "explore" => self.explore,
            "analyze" => self.analyze,
            "dgp" => self.dgp,
            "train" => self.train,
            "report" => self.report,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSettings {
    /// Defaults to the generated window length.
    pub window: Option<usize>,
    /// Defaults to the window (no overlap).
    pub stride: Option<usize>,
    pub max_gap_fraction: f64,
    pub k: usize,
    pub meta_len: usize,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        Self {
            window: None,
            stride: None,
            max_gap_fraction: 0.1,
            k: 5,
            meta_len: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSettings {
    pub strategy: Strategy,
    pub budget: usize,
    pub holdout: usize,
}

impl Default for ExploreSettings {
    fn default() -> Self {
        Self {
            strategy: Strategy::Random,
            budget: 100,
            holdout: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSettings {
    pub forest: ForestParams,
    /// Explicit parameter pairs for marginal heat maps.
    pub pairs: Vec<(String, String)>,
    /// Strongest interacting pairs plotted when `pairs` is empty.
    pub top_pairs: usize,
    pub resolution: usize,
}

impl Default for AnalyzeSettings {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            pairs: Vec::new(),
            top_pairs: 2,
            resolution: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpSettings {
    pub tau_imp: f64,
    pub tau_int: f64,
}

impl Default for DgpSettings {
    fn default() -> Self {
        Self { tau_imp: 0.3, tau_int: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub tau_sweep: Vec<f64>,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            tau_sweep: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Manifest {
    pub paths: Paths,
    pub seeds: Seeds,
    pub stages: Toggles,
    pub generate: GenerateOptions,
    pub partition: PartitionSettings,
    pub explore: ExploreSettings,
    pub model: ModelConfig,
    pub analyze: AnalyzeSettings,
    pub dgp: DgpSettings,
    pub train: ProtocolOptions,
    pub report: ReportSettings,
}

impl Manifest {
    /// Parses a manifest and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("manifest {}: {e}", path.display())))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        m.validate()?;
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.space,
            &mut p.planted,
            &mut p.data,
            &mut p.folds,
            &mut p.trials,
            &mut p.reports,
            &mut p.dgp,
            &mut p.metrics,
            &mut p.report,
        ] {
            if slot.is_relative() {
                *slot = base.join(&*slot);
            }
        }
        if let Some(h) = &mut p.hexp {
            if h.is_relative() {
                *h = base.join(&*h);
            }
        }
    }

    /// Settings checks and presence of the user-supplied inputs.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.paths;
        let mut inputs = vec![("space", &p.space), ("planted", &p.planted)];
        if let Some(h) = &p.hexp {
            inputs.push(("hexp", h));
        }
        for (what, path) in inputs {
            if !path.is_file() {
                return Err(CliError::invalid(format!("stage 0: missing {what} file {}", path.display())));
            }
        }
        self.explore.strategy.validate().map_err(|e| CliError::invalid(format!("explore strategy: {e}")))?;
        self.model.validate().map_err(|e| CliError::invalid(format!("model: {e}")))?;
        let ok = |t: f64| (0.0..1.0).contains(&t);
        if !ok(self.dgp.tau_imp) || !ok(self.dgp.tau_int) || !self.report.tau_sweep.iter().all(|&t| ok(t)) {
            return Err(CliError::invalid("thresholds must lie in [0, 1)"));
        }
        if self.partition.k < 2 || self.partition.meta_len == 0 {
            return Err(CliError::invalid("partition needs k >= 2 and meta_len >= 1"));
        }
        if self.explore.holdout >= self.partition.k {
            return Err(CliError::invalid("explore holdout fold must be < k"));
        }
        Ok(())
    }
}
