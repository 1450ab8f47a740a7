//! On-disk formats exchanged between stages.

use std::collections::BTreeMap;
use std::path::Path;

use dynbias::fanova::{ImportanceReport, MarginalGrid};
use dynbias::learner::ProtocolSummary;
use dynbias::sensors::{ingest_csv, segment_with, Dataset, Deployment, FoldAssignment, Frame, PlantedDgp, SegmentOptions, SensorModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::provenance::Provenance;

/// Deployment, planted ground truth and per-source sensor models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFile {
    pub deployment: Deployment,
    #[serde(flatten)]
    pub planted: PlantedDgp,
    #[serde(default)]
    pub sensor_models: BTreeMap<String, SensorModel>,
}

/// Fold assignment together with the segmentation that produced its frame ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldsFile {
    pub window_len: usize,
    pub stride: usize,
    pub max_gap_fraction: f64,
    pub assignment: FoldAssignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FoldsFile {
    pub fn segment(&self, dataset: &Dataset) -> Result<Vec<Frame>, dynbias::sensors::SensorError> {
        segment_with(
            dataset,
            self.window_len,
            self.stride,
            &SegmentOptions {
                max_gap_fraction: self.max_gap_fraction,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    /// Activity label for per-activity responses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
    #[serde(flatten)]
    pub report: ImportanceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFile {
    #[serde(flatten)]
    pub grid: MarginalGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    #[serde(flatten)]
    pub summary: ProtocolSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl MetricsFile {
    /// Confusion matrix summed over folds.
    pub fn pooled_confusion_csv(&self) -> String {
        let Some(first) = self.summary.per_fold.first() else {
            return String::new();
        };
        let n = first.classes.len();
        let mut total = vec![vec![0u64; n]; n];
        for m in &self.summary.per_fold {
            for (r, row) in m.confusion.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    total[r][c] += v;
                }
            }
        }
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            out.push_str(&p.csv_comment());
        }
        out.push_str(&format!("true\\pred,{}\n", first.classes.join(",")));
        for (cls, row) in first.classes.iter().zip(&total) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&format!("{cls},{}\n", cells.join(",")));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_imp: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub mean_subset_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub tau_int: f64,
    pub n_sources: usize,
    pub rows: Vec<SweepRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())? + "\n";
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Errors unless `path` exists.
pub fn require(path: &Path, what: &str) -> Result<(), String> {
    if path.exists() {
        Ok(())
    } else {
        Err(format!("missing {what}: {}", path.display()))
    }
}

/// Ingests a dataset directory and re-segments it as recorded in the folds file.
pub fn load_frames(data: &Path, folds: &FoldsFile) -> Result<(Dataset, Vec<Frame>), String> {
    require(&data.join("meta.json"), "dataset")?;
    let ds = ingest_csv(data).map_err(|e| format!("{}: {e}", data.display()))?;
    let frames = folds.segment(&ds).map_err(|e| e.to_string())?;
    if frames.len() != folds.assignment.folds.len() {
        return Err(format!(
            "fold assignment covers {} frames but segmentation yields {}",
            folds.assignment.folds.len(),
            frames.len()
        ));
    }
    Ok((ds, frames))
}

/// File-name friendly form of a label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
