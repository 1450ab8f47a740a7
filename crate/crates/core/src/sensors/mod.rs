//! Synthetic and recorded multi-source sensor data.

mod generate;
mod io;
mod segment;
mod thermocouple;

pub use generate::{generate, GenerateOptions};
pub use io::{ingest_csv, write_dataset, DatasetMeta, NULL_LABEL};
pub use segment::{
    meta_segment_partition, moving_average, segment, segment_with, stride_from_fraction, FoldAssignment, Frame,
    SegmentOptions,
};
pub use thermocouple::{thermocouple_transfer, THERMOCOUPLE_COEFFS, THERMOCOUPLE_RANGE};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("value {value} outside [{lower}, {upper}]")]
    OutOfRange { value: f64, lower: f64, upper: f64 },
    #[error("invalid deployment: {0}")]
    Deployment(String),
    #[error("invalid planted model: {0}")]
    Planted(String),
    #[error("invalid sensor model for `{source_id}`: {message}")]
    SensorModel { source_id: String, message: String },
    #[error("invalid segmentation: {0}")]
    Segmentation(String),
    #[error("need at least {k} frames, got {n}")]
    TooFewFrames { k: usize, n: usize },
    #[error("fewer runs than folds ({runs} < {k})")]
    FewerRunsThanFolds { runs: usize, k: usize },
    #[error("k must be >= 2 and meta_len >= 1")]
    BadPartition,
    #[error("missing position file {0}")]
    MissingPosition(String),
    #[error("{file}:{line}: {message}")]
    Csv { file: String, line: u64, message: String },
    #[error("{file}: unknown label `{label}` at line {line}")]
    UnknownLabel { file: String, line: u64, label: String },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One `(position, modality)` stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSource {
    pub id: String,
    pub position: String,
    pub modality: String,
    pub channels: usize,
}

impl DataSource {
    pub fn new(position: &str, modality: &str, channels: usize) -> Self {
        Self {
            id: format!("{position}-{modality}"),
            position: position.to_string(),
            modality: modality.to_string(),
            channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub sources: Vec<DataSource>,
    pub sampling_rate: f64,
}

impl Deployment {
    /// Every position carries every modality.
    pub fn grid(positions: &[&str], modalities: &[&str], channels: usize, sampling_rate: f64) -> Self {
        let sources = positions
            .iter()
            .flat_map(|p| modalities.iter().map(move |m| DataSource::new(p, m, channels)))
            .collect();
        Self { sources, sampling_rate }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: String| Err(SensorError::Deployment(m));
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return bad("sampling_rate must be positive".into());
        }
        if self.sources.is_empty() {
            return bad("at least one source is required".into());
        }
        let mut ids = BTreeSet::new();
        let mut slots = BTreeSet::new();
        for s in &self.sources {
            if s.channels == 0 {
                return bad(format!("source `{}` has no channels", s.id));
            }
            if s.id.is_empty() || s.id.contains(',') || s.position.contains(',') || s.position.is_empty() {
                return bad(format!("source `{}`: ids and positions must be non-empty and comma-free", s.id));
            }
            if !ids.insert(s.id.as_str()) {
                return bad(format!("duplicate source id `{}`", s.id));
            }
            if !slots.insert((s.position.as_str(), s.modality.as_str())) {
                return bad(format!("duplicate position/modality `{}`/`{}`", s.position, s.modality));
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.sources.iter().map(|s| s.channels).sum()
    }

    /// Source index of every channel, in channel order.
    pub fn channel_sources(&self) -> Vec<usize> {
        self.sources
            .iter()
            .enumerate()
            .flat_map(|(i, s)| std::iter::repeat_n(i, s.channels))
            .collect()
    }

    /// Channel index range of a source.
    pub fn channel_range(&self, source: usize) -> std::ops::Range<usize> {
        let start: usize = self.sources[..source].iter().map(|s| s.channels).sum();
        start..start + self.sources[source].channels
    }

    pub fn source_index(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.id == id)
    }

    /// Positions in first-appearance order.
    pub fn positions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.sources {
            if !out.contains(&s.position.as_str()) {
                out.push(&s.position);
            }
        }
        out
    }

    pub fn modalities(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.sources {
            if !out.contains(&s.modality.as_str()) {
                out.push(&s.modality);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    #[default]
    Linear,
    /// Clean signal read as a temperature in degrees Celsius, clamped to the valid range.
    Thermocouple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub gain: f64,
    pub offset: f64,
    pub noise_sigma: f64,
    pub drift_per_second: f64,
    pub dropout_prob: f64,
    pub transfer: Transfer,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            gain: 1.0,
            offset: 0.0,
            noise_sigma: 0.0,
            drift_per_second: 0.0,
            dropout_prob: 0.0,
            transfer: Transfer::Linear,
        }
    }
}

impl SensorModel {
    pub fn validate(&self, source_id: &str) -> Result<(), SensorError> {
        let msg = if !(self.noise_sigma >= 0.0) {
            "noise_sigma must be >= 0"
        } else if !(0.0..1.0).contains(&self.dropout_prob) {
            "dropout_prob must lie in [0, 1)"
        } else if ![self.gain, self.offset, self.drift_per_second].iter().all(|v| v.is_finite()) {
            "gain, offset and drift must be finite"
        } else {
            return Ok(());
        };
        Err(SensorError::SensorModel {
            source_id: source_id.to_string(),
            message: msg.to_string(),
        })
    }

    /// Measurement of a clean value at time `t` seconds, before noise and dropout.
    pub fn respond(&self, clean: f64, t: f64) -> f64 {
        let x = match self.transfer {
            Transfer::Linear => clean,
            Transfer::Thermocouple => {
                let (lo, hi) = THERMOCOUPLE_RANGE;
                thermocouple_transfer(clean.clamp(lo, hi)).expect("clamped into range")
            }
        };
        self.gain * x + self.offset + self.drift_per_second * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub base_freq: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedActivity {
    pub label: String,
    /// Informative source id to its signal.
    pub informative: BTreeMap<String, SignalSpec>,
}

/// Ground truth: which sources carry each activity's signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDgp {
    pub activities: Vec<PlantedActivity>,
    /// Standard deviation of the noise on non-informative channels.
    pub distractor_sigma: f64,
    /// Half-width of the uniform per-frame phase jitter, radians.
    #[serde(default)]
    pub phase_jitter: f64,
}

impl PlantedDgp {
    pub fn labels(&self) -> Vec<String> {
        self.activities.iter().map(|a| a.label.clone()).collect()
    }

    /// Informative source ids per activity label.
    pub fn subsets(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.activities
            .iter()
            .map(|a| (a.label.clone(), a.informative.keys().cloned().collect()))
            .collect()
    }

    pub fn validate(&self, deployment: &Deployment) -> Result<(), SensorError> {
        let bad = |m: String| Err(SensorError::Planted(m));
        if self.activities.is_empty() {
            return bad("no activities".into());
        }
        if !(self.distractor_sigma >= 0.0 && self.phase_jitter >= 0.0) {
            return bad("distractor_sigma and phase_jitter must be >= 0".into());
        }
        let mut labels = BTreeSet::new();
        for a in &self.activities {
            if a.label.is_empty() || a.label == NULL_LABEL || a.label.contains(',') {
                return bad(format!("invalid activity label `{}`", a.label));
            }
            if !labels.insert(&a.label) {
                return bad(format!("duplicate activity `{}`", a.label));
            }
            if a.informative.is_empty() {
                return bad(format!("activity `{}` has no informative source", a.label));
            }
            for (src, sig) in &a.informative {
                if deployment.source_index(src).is_none() {
                    return bad(format!("activity `{}`: unknown source `{src}`", a.label));
                }
                if !(sig.base_freq >= 0.0 && sig.amplitude.is_finite() && sig.phase.is_finite()) {
                    return bad(format!("activity `{}`: invalid signal for `{src}`", a.label));
                }
            }
        }
        Ok(())
    }
}

/// Continuous multi-channel stream with per-sample labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    /// Channel-major; `NaN` marks a lost sample.
    pub channels: Vec<Vec<f64>>,
    /// Activity index per sample, `None` for the null class.
    pub labels: Vec<Option<usize>>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub deployment: Deployment,
    pub activities: Vec<String>,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.recordings.iter().map(|r| r.len()).sum()
    }

    pub fn activity_index(&self, label: &str) -> Option<usize> {
        self.activities.iter().position(|a| a == label)
    }
}
