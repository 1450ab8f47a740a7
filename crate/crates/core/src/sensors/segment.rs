//! Sliding-window segmentation and meta-segmented fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, SensorError};
use crate::seed;

/// One window of all channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: u64,
    pub recording: usize,
    /// Start sample within the recording.
    pub time_index: usize,
    /// Majority activity, `None` when the null class wins.
    pub label: Option<usize>,
    /// Channel-major, gaps filled.
    pub samples: Vec<Vec<f64>>,
    pub gap_fraction: f64,
}

impl Frame {
    pub fn is_null(&self) -> bool {
        self.label.is_none()
    }

    pub fn window_len(&self) -> usize {
        self.samples.first().map_or(0, |c| c.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentOptions {
    /// Frames with a larger share of lost samples are dropped.
    pub max_gap_fraction: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self { max_gap_fraction: 0.1 }
    }
}

/// Stride in samples for a stride expressed as a fraction of the window.
pub fn stride_from_fraction(fraction: f64, window_len: usize) -> usize {
    ((fraction * window_len as f64).round() as usize).max(1)
}

pub fn segment(dataset: &Dataset, window_len: usize, stride: usize) -> Result<Vec<Frame>, SensorError> {
    segment_with(dataset, window_len, stride, &SegmentOptions::default())
}

fn majority(labels: &[Option<usize>]) -> Option<usize> {
    let mut counts: BTreeMap<Option<usize>, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    // ties go to the smallest key, with null first
    let mut best = (None, 0);
    for (k, c) in counts {
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0
}

/// Fills gaps with the last valid sample, or the next one at the start.
fn fill_gaps(x: &[f64]) -> Vec<f64> {
    let first = x.iter().copied().find(|v| !v.is_nan()).unwrap_or(0.0);
    let mut last = first;
    x.iter()
        .map(|&v| {
            if v.is_nan() {
                last
            } else {
                last = v;
                v
            }
        })
        .collect()
}

pub fn segment_with(dataset: &Dataset, window_len: usize, stride: usize, options: &SegmentOptions) -> Result<Vec<Frame>, SensorError> {
    if window_len == 0 || stride == 0 || stride > window_len {
        return Err(SensorError::Segmentation("need 0 < stride <= window_len".into()));
    }
    if dataset.recordings.iter().all(|r| r.len() < window_len) {
        return Err(SensorError::Segmentation(format!("window {window_len} exceeds every recording")));
    }
    let mut frames = Vec::new();
    let mut next_id = 0u64;
    for (r, rec) in dataset.recordings.iter().enumerate() {
        if rec.len() < window_len {
            continue;
        }
        let n_frames = (rec.len() - window_len) / stride + 1;
        for f in 0..n_frames {
            let start = f * stride;
            let span = start..start + window_len;
            let gaps = rec.channels.iter().map(|c| c[span.clone()].iter().filter(|v| v.is_nan()).count()).sum::<usize>();
            let gap_fraction = gaps as f64 / (window_len * rec.channels.len().max(1)) as f64;
            let id = next_id;
            next_id += 1;
            if gap_fraction > options.max_gap_fraction {
                continue;
            }
            frames.push(Frame {
                frame_id: id,
                recording: r,
                time_index: start,
                label: majority(&rec.labels[span.clone()]),
                samples: rec.channels.iter().map(|c| fill_gaps(&c[span.clone()])).collect(),
                gap_fraction,
            });
        }
    }
    Ok(frames)
}

/// Causal moving average of width `width` on every channel; gaps stay gaps.
pub fn moving_average(dataset: &Dataset, width: usize) -> Dataset {
    let width = width.max(1);
    let mut out = dataset.clone();
    for rec in &mut out.recordings {
        for ch in &mut rec.channels {
            let src = ch.clone();
            for (t, v) in ch.iter_mut().enumerate() {
                if v.is_nan() {
                    continue;
                }
                let window = &src[t + 1 - (t + 1).min(width)..=t];
                let valid: Vec<f64> = window.iter().copied().filter(|x| !x.is_nan()).collect();
                *v = valid.iter().sum::<f64>() / valid.len() as f64;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub meta_len: usize,
    pub seed: u64,
    /// Frame id to fold index.
    pub folds: BTreeMap<u64, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, frame_id: u64) -> Option<usize> {
        self.folds.get(&frame_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.folds.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Positions in `frames` of the training and held-out frames for `fold`.
    pub fn split(&self, frames: &[Frame], fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            match self.fold_of(f.frame_id) {
                Some(k) if k == fold => test.push(i),
                Some(_) => train.push(i),
                None => {}
            }
        }
        (train, test)
    }
}

/// Groups adjacent frames of each recording into runs of `meta_len` and deals the
/// shuffled runs to the least-loaded fold, largest runs first.
pub fn meta_segment_partition(frames: &[Frame], k: usize, meta_len: usize, seed_value: u64) -> Result<FoldAssignment, SensorError> {
    if k < 2 || meta_len == 0 {
        return Err(SensorError::BadPartition);
    }
    if frames.len() < k {
        return Err(SensorError::TooFewFrames { k, n: frames.len() });
    }
    let mut by_rec: BTreeMap<usize, Vec<&Frame>> = BTreeMap::new();
    for f in frames {
        by_rec.entry(f.recording).or_default().push(f);
    }
    let mut runs: Vec<Vec<u64>> = Vec::new();
    for recs in by_rec.values_mut() {
        recs.sort_by_key(|f| (f.time_index, f.frame_id));
        for chunk in recs.chunks(meta_len) {
            runs.push(chunk.iter().map(|f| f.frame_id).collect());
        }
    }
    if runs.len() < k {
        return Err(SensorError::FewerRunsThanFolds { runs: runs.len(), k });
    }
    runs.shuffle(&mut seed::rng(seed_value));
    runs.sort_by_key(|r| std::cmp::Reverse(r.len()));
    let mut load = vec![0usize; k];
    let mut folds = BTreeMap::new();
    for (i, run) in runs.iter().enumerate() {
        let target = if i < k {
            i
        } else {
            (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 2")
        };
        load[target] += run.len();
        for &id in run {
            folds.insert(id, target);
        }
    }
    Ok(FoldAssignment {
        k,
        meta_len,
        seed: seed_value,
        folds,
    })
}
