//! Desk-scale multimodal activity classifier, metrics and evaluation protocols.

mod features;
mod network;

pub use features::{channel_stats, channel_std, periodogram_power, EncoderKind, InputEncoder};
pub use network::{channel_groups, softmax, Cache, LayerShape, Network};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explorer::{EvalError, Evaluator, Outcome};
use crate::hyperspace::{Configuration, ParamValue, SOURCE_SWITCH_PREFIX};
use crate::sensors::{Deployment, FoldAssignment, Frame, NULL_LABEL};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("block {block}: kernel {kernel} larger than input length {length}")]
    KernelTooLarge { block: usize, kernel: usize, length: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no training frame for activity `{0}`")]
    MissingActivity(String),
    #[error("unknown source `{0}` in subsets")]
    UnknownSource(String),
    #[error("unknown activity `{0}` in subsets")]
    UnknownActivity(String),
    #[error("mode {0} requires a data generation model")]
    MissingDgp(String),
    #[error("no frames")]
    NoFrames,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    GroupedModalities,
    /// One convolution stack per data source.
    SplitModalities,
    SplitChannels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    SoftmaxLinear,
    Mlp,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub conv_mode: ConvMode,
    pub n_conv_blocks: usize,
    pub kernel_sizes: [usize; 3],
    pub n_filters: usize,
    pub stride_fraction: f64,
    pub dropout: f64,
    pub dense_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub activation: Activation,
    pub head: Head,
    pub batch_size: usize,
    pub momentum: f64,
    /// Recurrent-head settings; parsed and ignored.
    pub n_hu1: Option<f64>,
    pub n_hu2: Option<f64>,
    pub p_in: Option<f64>,
    pub p_ou: Option<f64>,
    pub p_st: Option<f64>,
    /// Sources whose inputs are zeroed.
    pub disabled_sources: BTreeSet<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_mode: ConvMode::GroupedModalities,
            n_conv_blocks: 1,
            kernel_sizes: [9, 9, 9],
            n_filters: 16,
            stride_fraction: 0.5,
            dropout: 0.1,
            dense_units: 64,
            learning_rate: 0.01,
            epochs: 30,
            activation: Activation::Relu,
            head: Head::SoftmaxLinear,
            batch_size: 16,
            momentum: 0.9,
            n_hu1: None,
            n_hu2: None,
            p_in: None,
            p_ou: None,
            p_st: None,
            disabled_sources: BTreeSet::new(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let fail = |m: &str| Err(LearnerError::Config(m.to_string()));
        if self.n_conv_blocks > 3 {
            return fail("n_conv_blocks must be in 0..=3");
        }
        if self.kernel_sizes[..self.n_conv_blocks].contains(&0) || (self.n_conv_blocks > 0 && self.n_filters == 0) {
            return fail("kernel sizes and n_filters must be >= 1");
        }
        if !(self.stride_fraction > 0.0 && self.stride_fraction.is_finite()) {
            return fail("stride fraction must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if self.head == Head::Mlp && self.dense_units == 0 {
            return fail("dense_units must be >= 1");
        }
        if self.head == Head::Hybrid {
            return fail("the hybrid recurrent head is not supported");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || self.batch_size == 0 {
            return fail("learning_rate must be positive and batch_size >= 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must lie in [0, 1)");
        }
        Ok(())
    }

    /// Overrides fields from a sampled configuration; `use.<source>` switches set to `off` disable sources.
    pub fn with_configuration(&self, config: &Configuration) -> Result<Self, LearnerError> {
        let mut out = self.clone();
        for (name, value) in &config.values {
            let num = || value.as_f64().ok_or_else(|| LearnerError::Config(format!("`{name}` must be numeric")));
            let count = || num().map(|v| v.round().max(0.0) as usize);
            match name.as_str() {
                "lr" | "learning_rate" => out.learning_rate = num()?,
                "ks1" => out.kernel_sizes[0] = count()?,
                "ks2" => out.kernel_sizes[1] = count()?,
                "ks3" => out.kernel_sizes[2] = count()?,
                "n_f" => out.n_filters = count()?,
                "s" => out.stride_fraction = num()?,
                "p_d" => out.dropout = num()?,
                "n_u" => out.dense_units = count()?,
                "n_hu1" => out.n_hu1 = Some(num()?),
                "n_hu2" => out.n_hu2 = Some(num()?),
                "p_in" => out.p_in = Some(num()?),
                "p_ou" => out.p_ou = Some(num()?),
                "p_st" => out.p_st = Some(num()?),
                "n_conv_blocks" => out.n_conv_blocks = count()?,
                "epochs" => out.epochs = count()?,
                "batch_size" => out.batch_size = count()?,
                "conv_mode" | "head" | "activation" => {
                    let text = value
                        .as_choice()
                        .ok_or_else(|| LearnerError::Config(format!("`{name}` must be a choice")))?;
                    let v = serde_json::Value::String(text.to_string());
                    let bad = |_| LearnerError::Config(format!("`{name}` = `{text}`"));
                    match name.as_str() {
                        "conv_mode" => out.conv_mode = serde_json::from_value(v).map_err(bad)?,
                        "head" => out.head = serde_json::from_value(v).map_err(bad)?,
                        _ => out.activation = serde_json::from_value(v).map_err(bad)?,
                    }
                }
                other => match other.strip_prefix(SOURCE_SWITCH_PREFIX) {
                    Some(src) => match value {
                        ParamValue::Choice(c) if c == "off" => {
                            out.disabled_sources.insert(src.to_string());
                        }
                        ParamValue::Choice(c) if c == "on" => {
                            out.disabled_sources.remove(src);
                        }
                        _ => return Err(LearnerError::Config(format!("`{other}` must be `on` or `off`"))),
                    },
                    None => return Err(LearnerError::Config(format!("unknown hyperparameter `{other}`"))),
                },
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn encoder_kind(&self) -> EncoderKind {
        if self.n_conv_blocks == 0 {
            EncoderKind::Stats
        } else {
            EncoderKind::Raw
        }
    }
}

/// Untrained network with its initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub network: Network,
    pub params: Vec<f64>,
    pub seed: u64,
}

/// Builds the block graph; outputs are the activities plus a trailing null class.
pub fn build(config: &ModelConfig, deployment: &Deployment, window_len: usize, n_activities: usize, seed_value: u64) -> Result<Model, LearnerError> {
    for s in &config.disabled_sources {
        if deployment.source_index(s).is_none() {
            return Err(LearnerError::UnknownSource(s.clone()));
        }
    }
    let network = Network::new(config, deployment, window_len, n_activities + 1)?;
    let params = network.init_params(&mut seed::child_rng(seed_value, 0));
    Ok(Model {
        config: config.clone(),
        network,
        params,
        seed: seed_value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: Vec<f64>,
    pub loss_trace: Vec<f64>,
}

/// Mini-batch SGD with momentum on cross-entropy; epoch `e` draws from `sets[e % sets.len()]`.
pub fn train(model: &Model, sets: &[Vec<Example>]) -> Result<Trained, LearnerError> {
    let cfg = &model.config;
    let net = &model.network;
    let mut p = model.params.clone();
    let mut vel = vec![0.0; p.len()];
    let mut grad = vec![0.0; p.len()];
    let mut drop_rng = seed::child_rng(model.seed, 1);
    let mut trace = Vec::with_capacity(cfg.epochs);
    if sets.is_empty() || sets.iter().all(|s| s.is_empty()) {
        return Err(LearnerError::NoFrames);
    }
    for epoch in 0..cfg.epochs {
        let set = &sets[epoch % sets.len()];
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut seed::child_rng(model.seed, 2 + epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let cache = net.forward(&p, &set[i].input, Some(&mut drop_rng));
                total += net.backward(&p, &cache, set[i].label, &mut grad);
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for ((w, v), g) in p.iter_mut().zip(vel.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - scale * g;
                *w += *v;
            }
        }
        let mean = total / set.len() as f64;
        if !mean.is_finite() || !p.iter().all(|w| w.is_finite()) {
            return Err(LearnerError::Diverged { epoch: epoch + 1 });
        }
        trace.push(mean);
    }
    Ok(Trained {
        params: p,
        loss_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub network: Network,
    pub params: Vec<f64>,
    pub encoder: InputEncoder,
    /// Activities followed by the null class.
    pub classes: Vec<String>,
    pub seed: u64,
    pub loss_trace: Vec<f64>,
}

impl TrainedModel {
    pub fn predict_proba(&self, frame: &Frame) -> Vec<f64> {
        self.network.predict_proba(&self.params, &self.encoder.encode(frame))
    }

    pub fn predict(&self, frame: &Frame) -> usize {
        argmax(&self.predict_proba(frame))
    }

    pub fn null_index(&self) -> usize {
        self.classes.len() - 1
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn class_of(frame: &Frame, n_activities: usize) -> usize {
    frame.label.unwrap_or(n_activities)
}

/// Replacement noise for masked channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskNoise {
    Scalar(f64),
    PerChannel(Vec<f64>),
}

impl MaskNoise {
    fn sigma(&self, channel: usize) -> f64 {
        match self {
            MaskNoise::Scalar(s) => *s,
            MaskNoise::PerChannel(v) => v[channel],
        }
    }
}

/// Source subsets per activity label.
pub type Subsets = BTreeMap<String, BTreeSet<String>>;

/// Replaces, in every labelled frame, the channels of sources outside its activity's subset by
/// Gaussian noise. Activities without an entry keep all sources; so do empty subsets when
/// `fallback_empty` is set.
pub fn mask_augment(
    frames: &[&Frame],
    deployment: &Deployment,
    activities: &[String],
    subsets: &Subsets,
    noise: &MaskNoise,
    fallback_empty: bool,
    seed_value: u64,
) -> Result<Vec<Frame>, LearnerError> {
    let mut keep: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for (label, set) in subsets {
        let a = activities
            .iter()
            .position(|x| x == label)
            .ok_or_else(|| LearnerError::UnknownActivity(label.clone()))?;
        let mut mask = vec![false; deployment.sources.len()];
        for s in set {
            let i = deployment.source_index(s).ok_or_else(|| LearnerError::UnknownSource(s.clone()))?;
            mask[i] = true;
        }
        if set.is_empty() && fallback_empty {
            log::warn!("empty subset for `{label}`; using all sources");
            continue;
        }
        keep.insert(a, mask);
    }
    let channel_src = deployment.channel_sources();
    Ok(frames
        .iter()
        .map(|f| {
            let mut out = (*f).clone();
            let Some(mask) = f.label.and_then(|a| keep.get(&a)) else {
                return out;
            };
            let mut rng = seed::child_rng(seed_value, f.frame_id);
            for (c, ch) in out.samples.iter_mut().enumerate() {
                if mask[channel_src[c]] {
                    continue;
                }
                let sigma = noise.sigma(c);
                if sigma == 0.0 {
                    ch.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    let n = Normal::new(0.0, sigma).expect("finite sigma");
                    ch.iter_mut().for_each(|v| *v = n.sample(&mut rng));
                }
            }
            out
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Masking {
    pub subsets: Subsets,
    /// Number of independently masked copies cycled over the epochs.
    pub pool: usize,
    /// Keep the original frames alongside the masked ones.
    pub supplement: bool,
    /// `None` matches each channel's training standard deviation.
    pub sigma: Option<f64>,
    pub fallback_empty: bool,
}

impl Masking {
    pub fn new(subsets: Subsets) -> Self {
        Self {
            subsets,
            pool: 4,
            supplement: false,
            sigma: None,
            fallback_empty: true,
        }
    }
}

/// Fits the encoder and trains a fresh model on `train_idx`.
pub fn fit(
    config: &ModelConfig,
    deployment: &Deployment,
    activities: &[String],
    frames: &[Frame],
    train_idx: &[usize],
    masking: Option<&Masking>,
    seed_value: u64,
) -> Result<TrainedModel, LearnerError> {
    let train_frames: Vec<&Frame> = train_idx.iter().map(|&i| &frames[i]).collect();
    let window = train_frames.first().ok_or(LearnerError::NoFrames)?.window_len();
    for (a, name) in activities.iter().enumerate() {
        if !train_frames.iter().any(|f| f.label == Some(a)) {
            return Err(LearnerError::MissingActivity(name.clone()));
        }
    }
    let model = build(config, deployment, window, activities.len(), seed_value)?;
    let disabled: Vec<bool> = deployment
        .channel_sources()
        .into_iter()
        .map(|s| config.disabled_sources.contains(&deployment.sources[s].id))
        .collect();
    let encoder = InputEncoder::fit(config.encoder_kind(), &train_frames, disabled);
    let k = activities.len();
    let encode = |fs: &[&Frame]| -> Vec<Example> {
        let mut planner = rustfft::FftPlanner::new();
        fs.iter()
            .map(|f| Example {
                input: encoder.encode_with(f, &mut planner),
                label: class_of(f, k),
            })
            .collect()
    };
    let original = encode(&train_frames);
    let sets = match masking {
        None => vec![original],
        Some(m) => {
            let noise = match m.sigma {
                Some(s) => MaskNoise::Scalar(s),
                None => MaskNoise::PerChannel(channel_std(&train_frames)),
            };
            (0..m.pool.max(1) as u64)
                .map(|p| {
                    let masked = mask_augment(&train_frames, deployment, activities, &m.subsets, &noise, m.fallback_empty, seed::derive(seed_value, 100 + p))?;
                    let refs: Vec<&Frame> = masked.iter().collect();
                    let mut set = encode(&refs);
                    if m.supplement {
                        set.extend(original.iter().cloned());
                    }
                    Ok(set)
                })
                .collect::<Result<Vec<_>, LearnerError>>()?
        }
    };
    let trained = train(&model, &sets)?;
    let mut classes = activities.to_vec();
    classes.push(NULL_LABEL.to_string());
    Ok(TrainedModel {
        config: config.clone(),
        network: model.network,
        params: trained.params,
        encoder,
        classes,
        seed: seed_value,
        loss_trace: trained.loss_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<String>,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<u64>>,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub nu: f64,
    pub per_activity_nu: Vec<f64>,
    pub include_null: bool,
}

impl Metrics {
    /// `null_class` is the index of the null row, if the matrix has one.
    pub fn from_confusion(classes: Vec<String>, confusion: Vec<Vec<u64>>, null_class: Option<usize>, include_null: bool) -> Self {
        let n = confusion.len();
        let counted = |c: usize| include_null || Some(c) != null_class;
        let mut f1s = Vec::new();
        for y in (0..n).filter(|&c| counted(c)) {
            let tp = confusion[y][y];
            let fp: u64 = (0..n).filter(|&r| r != y && counted(r)).map(|r| confusion[r][y]).sum();
            let fn_: u64 = (0..n).filter(|&c| c != y).map(|c| confusion[y][c]).sum();
            if tp + fp + fn_ > 0 {
                f1s.push(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
            }
        }
        let macro_f1 = if f1s.is_empty() { 0.0 } else { f1s.iter().sum::<f64>() / f1s.len() as f64 };
        let (mut total, mut correct) = (0u64, 0u64);
        for (r, row) in confusion.iter().enumerate().filter(|(r, _)| counted(*r)) {
            total += row.iter().sum::<u64>();
            correct += row[r];
        }
        let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        let per_activity_nu = (0..n)
            .filter(|&c| Some(c) != null_class)
            .map(|y| {
                let support: u64 = confusion[y].iter().sum();
                if support == 0 {
                    0.0
                } else {
                    1.0 - confusion[y][y] as f64 / support as f64
                }
            })
            .collect();
        Self {
            classes,
            confusion,
            macro_f1,
            accuracy,
            nu: if total == 0 { 0.0 } else { 1.0 - accuracy },
            per_activity_nu,
            include_null,
        }
    }

    pub fn confusion_csv(&self) -> String {
        let mut out = format!("true\\pred,{}\n", self.classes.join(","));
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&format!("{c},{}\n", cells.join(",")));
        }
        out
    }
}

/// Predictions and metrics on the frames at `idx`.
pub fn evaluate(model: &TrainedModel, frames: &[Frame], idx: &[usize], include_null: bool) -> Metrics {
    let n = model.classes.len();
    let k = n - 1;
    let mut confusion = vec![vec![0u64; n]; n];
    let preds: Vec<(usize, usize)> = idx
        .par_iter()
        .map(|&i| (class_of(&frames[i], k), model.predict(&frames[i])))
        .collect();
    for (t, p) in preds {
        confusion[t][p] += 1;
    }
    Metrics::from_confusion(model.classes.clone(), confusion, Some(k), include_null)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolMode {
    #[serde(rename = "wo-DGP")]
    WoDgp,
    #[serde(rename = "w-DGP")]
    WDgp,
    #[serde(rename = "w-HExp")]
    WHExp,
}

impl std::fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolMode::WoDgp => "wo-DGP",
            ProtocolMode::WDgp => "w-DGP",
            ProtocolMode::WHExp => "w-HExp",
        })
    }
}

impl std::str::FromStr for ProtocolMode {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wo-DGP" => Ok(ProtocolMode::WoDgp),
            "w-DGP" => Ok(ProtocolMode::WDgp),
            "w-HExp" => Ok(ProtocolMode::WHExp),
            other => Err(LearnerError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub mode: String,
    pub per_fold: Vec<Metrics>,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub mean_nu: f64,
}

impl ProtocolSummary {
    fn from_folds(mode: String, per_fold: Vec<Metrics>) -> Self {
        let f: Vec<f64> = per_fold.iter().map(|m| m.macro_f1).collect();
        let n = f.len().max(1) as f64;
        let mean_f1 = f.iter().sum::<f64>() / n;
        let std_f1 = if f.len() > 1 {
            (f.iter().map(|v| (v - mean_f1).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mean_nu = per_fold.iter().map(|m| m.nu).sum::<f64>() / n;
        Self {
            mode,
            per_fold,
            mean_f1,
            std_f1,
            mean_nu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolOptions {
    pub include_null: bool,
    pub mask_pool: usize,
    pub supplement: bool,
    pub mask_sigma: Option<f64>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            include_null: false,
            mask_pool: 4,
            supplement: false,
            mask_sigma: None,
        }
    }
}

/// Cross-validated training and evaluation; masked modes use `subsets` for augmentation.
#[allow(clippy::too_many_arguments)]
pub fn run_protocol(
    deployment: &Deployment,
    activities: &[String],
    frames: &[Frame],
    folds: &FoldAssignment,
    config: &ModelConfig,
    mode: ProtocolMode,
    subsets: Option<&Subsets>,
    options: &ProtocolOptions,
    seed_value: u64,
) -> Result<ProtocolSummary, LearnerError> {
    let masking = match (mode, subsets) {
        (ProtocolMode::WoDgp, _) => None,
        (_, None) => return Err(LearnerError::MissingDgp(mode.to_string())),
        (_, Some(s)) => Some(Masking {
            pool: options.mask_pool,
            supplement: options.supplement,
            sigma: options.mask_sigma,
            ..Masking::new(s.clone())
        }),
    };
    let per_fold = (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let (train_idx, test_idx) = folds.split(frames, fold);
            let model = fit(config, deployment, activities, frames, &train_idx, masking.as_ref(), seed::derive(seed_value, fold as u64))?;
            Ok(evaluate(&model, frames, &test_idx, options.include_null))
        })
        .collect::<Result<Vec<_>, LearnerError>>()?;
    Ok(ProtocolSummary::from_folds(mode.to_string(), per_fold))
}

/// 1-nearest-neighbour labels under squared Euclidean distance; ties go to the earliest example.
pub fn nearest_neighbor_predict(train: &[Example], test: &[Vec<f64>]) -> Vec<usize> {
    test.par_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, 0);
            for e in train {
                let d: f64 = e.input.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, e.label);
                }
            }
            best.1
        })
        .collect()
}

/// Cross-validated 1-nearest-neighbour on standardized raw windows.
pub fn nearest_neighbor_cv(activities: &[String], frames: &[Frame], folds: &FoldAssignment, include_null: bool) -> ProtocolSummary {
    let k = activities.len();
    let mut classes = activities.to_vec();
    classes.push(NULL_LABEL.to_string());
    let per_fold = (0..folds.k)
        .map(|fold| {
            let (train_idx, test_idx) = folds.split(frames, fold);
            let train_frames: Vec<&Frame> = train_idx.iter().map(|&i| &frames[i]).collect();
            let enc = InputEncoder::fit(EncoderKind::Raw, &train_frames, Vec::new());
            let train: Vec<Example> = train_frames
                .iter()
                .map(|f| Example {
                    input: enc.encode(f),
                    label: class_of(f, k),
                })
                .collect();
            let test: Vec<Vec<f64>> = test_idx.iter().map(|&i| enc.encode(&frames[i])).collect();
            let preds = nearest_neighbor_predict(&train, &test);
            let mut confusion = vec![vec![0u64; k + 1]; k + 1];
            for (&i, p) in test_idx.iter().zip(preds) {
                confusion[class_of(&frames[i], k)][p] += 1;
            }
            Metrics::from_confusion(classes.clone(), confusion, Some(k), include_null)
        })
        .collect();
    ProtocolSummary::from_folds("1-NN".into(), per_fold)
}

/// Trains on every fold but `holdout` and reports the losses on `holdout`.
pub struct HoldoutEvaluator<'a> {
    pub deployment: &'a Deployment,
    pub activities: &'a [String],
    pub frames: &'a [Frame],
    pub folds: &'a FoldAssignment,
    pub base: ModelConfig,
    pub holdout: usize,
    pub include_null: bool,
}

impl Evaluator for HoldoutEvaluator<'_> {
    fn evaluate(&self, config: &Configuration, budget: f64, seed_value: u64) -> Result<Outcome, EvalError> {
        let mut cfg = self.base.with_configuration(config).map_err(|e| EvalError(e.to_string()))?;
        cfg.epochs = budget.round().max(1.0) as usize;
        let (train_idx, test_idx) = self.folds.split(self.frames, self.holdout);
        let model = fit(&cfg, self.deployment, self.activities, self.frames, &train_idx, None, seed_value).map_err(|e| EvalError(e.to_string()))?;
        let m = evaluate(&model, self.frames, &test_idx, self.include_null);
        Ok(Outcome {
            nu: m.nu,
            per_activity_nu: m.per_activity_nu,
            f1: m.macro_f1,
        })
    }
}

#[cfg(test)]
mod tests;
