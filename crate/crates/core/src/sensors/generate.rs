//! Planted-ground-truth stream generator.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Deployment, PlantedDgp, Recording, SensorError, SensorModel};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateOptions {
    pub frames_per_activity: usize,
    pub window_len: usize,
    /// Consecutive windows of one activity.
    pub bout_frames: usize,
    pub n_recordings: usize,
    pub null_frames: usize,
    /// AR(1) coefficient of an additive nuisance process shared by nothing but time.
    pub ar_coeff: f64,
    pub ar_sigma: f64,
    /// Phase offset between consecutive channels of one source, radians.
    pub channel_phase: f64,
    pub seed: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            frames_per_activity: 20,
            window_len: 600,
            bout_frames: 5,
            n_recordings: 1,
            null_frames: 0,
            ar_coeff: 0.0,
            ar_sigma: 0.0,
            channel_phase: PI / 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Bout {
    label: Option<usize>,
    windows: usize,
}

fn bouts(n_windows: usize, per_bout: usize, label: Option<usize>) -> impl Iterator<Item = Bout> {
    let full = n_windows / per_bout;
    let rest = n_windows % per_bout;
    std::iter::repeat_n(Bout { label, windows: per_bout }, full).chain((rest > 0).then_some(Bout { label, windows: rest }))
}

/// Generates labelled recordings whose informative channels follow `planted`.
pub fn generate(
    deployment: &Deployment,
    planted: &PlantedDgp,
    models: &BTreeMap<String, SensorModel>,
    options: &GenerateOptions,
) -> Result<Dataset, SensorError> {
    deployment.validate()?;
    planted.validate(deployment)?;
    for (id, m) in models {
        if deployment.source_index(id).is_none() {
            return Err(SensorError::SensorModel {
                source_id: id.clone(),
                message: "unknown source".into(),
            });
        }
        m.validate(id)?;
    }
    if options.window_len < 2 || options.bout_frames == 0 || options.n_recordings == 0 {
        return Err(SensorError::Planted("window_len >= 2, bout_frames >= 1 and n_recordings >= 1 required".into()));
    }
    if !(options.ar_coeff.abs() < 1.0 && options.ar_sigma >= 0.0) {
        return Err(SensorError::Planted("ar_coeff must lie in (-1, 1) and ar_sigma >= 0".into()));
    }

    let mut all: Vec<Bout> = Vec::new();
    for a in 0..planted.activities.len() {
        all.extend(bouts(options.frames_per_activity, options.bout_frames, Some(a)));
    }
    all.extend(bouts(options.null_frames, options.bout_frames, None));
    all.shuffle(&mut seed::child_rng(options.seed, 0));
    let mut per_rec: Vec<Vec<Bout>> = vec![Vec::new(); options.n_recordings];
    for (i, b) in all.into_iter().enumerate() {
        per_rec[i % options.n_recordings].push(b);
    }

    let ideal = SensorModel::default();
    let channel_src = deployment.channel_sources();
    let model_of: Vec<&SensorModel> = deployment
        .sources
        .iter()
        .map(|s| models.get(&s.id).unwrap_or(&ideal))
        .collect();
    // signal lookup: activity -> source -> spec
    let signals: Vec<Vec<Option<&super::SignalSpec>>> = planted
        .activities
        .iter()
        .map(|a| deployment.sources.iter().map(|s| a.informative.get(&s.id)).collect())
        .collect();
    let first_channel: Vec<usize> = (0..deployment.sources.len())
        .map(|s| deployment.channel_range(s).start)
        .collect();

    let recordings = per_rec
        .iter()
        .enumerate()
        .map(|(r, bouts)| {
            let n: usize = bouts.iter().map(|b| b.windows * options.window_len).sum();
            let mut labels = Vec::with_capacity(n);
            for b in bouts {
                labels.extend(std::iter::repeat_n(b.label, b.windows * options.window_len));
            }
            let rec_seed = seed::derive(options.seed, 1 + r as u64);
            let channels = channel_src
                .iter()
                .enumerate()
                .map(|(c, &s)| {
                    let model = model_of[s];
                    let mut rng = seed::child_rng(rec_seed, c as u64);
                    let distractor = Normal::new(0.0, planted.distractor_sigma).expect("sigma >= 0");
                    let meas = Normal::new(0.0, model.noise_sigma).expect("sigma >= 0");
                    let ar = Normal::new(0.0, options.ar_sigma).expect("sigma >= 0");
                    let ch_phase = (c - first_channel[s]) as f64 * options.channel_phase;
                    let mut out = Vec::with_capacity(n);
                    let mut nuisance = 0.0;
                    let mut t = 0usize;
                    for b in bouts {
                        let spec = b.label.and_then(|a| signals[a][s]);
                        for _ in 0..b.windows {
                            let jitter = if planted.phase_jitter > 0.0 {
                                rng.gen_range(-planted.phase_jitter..=planted.phase_jitter)
                            } else {
                                0.0
                            };
                            for _ in 0..options.window_len {
                                let time = t as f64 / deployment.sampling_rate;
                                let clean = match spec {
                                    Some(sig) => sig.amplitude * (2.0 * PI * sig.base_freq * time + sig.phase + ch_phase + jitter).sin(),
                                    None => distractor.sample(&mut rng),
                                };
                                if options.ar_sigma > 0.0 {
                                    nuisance = options.ar_coeff * nuisance + ar.sample(&mut rng);
                                }
                                let mut v = model.respond(clean + nuisance, time);
                                if model.noise_sigma > 0.0 {
                                    v += meas.sample(&mut rng);
                                }
                                if model.dropout_prob > 0.0 && rng.gen::<f64>() < model.dropout_prob {
                                    v = f64::NAN;
                                }
                                out.push(v);
                                t += 1;
                            }
                        }
                    }
                    out
                })
                .collect();
            Recording { channels, labels }
        })
        .collect();

    Ok(Dataset {
        deployment: deployment.clone(),
        activities: planted.labels(),
        recordings,
    })
}
