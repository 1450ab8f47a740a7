//! Tree-structured Parzen estimator proposals in unit space.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::hyperspace::{Configuration, ParamKind, SearchSpace, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeSettings {
    pub gamma: f64,
    pub n_candidates: usize,
    pub n_startup: usize,
    /// Floor on every kernel bandwidth (unit space), applied after the adaptive clip.
    pub min_bandwidth: f64,
}

impl Default for TpeSettings {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_candidates: 24,
            n_startup: 10,
            min_bandwidth: 0.01,
        }
    }
}

/// Size of the good set for `n` observations.
pub fn n_good(n: usize, gamma: f64) -> usize {
    ((gamma * n as f64).ceil() as usize).clamp(1, n.max(1))
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// One-dimensional density over `[0, 1]`.
enum Parzen {
    /// Truncated Gaussian kernels plus a uniform prior component.
    Kernel { centers: Vec<f64>, bandwidths: Vec<f64> },
    /// Smoothed frequency estimate over `n` choices.
    Categorical { probs: Vec<f64> },
}

impl Parzen {
    fn fit(points: &[f64], kind: ParamKind, n_choices: usize, min_bw: f64) -> Self {
        if kind == ParamKind::Categorical {
            let mut counts = vec![1.0; n_choices];
            for &u in points {
                counts[unit_to_choice(u, n_choices)] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            return Parzen::Categorical {
                probs: counts.into_iter().map(|c| c / total).collect(),
            };
        }
        Parzen::Kernel {
            centers: points.to_vec(),
            bandwidths: adaptive_bandwidths(points, min_bw),
        }
    }

    fn density(&self, u: f64) -> f64 {
        match self {
            Parzen::Categorical { probs } => probs[unit_to_choice(u, probs.len())],
            Parzen::Kernel { centers, bandwidths } => {
                let mut total = 1.0; // uniform prior component
                for (&c, &h) in centers.iter().zip(bandwidths) {
                    let mass = std_normal_cdf((1.0 - c) / h) - std_normal_cdf(-c / h);
                    let z = (u - c) / h;
                    total += (-0.5 * z * z).exp() / (h * (2.0 * std::f64::consts::PI).sqrt() * mass);
                }
                total / (centers.len() + 1) as f64
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Parzen::Categorical { probs } => {
                let r: f64 = rng.gen();
                let mut acc = 0.0;
                let n = probs.len();
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if r < acc {
                        return i as f64 / (n - 1) as f64;
                    }
                }
                1.0
            }
            Parzen::Kernel { centers, bandwidths } => {
                let k = rng.gen_range(0..=centers.len());
                if k == centers.len() {
                    return rng.gen();
                }
                let c = centers[k];
                for _ in 0..64 {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    let u = c + bandwidths[k] * z;
                    if (0.0..=1.0).contains(&u) {
                        return u;
                    }
                }
                c
            }
        }
    }
}

/// Per-point bandwidth: the larger gap to a sorted neighbour, with the prior
/// mean 0.5 among the neighbours, clipped to `[1 / min(100, n + 1), 1]`.
fn adaptive_bandwidths(points: &[f64], floor: f64) -> Vec<f64> {
    let n = points.len();
    let mut sorted: Vec<(f64, Option<usize>)> = points.iter().enumerate().map(|(i, &u)| (u, Some(i))).collect();
    sorted.push((0.5, None));
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = (1.0 / (n + 1).min(100) as f64).max(floor);
    let mut out = vec![lo; n];
    for (j, &(u, idx)) in sorted.iter().enumerate() {
        let Some(i) = idx else { continue };
        let left = if j > 0 { u - sorted[j - 1].0 } else { 0.0 };
        let right = if j + 1 < sorted.len() { sorted[j + 1].0 - u } else { 0.0 };
        out[i] = left.max(right).clamp(lo, 1.0);
    }
    out
}

fn unit_to_choice(u: f64, n: usize) -> usize {
    ((u.clamp(0.0, 1.0) * (n - 1) as f64).round() as usize).min(n - 1)
}

/// Ranks the history by `nu` and fits the good/bad densities on the unit encoding.
fn fit_densities(history: &[&Trial], space: &SearchSpace, settings: &TpeSettings) -> (Vec<Parzen>, Vec<Parzen>) {
    let mut ranked: Vec<(f64, Vec<f64>)> = history
        .iter()
        .filter_map(|t| space.to_unit(&t.config).ok().map(|u| (t.nu, u)))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = n_good(ranked.len(), settings.gamma);
    let (good, bad) = ranked.split_at(k);
    let fit = |set: &[(f64, Vec<f64>)]| -> Vec<Parzen> {
        space
            .params()
            .iter()
            .enumerate()
            .map(|(d, p)| {
                let pts: Vec<f64> = set.iter().map(|(_, u)| u[d]).collect();
                Parzen::fit(&pts, p.kind, p.n_choices(), settings.min_bandwidth)
            })
            .collect()
    };
    (fit(good), fit(bad))
}

/// Draws `n_candidates` from the good density and keeps the best `l/g` ratio.
/// Histories shorter than `n_startup` fall back to a prior sample.
pub fn tpe_propose<R: Rng + ?Sized>(history: &[Trial], space: &SearchSpace, settings: &TpeSettings, rng: &mut R) -> Configuration {
    if history.len() < settings.n_startup.max(1) {
        return space.sample_with(rng);
    }
    let refs: Vec<&Trial> = history.iter().collect();
    tpe_propose_from(&refs, space, settings, rng)
}

/// Model-based proposal without the startup fallback.
pub(crate) fn tpe_propose_from<R: Rng + ?Sized>(history: &[&Trial], space: &SearchSpace, settings: &TpeSettings, rng: &mut R) -> Configuration {
    let (good, bad) = fit_densities(history, space, settings);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..settings.n_candidates.max(1) {
        let cand: Vec<f64> = good.iter().map(|p| p.sample(rng)).collect();
        let score: f64 = cand
            .iter()
            .zip(good.iter().zip(&bad))
            .map(|(&u, (l, g))| l.density(u).ln() - g.density(u).ln())
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    let (_, unit) = best.expect("at least one candidate");
    space.from_unit(&unit).expect("candidate has space dimension")
}
