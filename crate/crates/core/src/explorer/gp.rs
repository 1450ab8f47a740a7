//! Gaussian-process regression with expected improvement.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::ExplorerError;
use crate::hyperspace::{Configuration, SearchSpace, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpSettings {
    pub length_scale: f64,
    pub n_pool: usize,
    pub jitter_min: f64,
    pub jitter_max: f64,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            length_scale: 0.2,
            n_pool: 500,
            jitter_min: 1e-8,
            jitter_max: 1e-4,
        }
    }
}

/// Expected improvement below `best` for a Gaussian prediction `N(mu, sigma^2)`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    let gain = best - mu;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    let cdf = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (gain * cdf + sigma * pdf).max(0.0)
}

/// Fitted posterior on standardized targets.
pub struct GpModel {
    x: Vec<Vec<f64>>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    length_scale: f64,
    pub jitter: f64,
}

fn kernel(a: &[f64], b: &[f64], ls: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2 / (ls * ls)).exp()
}

impl GpModel {
    pub fn fit(x: Vec<Vec<f64>>, y: &[f64], settings: &GpSettings) -> Result<Self, ExplorerError> {
        let n = x.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
        let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], settings.length_scale));
        let mut jitter = settings.jitter_min;
        loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(chol) = kj.cholesky() {
                let alpha = chol.solve(&ys);
                return Ok(Self {
                    x,
                    chol,
                    alpha,
                    y_mean,
                    y_scale,
                    length_scale: settings.length_scale,
                    jitter,
                });
            }
            if jitter >= settings.jitter_max {
                return Err(ExplorerError::Conditioning { jitter });
            }
            jitter = (jitter * 10.0).min(settings.jitter_max);
        }
    }

    /// Posterior mean and standard deviation in the original response units.
    pub fn predict(&self, u: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| kernel(xi, u, self.length_scale)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("cholesky factor is nonsingular");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

fn distinct_configs(history: &[Trial]) -> usize {
    let mut seen: Vec<&Configuration> = Vec::new();
    for t in history {
        if !seen.contains(&&t.config) {
            seen.push(&t.config);
            if seen.len() >= 2 {
                break;
            }
        }
    }
    seen.len()
}

pub fn gp_propose<R: Rng + ?Sized>(
    history: &[Trial],
    space: &SearchSpace,
    settings: &GpSettings,
    rng: &mut R,
) -> Result<Configuration, ExplorerError> {
    if distinct_configs(history) < 2 {
        return Ok(space.sample_with(rng));
    }
    let mut x = Vec::with_capacity(history.len());
    let mut y = Vec::with_capacity(history.len());
    for t in history {
        x.push(space.to_unit(&t.config)?);
        y.push(t.nu);
    }
    let best = y.iter().copied().fold(f64::INFINITY, f64::min);
    let model = GpModel::fit(x, &y, settings)?;
    let d = space.dim();
    let mut top: Option<(f64, Vec<f64>)> = None;
    for _ in 0..settings.n_pool.max(1) {
        let raw: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let cand = space.snap_unit(&raw);
        let (mu, sd) = model.predict(&cand);
        let ei = expected_improvement(mu, sd, best);
        if top.as_ref().is_none_or(|(s, _)| ei > *s) {
            top = Some((ei, cand));
        }
    }
    let (_, unit) = top.expect("pool is non-empty");
    Ok(space.from_unit(&unit)?)
}
