//! Simulated-annealing style proposals around the incumbent.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::incumbent;
use crate::hyperspace::{Configuration, SearchSpace, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSettings {
    pub p0: f64,
    pub p_min: f64,
    pub sigma0: f64,
    pub decay: f64,
}

impl Default for AnnealSettings {
    fn default() -> Self {
        Self {
            p0: 0.5,
            p_min: 0.05,
            sigma0: 0.2,
            decay: 0.97,
        }
    }
}

impl AnnealSettings {
    pub fn prior_probability(&self, t: u64) -> f64 {
        (self.p0 * self.decay.powf(t as f64)).max(self.p_min)
    }

    pub fn sigma(&self, t: u64) -> f64 {
        self.sigma0 * self.decay.powf(t as f64)
    }
}

/// Gaussian perturbation of a unit vector, clipped to `[0, 1]`.
pub fn anneal_perturb<R: Rng + ?Sized>(unit: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    unit.iter()
        .map(|&u| {
            let z: f64 = rng.sample(StandardNormal);
            (u + sigma * z).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn anneal_propose<R: Rng + ?Sized>(
    history: &[Trial],
    space: &SearchSpace,
    settings: &AnnealSettings,
    rng: &mut R,
    t: u64,
) -> Configuration {
    let Some(best) = incumbent(history) else {
        return space.sample_with(rng);
    };
    if rng.gen::<f64>() < settings.prior_probability(t) {
        return space.sample_with(rng);
    }
    let Ok(unit) = space.to_unit(&best.config) else {
        return space.sample_with(rng);
    };
    let moved = anneal_perturb(&unit, settings.sigma(t), rng);
    space.from_unit(&moved).expect("perturbed vector keeps the space dimension")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn prior_probability_floors() {
        let s = AnnealSettings::default();
        assert_eq!(s.prior_probability(0), 0.5);
        assert_eq!(s.prior_probability(10_000), 0.05);
        assert!(s.sigma(200) < 0.01);
    }

    #[test]
    fn empty_history_samples_prior() {
        let space = crate::hyperspace::table1_space();
        let a = anneal_propose(&[], &space, &AnnealSettings::default(), &mut seed::rng(5), 3);
        assert_eq!(a, space.sample_with(&mut seed::rng(5)));
    }

    #[test]
    fn perturbation_near_boundary() {
        let mut rng = seed::rng(9);
        let mut inside = 0;
        for _ in 0..100 {
            let v = anneal_perturb(&[0.0], 0.01, &mut rng);
            if (0.0..=0.05).contains(&v[0]) {
                inside += 1;
            }
        }
        assert!(inside >= 99);
    }
}
