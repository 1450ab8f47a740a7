//! Naive evolution: mutate one dimension of a parent from the best trials.

use rand::Rng;

use crate::hyperspace::{Configuration, SearchSpace, Trial};

/// Best `population_size` trials by `nu`, ties broken by trial id.
pub fn population(history: &[Trial], population_size: usize) -> Vec<&Trial> {
    let mut ranked: Vec<&Trial> = history.iter().collect();
    ranked.sort_by(|a, b| a.nu.total_cmp(&b.nu).then(a.trial_id.cmp(&b.trial_id)));
    ranked.truncate(population_size.max(1));
    ranked
}

pub fn evolution_propose<R: Rng + ?Sized>(
    history: &[Trial],
    space: &SearchSpace,
    rng: &mut R,
    population_size: usize,
) -> Configuration {
    let pop = population(history, population_size);
    if pop.is_empty() {
        return space.sample_with(rng);
    }
    let parent = pop[rng.gen_range(0..pop.len())];
    let d = rng.gen_range(0..space.dim());
    let spec = &space.params()[d];
    let old = parent.config.get(&spec.name).cloned();
    let mut child = parent.config.clone();
    let mut value = spec.sample_value(rng);
    for _ in 0..1000 {
        if Some(&value) != old.as_ref() {
            break;
        }
        value = spec.sample_value(rng);
    }
    child.values.insert(spec.name.clone(), value);
    child
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::{sample, ParamSpec, Prior};
    use crate::seed;

    fn trial(id: u64, config: Configuration, nu: f64) -> Trial {
        Trial {
            trial_id: id,
            config,
            budget: 1.0,
            nu,
            per_activity_nu: vec![],
            f1: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn mutates_exactly_one_dimension() {
        let space = crate::hyperspace::table1_space();
        let history: Vec<Trial> = (0..5).map(|i| trial(i, sample(&space, i), i as f64 / 10.0)).collect();
        let mut rng = seed::rng(3);
        for _ in 0..200 {
            let child = evolution_propose(&history, &space, &mut rng, 20);
            let diffs: Vec<usize> = history
                .iter()
                .map(|p| {
                    p.config
                        .values
                        .iter()
                        .filter(|(k, v)| child.get(k) != Some(*v))
                        .count()
                })
                .collect();
            assert!(diffs.contains(&1), "{diffs:?}");
            space.validate_config(&child).unwrap();
        }
    }

    #[test]
    fn population_keeps_best() {
        let space = crate::hyperspace::table1_space();
        let history: Vec<Trial> = (0..10).map(|i| trial(i, sample(&space, i), 1.0 - i as f64 / 10.0)).collect();
        let pop = population(&history, 3);
        let ids: Vec<u64> = pop.iter().map(|t| t.trial_id).collect();
        assert_eq!(ids, vec![9, 8, 7]);
    }

    #[test]
    fn one_dimensional_space_resamples() {
        let space = SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0, Prior::Uniform)]).unwrap();
        let history = vec![trial(0, sample(&space, 1), 0.2)];
        let child = evolution_propose(&history, &space, &mut seed::rng(8), 20);
        assert_ne!(child, history[0].config);
        space.validate_config(&child).unwrap();
    }
}
