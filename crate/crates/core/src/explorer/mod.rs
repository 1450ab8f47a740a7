//! Exploration strategies and the budgeted run loop.

mod anneal;
mod evolution;
mod gp;
mod hyperband;
mod tpe;

pub use anneal::{anneal_perturb, anneal_propose, AnnealSettings};
pub use evolution::{evolution_propose, population};
pub use gp::{expected_improvement, gp_propose, GpModel, GpSettings};
pub use hyperband::{hyperband_schedule, Bracket, Rung};
pub use tpe::{n_good, tpe_propose, TpeSettings};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperspace::{grid, sample, Configuration, SearchSpace, SpaceError, Trial, DEFAULT_GRID_CAP};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorerError {
    #[error("invalid strategy setting: {0}")]
    BadSetting(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("kernel matrix not positive definite at jitter {jitter:e}")]
    Conditioning { jitter: f64 },
    #[error("trial {trial_id}: evaluation failed: {message}")]
    Eval { trial_id: u64, message: String },
    #[error("trial {trial_id}: outcome outside [0, 1]")]
    BadOutcome { trial_id: u64 },
    #[error("trial log: {0}")]
    Sink(String),
}

/// Losses produced by one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub nu: f64,
    pub per_activity_nu: Vec<f64>,
    pub f1: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct EvalError(pub String);

/// Deterministic performance estimate for `(config, budget, seed)`.
pub trait Evaluator: Sync {
    fn evaluate(&self, config: &Configuration, budget: f64, seed: u64) -> Result<Outcome, EvalError>;
}

impl<F> Evaluator for F
where
    F: Fn(&Configuration, f64, u64) -> Result<Outcome, EvalError> + Sync,
{
    fn evaluate(&self, config: &Configuration, budget: f64, seed: u64) -> Result<Outcome, EvalError> {
        self(config, budget, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub points_per_dim: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { points_per_dim: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionSettings {
    pub population_size: usize,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        Self { population_size: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperbandSettings {
    pub max_resource: f64,
    pub eta: usize,
}

impl Default for HyperbandSettings {
    fn default() -> Self {
        Self {
            max_resource: 27.0,
            eta: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BohbSettings {
    pub max_resource: f64,
    pub eta: usize,
    /// Observations a rung needs before its budget is modelled.
    pub min_points: usize,
    pub tpe: TpeSettings,
}

impl Default for BohbSettings {
    fn default() -> Self {
        Self {
            max_resource: 27.0,
            eta: 3,
            min_points: 10,
            tpe: TpeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Grid(GridSettings),
    Evolution(EvolutionSettings),
    Anneal(AnnealSettings),
    Hyperband(HyperbandSettings),
    Bohb(BohbSettings),
    Tpe(TpeSettings),
    Gp(GpSettings),
}

pub const STRATEGY_KINDS: [&str; 8] = ["random", "grid", "evolution", "anneal", "hyperband", "bohb", "tpe", "gp"];

impl Strategy {
    /// Strategy with default settings.
    pub fn from_kind(kind: &str) -> Result<Self, ExplorerError> {
        Ok(match kind {
            "random" => Strategy::Random,
            "grid" => Strategy::Grid(GridSettings::default()),
            "evolution" => Strategy::Evolution(EvolutionSettings::default()),
            "anneal" => Strategy::Anneal(AnnealSettings::default()),
            "hyperband" => Strategy::Hyperband(HyperbandSettings::default()),
            "bohb" => Strategy::Bohb(BohbSettings::default()),
            "tpe" => Strategy::Tpe(TpeSettings::default()),
            "gp" => Strategy::Gp(GpSettings::default()),
            other => return Err(ExplorerError::BadSetting(format!("unknown strategy `{other}`"))),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Grid(_) => "grid",
            Strategy::Evolution(_) => "evolution",
            Strategy::Anneal(_) => "anneal",
            Strategy::Hyperband(_) => "hyperband",
            Strategy::Bohb(_) => "bohb",
            Strategy::Tpe(_) => "tpe",
            Strategy::Gp(_) => "gp",
        }
    }

    pub fn is_multi_fidelity(&self) -> bool {
        matches!(self, Strategy::Hyperband(_) | Strategy::Bohb(_))
    }

    /// Overrides one setting; nested keys use dots (`tpe.gamma`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExplorerError> {
        let bad = || ExplorerError::BadSetting(format!("{} has no setting `{key}`", self.kind()));
        let mut doc = serde_json::to_value(&*self).expect("strategy serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            if part == "kind" {
                return Err(bad());
            }
            slot = slot.get_mut(part).ok_or_else(bad)?;
        }
        *slot = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let updated: Strategy = serde_json::from_value(doc)
            .map_err(|e| ExplorerError::BadSetting(format!("`{key}` = `{value}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExplorerError> {
        let fail = |m: &str| Err(ExplorerError::BadSetting(m.to_string()));
        let check_tpe = |t: &TpeSettings| {
            if !(t.gamma > 0.0 && t.gamma < 1.0) {
                return fail("tpe gamma must lie in (0, 1)");
            }
            if t.n_candidates == 0 || !(t.min_bandwidth > 0.0) {
                return fail("tpe needs n_candidates >= 1 and a positive min_bandwidth");
            }
            Ok(())
        };
        match self {
            Strategy::Random => Ok(()),
            Strategy::Grid(g) if g.points_per_dim < 2 => fail("grid points_per_dim must be >= 2"),
            Strategy::Grid(_) => Ok(()),
            Strategy::Evolution(e) if e.population_size == 0 => fail("population_size must be >= 1"),
            Strategy::Evolution(_) => Ok(()),
            Strategy::Anneal(a) => {
                let unit = |v: f64| (0.0..=1.0).contains(&v);
                if !(unit(a.p0) && unit(a.p_min) && a.decay > 0.0 && a.decay <= 1.0 && a.sigma0 >= 0.0) {
                    return fail("anneal needs p0, p_min in [0, 1], decay in (0, 1], sigma0 >= 0");
                }
                Ok(())
            }
            Strategy::Hyperband(h) => hyperband_schedule(h.max_resource, h.eta).map(|_| ()),
            Strategy::Bohb(b) => {
                hyperband_schedule(b.max_resource, b.eta)?;
                check_tpe(&b.tpe)
            }
            Strategy::Tpe(t) => check_tpe(t),
            Strategy::Gp(g) => {
                if !(g.length_scale > 0.0 && g.n_pool > 0 && g.jitter_min > 0.0 && g.jitter_min <= g.jitter_max) {
                    return fail("gp needs length_scale > 0, n_pool >= 1, 0 < jitter_min <= jitter_max");
                }
                Ok(())
            }
        }
    }
}

/// Lowest-`nu` trial, earliest id on ties.
pub fn incumbent(history: &[Trial]) -> Option<&Trial> {
    history
        .iter()
        .min_by(|a, b| a.nu.total_cmp(&b.nu).then(a.trial_id.cmp(&b.trial_id)))
}

/// Running minimum of `nu` in trial order.
pub fn running_minimum(trials: &[Trial]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    trials
        .iter()
        .map(|t| {
            best = best.min(t.nu);
            best
        })
        .collect()
}

/// TPE fitted on the largest budget holding at least `min_points` trials; prior sample otherwise.
pub fn bohb_propose<R: Rng + ?Sized>(history: &[Trial], space: &SearchSpace, settings: &BohbSettings, rng: &mut R) -> Configuration {
    let mut budgets: Vec<f64> = history.iter().map(|t| t.budget).collect();
    budgets.sort_by(|a, b| b.total_cmp(a));
    budgets.dedup();
    for b in budgets {
        let rung: Vec<&Trial> = history.iter().filter(|t| t.budget == b).collect();
        if rung.len() >= settings.min_points.max(1) {
            return tpe::tpe_propose_from(&rung, space, &settings.tpe, rng);
        }
    }
    space.sample_with(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Number of evaluator calls.
    pub budget: usize,
    pub seed: u64,
    pub workers: usize,
    /// Budget passed to the evaluator by single-fidelity strategies.
    pub full_budget: f64,
}

impl RunOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            workers: 1,
            full_budget: 1.0,
        }
    }
}

/// A run that stopped early; `trials` holds every trial completed before the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error} (after {} trials)", trials.len())]
pub struct RunFailure {
    pub trials: Vec<Trial>,
    pub error: ExplorerError,
}

pub fn run<E: Evaluator>(
    space: &SearchSpace,
    strategy: &Strategy,
    evaluator: &E,
    options: &RunOptions,
) -> Result<Vec<Trial>, RunFailure> {
    run_with_sink(space, strategy, evaluator, options, |_| Ok(()))
}

/// Like [`run`], handing every trial to `sink` in id order as soon as it is merged.
pub fn run_with_sink<E, S>(
    space: &SearchSpace,
    strategy: &Strategy,
    evaluator: &E,
    options: &RunOptions,
    sink: S,
) -> Result<Vec<Trial>, RunFailure>
where
    E: Evaluator,
    S: FnMut(&Trial) -> Result<(), ExplorerError>,
{
    let mut coord = Coordinator {
        space,
        evaluator,
        options,
        sink,
        history: Vec::new(),
        pool: None,
    };
    let result = coord.drive(strategy);
    match result {
        Ok(()) => Ok(coord.history),
        Err(error) => Err(RunFailure {
            trials: coord.history,
            error,
        }),
    }
}

struct Coordinator<'a, E, S> {
    space: &'a SearchSpace,
    evaluator: &'a E,
    options: &'a RunOptions,
    sink: S,
    history: Vec<Trial>,
    pool: Option<rayon::ThreadPool>,
}

impl<E, S> Coordinator<'_, E, S>
where
    E: Evaluator,
    S: FnMut(&Trial) -> Result<(), ExplorerError>,
{
    fn trial_seed(&self, id: u64) -> u64 {
        seed::derive(self.options.seed, id)
    }

    fn next_id(&self) -> u64 {
        self.history.len() as u64
    }

    fn drive(&mut self, strategy: &Strategy) -> Result<(), ExplorerError> {
        strategy.validate()?;
        if self.options.budget == 0 {
            return Err(ExplorerError::BadSetting("budget must be >= 1".into()));
        }
        if self.options.workers > 1 {
            self.pool = Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.options.workers)
                    .build()
                    .map_err(|e| ExplorerError::BadSetting(e.to_string()))?,
            );
        }
        let b = self.options.budget;
        let full = self.options.full_budget;
        match strategy {
            Strategy::Random => {
                let configs = (0..b as u64).map(|i| sample(self.space, self.trial_seed(i))).collect();
                self.evaluate_batch(configs, full).map(|_| ())
            }
            Strategy::Grid(g) => {
                let points = grid(self.space, g.points_per_dim, DEFAULT_GRID_CAP)?;
                let configs = (0..b).map(|i| points[i % points.len()].clone()).collect();
                self.evaluate_batch(configs, full).map(|_| ())
            }
            Strategy::Hyperband(h) => self.successive_halving(h.max_resource, h.eta, None),
            Strategy::Bohb(s) => self.successive_halving(s.max_resource, s.eta, Some(s)),
            _ => self.sequential(strategy),
        }
    }

    /// Proposes `workers` configurations from the current history, then evaluates them together.
    fn sequential(&mut self, strategy: &Strategy) -> Result<(), ExplorerError> {
        let batch = self.options.workers.max(1);
        while self.history.len() < self.options.budget {
            let start = self.next_id();
            let n = batch.min(self.options.budget - self.history.len());
            let mut configs = Vec::with_capacity(n);
            for k in 0..n as u64 {
                let id = start + k;
                let mut rng = seed::rng(self.trial_seed(id));
                let h = &self.history;
                let c = match strategy {
                    Strategy::Evolution(e) => evolution_propose(h, self.space, &mut rng, e.population_size),
                    Strategy::Anneal(a) => anneal_propose(h, self.space, a, &mut rng, id),
                    Strategy::Tpe(t) => tpe_propose(h, self.space, t, &mut rng),
                    Strategy::Gp(g) => gp_propose(h, self.space, g, &mut rng)?,
                    _ => unreachable!("batch strategies are driven elsewhere"),
                };
                configs.push(c);
            }
            self.evaluate_batch(configs, self.options.full_budget)?;
        }
        Ok(())
    }

    fn successive_halving(&mut self, max_resource: f64, eta: usize, bohb: Option<&BohbSettings>) -> Result<(), ExplorerError> {
        let brackets = hyperband_schedule(max_resource, eta)?;
        loop {
            for bracket in &brackets {
                let start = self.next_id();
                let mut configs: Vec<Configuration> = (0..bracket.rungs[0].n_configs as u64)
                    .map(|k| {
                        let mut rng = seed::rng(self.trial_seed(start + k));
                        match bohb {
                            Some(s) => bohb_propose(&self.history, self.space, s, &mut rng),
                            None => self.space.sample_with(&mut rng),
                        }
                    })
                    .collect();
                for (i, rung) in bracket.rungs.iter().enumerate() {
                    let remaining = self.options.budget - self.history.len();
                    if remaining == 0 {
                        return Ok(());
                    }
                    if configs.is_empty() {
                        break;
                    }
                    configs.truncate(remaining);
                    let range = self.evaluate_batch(configs, rung.resource)?;
                    let Some(next) = bracket.rungs.get(i + 1) else { break };
                    let mut ranked: Vec<&Trial> = self.history[range].iter().collect();
                    ranked.sort_by(|a, b| a.nu.total_cmp(&b.nu).then(a.trial_id.cmp(&b.trial_id)));
                    configs = ranked.iter().take(next.n_configs).map(|t| t.config.clone()).collect();
                }
            }
            if self.history.len() >= self.options.budget {
                return Ok(());
            }
        }
    }

    /// Evaluates `configs` under consecutive ids and merges them in id order.
    fn evaluate_batch(&mut self, configs: Vec<Configuration>, budget: f64) -> Result<std::ops::Range<usize>, ExplorerError> {
        let start = self.history.len();
        let jobs: Vec<(u64, u64, Configuration)> = configs
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let id = (start + k) as u64;
                (id, self.trial_seed(id), c)
            })
            .collect();
        let evaluator = self.evaluator;
        let eval_one = |(id, s, c): &(u64, u64, Configuration)| evaluator.evaluate(c, budget, *s).map_err(|e| (*id, e));
        let results: Vec<Result<Outcome, (u64, EvalError)>> = match &self.pool {
            Some(pool) => pool.install(|| jobs.par_iter().map(eval_one).collect()),
            None => jobs.iter().map(eval_one).collect(),
        };
        for ((id, s, config), res) in jobs.into_iter().zip(results) {
            let outcome = res.map_err(|(trial_id, e)| ExplorerError::Eval {
                trial_id,
                message: e.0,
            })?;
            let trial = Trial {
                trial_id: id,
                config,
                budget,
                nu: outcome.nu,
                per_activity_nu: outcome.per_activity_nu,
                f1: outcome.f1,
                seed: s,
            };
            if !trial.check(None) {
                return Err(ExplorerError::BadOutcome { trial_id: id });
            }
            (self.sink)(&trial)?;
            self.history.push(trial);
        }
        Ok(start..self.history.len())
    }
}
