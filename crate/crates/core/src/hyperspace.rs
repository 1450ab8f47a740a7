//! Hyperparameter search spaces, configurations and trial records.
//!
//! Every parameter is tagged with the data source it governs (or `"global"`).
//! The unit-cube encoding implemented here is what the explorers and the
//! fANOVA surrogate operate on.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Source tag for parameters that do not govern a specific data source.
pub const GLOBAL_TAG: &str = "global";

/// Default cap on the number of grid points produced by [`grid`].
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter `{name}`: inverted bounds ({lower} >= {upper})")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("parameter `{0}`: numeric kind requires finite lower and upper bounds")]
    MissingBounds(String),
    #[error("parameter `{0}`: log prior requires positive lower bound")]
    LogPriorNonPositive(String),
    #[error("parameter `{0}`: categorical kind requires at least 2 distinct choices")]
    TooFewChoices(String),
    #[error("parameter `{0}`: categorical kind takes no bounds or log prior")]
    CategoricalWithBounds(String),
    #[error("parameter `{0}`: at most 64 categorical choices are supported")]
    TooManyChoices(String),
    #[error("parameter `{0}`: empty name or source tag")]
    EmptyIdentifier(String),
    #[error("configuration is missing parameter `{0}`")]
    MissingParam(String),
    #[error("configuration has unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}`: value {value} outside [{lower}, {upper}]")]
    OutOfBounds { name: String, value: f64, lower: f64, upper: f64 },
    #[error("parameter `{name}`: value is not an integer ({value})")]
    NotInteger { name: String, value: f64 },
    #[error("parameter `{name}`: unknown choice `{choice}`")]
    UnknownChoice { name: String, choice: String },
    #[error("parameter `{0}`: value has the wrong type")]
    WrongType(String),
    #[error("unit vector has {got} dimensions, space has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid of {size} points exceeds cap {cap}")]
    GridTooLarge { size: u128, cap: usize },
    #[error("points_per_dim must be >= 2")]
    GridResolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Continuous,
    Integer,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    #[default]
    Uniform,
    Log,
}

fn global_tag() -> String {
    GLOBAL_TAG.to_string()
}

/// One searchable hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub choices: Vec<String>,
    #[serde(default)]
    pub prior: Prior,
    #[serde(default = "global_tag")]
    pub source_tag: String,
}

impl ParamSpec {
    pub fn continuous(name: &str, lower: f64, upper: f64, prior: Prior) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Continuous,
            lower: Some(lower),
            upper: Some(upper),
            choices: Vec::new(),
            prior,
            source_tag: global_tag(),
        }
    }

    pub fn integer(name: &str, lower: i64, upper: i64, prior: Prior) -> Self {
        Self {
            kind: ParamKind::Integer,
            ..Self::continuous(name, lower as f64, upper as f64, prior)
        }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Categorical,
            lower: None,
            upper: None,
            choices: choices.iter().map(|c| c.to_string()).collect(),
            prior: Prior::Uniform,
            source_tag: global_tag(),
        }
    }

    pub fn with_source(mut self, tag: &str) -> Self {
        self.source_tag = tag.to_string();
        self
    }

    pub fn is_global(&self) -> bool {
        self.source_tag == GLOBAL_TAG
    }

    pub fn n_choices(&self) -> usize {
        self.choices.len()
    }

    fn bounds(&self) -> (f64, f64) {
        (self.lower.unwrap_or(0.0), self.upper.unwrap_or(1.0))
    }

    fn validate(&self) -> Result<(), SpaceError> {
        if self.name.is_empty() || self.source_tag.is_empty() {
            return Err(SpaceError::EmptyIdentifier(self.name.clone()));
        }
        match self.kind {
            ParamKind::Categorical => {
                if self.lower.is_some() || self.upper.is_some() || self.prior == Prior::Log {
                    return Err(SpaceError::CategoricalWithBounds(self.name.clone()));
                }
                let distinct: BTreeSet<&String> = self.choices.iter().collect();
                if distinct.len() < 2 || distinct.len() != self.choices.len() {
                    return Err(SpaceError::TooFewChoices(self.name.clone()));
                }
                if self.choices.len() > 64 {
                    return Err(SpaceError::TooManyChoices(self.name.clone()));
                }
            }
            ParamKind::Continuous | ParamKind::Integer => {
                let (lower, upper) = match (self.lower, self.upper) {
                    (Some(l), Some(u)) if l.is_finite() && u.is_finite() => (l, u),
                    _ => return Err(SpaceError::MissingBounds(self.name.clone())),
                };
                if lower >= upper {
                    return Err(SpaceError::InvertedBounds {
                        name: self.name.clone(),
                        lower,
                        upper,
                    });
                }
                if self.prior == Prior::Log && lower <= 0.0 {
                    return Err(SpaceError::LogPriorNonPositive(self.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Maps a numeric value into `[0, 1]` in the prior's domain.
    fn numeric_to_unit(&self, v: f64) -> f64 {
        let (lo, hi) = self.bounds();
        match self.prior {
            Prior::Uniform => (v - lo) / (hi - lo),
            Prior::Log => (v / lo).ln() / (hi / lo).ln(),
        }
    }

    fn numeric_from_unit(&self, u: f64) -> f64 {
        let (lo, hi) = self.bounds();
        let u = u.clamp(0.0, 1.0);
        let v = match self.prior {
            Prior::Uniform => lo + u * (hi - lo),
            Prior::Log => (lo.ln() + u * (hi.ln() - lo.ln())).exp(),
        };
        let v = if u == 0.0 {
            lo
        } else if u == 1.0 {
            hi
        } else {
            v.clamp(lo, hi)
        };
        match self.kind {
            ParamKind::Integer => v.round().clamp(lo, hi),
            _ => v,
        }
    }

    /// Value of this parameter at unit coordinate `u`.
    pub fn value_from_unit(&self, u: f64) -> ParamValue {
        match self.kind {
            ParamKind::Categorical => {
                let n = self.choices.len();
                let idx = (u.clamp(0.0, 1.0) * (n - 1) as f64).round() as usize;
                ParamValue::Choice(self.choices[idx.min(n - 1)].clone())
            }
            _ => ParamValue::Number(self.numeric_from_unit(u)),
        }
    }

    /// Unit coordinate of `value`, checking it against the domain.
    pub fn value_to_unit(&self, value: &ParamValue) -> Result<f64, SpaceError> {
        match (self.kind, value) {
            (ParamKind::Categorical, ParamValue::Choice(c)) => {
                let idx = self
                    .choices
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| SpaceError::UnknownChoice {
                        name: self.name.clone(),
                        choice: c.clone(),
                    })?;
                Ok(idx as f64 / (self.choices.len() - 1) as f64)
            }
            (ParamKind::Categorical, ParamValue::Number(_)) => {
                Err(SpaceError::WrongType(self.name.clone()))
            }
            (_, ParamValue::Number(v)) => {
                let (lo, hi) = self.bounds();
                if !(lo..=hi).contains(v) {
                    return Err(SpaceError::OutOfBounds {
                        name: self.name.clone(),
                        value: *v,
                        lower: lo,
                        upper: hi,
                    });
                }
                if self.kind == ParamKind::Integer && v.fract() != 0.0 {
                    return Err(SpaceError::NotInteger {
                        name: self.name.clone(),
                        value: *v,
                    });
                }
                Ok(self.numeric_to_unit(*v).clamp(0.0, 1.0))
            }
            (_, ParamValue::Choice(_)) => Err(SpaceError::WrongType(self.name.clone())),
        }
    }

    /// Draws one value from the prior.
    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        let (lo, hi) = self.bounds();
        match (self.kind, self.prior) {
            (ParamKind::Categorical, _) => {
                ParamValue::Choice(self.choices[rng.gen_range(0..self.choices.len())].clone())
            }
            (ParamKind::Integer, Prior::Uniform) => {
                ParamValue::Number(rng.gen_range(lo as i64..=hi as i64) as f64)
            }
            (ParamKind::Integer, Prior::Log) => {
                let v = (rng.gen_range(lo.ln()..=hi.ln())).exp();
                ParamValue::Number(v.round().clamp(lo, hi))
            }
            (ParamKind::Continuous, Prior::Uniform) => {
                ParamValue::Number(rng.gen_range(lo..=hi))
            }
            (ParamKind::Continuous, Prior::Log) => {
                ParamValue::Number(rng.gen_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi))
            }
        }
    }

    /// Per-dimension grid values, equispaced in the prior domain.
    fn grid_values(&self, points: usize) -> Vec<ParamValue> {
        match self.kind {
            ParamKind::Categorical => self
                .choices
                .iter()
                .map(|c| ParamValue::Choice(c.clone()))
                .collect(),
            _ => {
                let mut out: Vec<ParamValue> = Vec::with_capacity(points);
                for i in 0..points {
                    let v = self.value_from_unit(i as f64 / (points - 1) as f64);
                    if self.kind == ParamKind::Integer && out.last() == Some(&v) {
                        continue;
                    }
                    out.push(v);
                }
                out
            }
        }
    }
}

/// A validated, ordered list of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
    source_map: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    params: Vec<ParamSpec>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = SpaceError;
    fn try_from(raw: RawSpace) -> Result<Self, SpaceError> {
        SearchSpace::new(raw.params)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(space: SearchSpace) -> Self {
        RawSpace {
            params: space.params,
        }
    }
}

/// Checks every parameter invariant; the error names the first violating parameter.
pub fn validate_space(params: &[ParamSpec]) -> Result<(), SpaceError> {
    let mut seen = BTreeSet::new();
    for p in params {
        if !seen.insert(p.name.as_str()) {
            return Err(SpaceError::DuplicateName(p.name.clone()));
        }
        p.validate()?;
    }
    Ok(())
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        validate_space(&params)?;
        let mut source_map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for p in &params {
            source_map
                .entry(p.source_tag.clone())
                .or_default()
                .insert(p.name.clone());
        }
        Ok(Self { params, source_map })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Source tag → parameter names, including the `"global"` bucket if present.
    pub fn source_map(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.source_map
    }

    /// Parameters governing a given data source.
    pub fn source_params(&self, source: &str) -> Option<&BTreeSet<String>> {
        self.source_map.get(source)
    }

    /// Source tags other than `"global"`.
    pub fn sources(&self) -> Vec<&str> {
        self.source_map
            .keys()
            .filter(|k| k.as_str() != GLOBAL_TAG)
            .map(String::as_str)
            .collect()
    }

    pub fn validate_config(&self, config: &Configuration) -> Result<(), SpaceError> {
        self.to_unit(config).map(|_| ())
    }

    /// Encodes `config` into the unit cube, in parameter order.
    pub fn to_unit(&self, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
        for name in config.values.keys() {
            if self.index_of(name).is_none() {
                return Err(SpaceError::UnknownParam(name.clone()));
            }
        }
        self.params
            .iter()
            .map(|p| {
                let v = config
                    .values
                    .get(&p.name)
                    .ok_or_else(|| SpaceError::MissingParam(p.name.clone()))?;
                p.value_to_unit(v)
            })
            .collect()
    }

    /// Decodes a unit vector; integers and categoricals are rounded to the
    /// nearest representable value.
    pub fn from_unit(&self, unit: &[f64]) -> Result<Configuration, SpaceError> {
        if unit.len() != self.params.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.params.len(),
                got: unit.len(),
            });
        }
        let values = self
            .params
            .iter()
            .zip(unit)
            .map(|(p, &u)| (p.name.clone(), p.value_from_unit(u)))
            .collect();
        Ok(Configuration { values })
    }

    /// Snaps a unit vector onto the representable lattice (integers, choices).
    pub fn snap_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(unit)
            .map(|(p, &u)| {
                let u = u.clamp(0.0, 1.0);
                match p.kind {
                    ParamKind::Continuous => u,
                    _ => p
                        .value_to_unit(&p.value_from_unit(u))
                        .expect("decoded value is in domain"),
                }
            })
            .collect()
    }

    /// True for integer and categorical dimensions.
    pub fn is_discrete(&self, dim: usize) -> bool {
        self.params[dim].kind != ParamKind::Continuous
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let values = self
            .params
            .iter()
            .map(|p| (p.name.clone(), p.sample_value(rng)))
            .collect();
        Configuration { values }
    }
}

/// Draws a configuration from the priors; deterministic per seed.
pub fn sample(space: &SearchSpace, seed: u64) -> Configuration {
    space.sample_with(&mut seed::rng(seed))
}

/// Cartesian product of per-dimension grids, first parameter varying slowest.
pub fn grid(
    space: &SearchSpace,
    points_per_dim: usize,
    cap: usize,
) -> Result<Vec<Configuration>, SpaceError> {
    if points_per_dim < 2 {
        return Err(SpaceError::GridResolution);
    }
    let axes: Vec<Vec<ParamValue>> = space
        .params
        .iter()
        .map(|p| p.grid_values(points_per_dim))
        .collect();
    let size = axes
        .iter()
        .try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128))
        .unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(SpaceError::GridTooLarge { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let values = space
            .params
            .iter()
            .zip(&axes)
            .zip(&idx)
            .map(|((p, axis), &i)| (p.name.clone(), axis[i].clone()))
            .collect();
        out.push(Configuration { values });
        // odometer increment, last dimension fastest
        let mut d = axes.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// A parameter value: a number (continuous or integer) or a choice label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Choice(_) => None,
        }
    }

    pub fn as_choice(&self) -> Option<&str> {
        match self {
            ParamValue::Choice(c) => Some(c),
            ParamValue::Number(_) => None,
        }
    }
}

/// One full assignment of every parameter of a space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Configuration {
    pub values: BTreeMap<String, ParamValue>,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(ParamValue::as_f64)
    }

    pub fn choice(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(ParamValue::as_choice)
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: u64,
    pub config: Configuration,
    /// Training-epoch units.
    pub budget: f64,
    pub nu: f64,
    pub per_activity_nu: Vec<f64>,
    pub f1: f64,
    pub seed: u64,
}

impl Trial {
    /// Checks the `[0, 1]` range of every loss and the activity count.
    pub fn check(&self, n_activities: Option<usize>) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        self.budget > 0.0
            && unit(self.nu)
            && unit(self.f1)
            && self.per_activity_nu.iter().all(|&v| unit(v))
            && n_activities.is_none_or(|n| n == self.per_activity_nu.len())
    }
}

#[derive(Debug, Error)]
pub enum TrialLogError {
    #[error("trial log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trial log line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// Append-only JSON-lines trial log, flushed after every record.
pub struct TrialLogWriter<W: Write> {
    out: W,
}

impl TrialLogWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, TrialLogError> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }
}

impl<W: Write> TrialLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn append(&mut self, trial: &Trial) -> Result<(), TrialLogError> {
        let line = serde_json::to_string(trial).map_err(|e| TrialLogError::Parse {
            line: trial.trial_id as usize,
            source: e,
        })?;
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn parse_trial_log<R: BufRead>(reader: R) -> Result<Vec<Trial>, TrialLogError> {
    let mut trials = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trial = serde_json::from_str(&line).map_err(|e| TrialLogError::Parse {
            line: i + 1,
            source: e,
        })?;
        trials.push(trial);
    }
    Ok(trials)
}

pub fn read_trial_log(path: &Path) -> Result<Vec<Trial>, TrialLogError> {
    parse_trial_log(BufReader::new(File::open(path)?))
}

/// The thirteen-parameter space of the convolutional / hybrid study, all tagged global.
pub fn table1_space() -> SearchSpace {
    use Prior::*;
    SearchSpace::new(vec![
        ParamSpec::continuous("lr", 0.001, 0.1, Log),
        ParamSpec::integer("ks1", 9, 15, Uniform),
        ParamSpec::integer("ks2", 9, 15, Uniform),
        ParamSpec::integer("ks3", 9, 12, Uniform),
        ParamSpec::integer("n_f", 16, 28, Uniform),
        ParamSpec::continuous("s", 0.5, 0.6, Log),
        ParamSpec::continuous("p_d", 0.1, 0.5, Log),
        ParamSpec::integer("n_u", 64, 2048, Uniform),
        ParamSpec::integer("n_hu1", 64, 384, Uniform),
        ParamSpec::integer("n_hu2", 64, 384, Uniform),
        ParamSpec::continuous("p_in", 0.5, 1.0, Log),
        ParamSpec::continuous("p_ou", 0.5, 1.0, Log),
        ParamSpec::continuous("p_st", 0.5, 1.0, Log),
    ])
    .expect("table 1 space is valid")
}

/// Prefix of the per-source input-branch switches (`use.<source id>`).
pub const SOURCE_SWITCH_PREFIX: &str = "use.";

/// A search space with global learner parameters plus one on/off input-branch
/// switch per data source, tagged with that source.
pub fn source_switch_space(globals: Vec<ParamSpec>, sources: &[&str]) -> Result<SearchSpace, SpaceError> {
    let mut params = globals;
    for s in sources {
        params.push(
            ParamSpec::categorical(&format!("{SOURCE_SWITCH_PREFIX}{s}"), &["off", "on"]).with_source(s),
        );
    }
    SearchSpace::new(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lr_space() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::continuous("lr", 0.001, 0.1, Prior::Log)]).unwrap()
    }

    fn config(pairs: &[(&str, ParamValue)]) -> Configuration {
        Configuration {
            values: pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn table1_space_validates() {
        let space = table1_space();
        assert_eq!(space.dim(), 13);
        assert!(validate_space(space.params()).is_ok());
        assert_eq!(space.sources(), Vec::<&str>::new());
    }

    #[test]
    fn inverted_bounds_rejected() {
        let err = SearchSpace::new(vec![ParamSpec::continuous("lr", 0.1, 0.001, Prior::Log)]).unwrap_err();
        assert!(matches!(err, SpaceError::InvertedBounds { .. }));
        assert!(err.to_string().contains("inverted bounds"));
    }

    #[test]
    fn log_prior_needs_positive_lower() {
        let err = SearchSpace::new(vec![ParamSpec::continuous("p_d", 0.0, 0.5, Prior::Log)]).unwrap_err();
        assert!(err.to_string().contains("log prior requires positive lower"));
    }

    #[test]
    fn duplicate_and_categorical_errors() {
        let dup = vec![
            ParamSpec::continuous("a", 0.0, 1.0, Prior::Uniform),
            ParamSpec::continuous("a", 0.0, 2.0, Prior::Uniform),
        ];
        assert_eq!(validate_space(&dup), Err(SpaceError::DuplicateName("a".into())));
        let one = ParamSpec::categorical("c", &["x"]);
        assert_eq!(validate_space(&[one]), Err(SpaceError::TooFewChoices("c".into())));
        let mut bounded = ParamSpec::categorical("c", &["x", "y"]);
        bounded.lower = Some(0.0);
        assert_eq!(validate_space(&[bounded]), Err(SpaceError::CategoricalWithBounds("c".into())));
    }

    #[test]
    fn unit_encoding_examples() {
        let space = lr_space();
        let lo = space.to_unit(&config(&[("lr", ParamValue::Number(0.001))])).unwrap();
        assert_eq!(lo, vec![0.0]);
        let mid = space.to_unit(&config(&[("lr", ParamValue::Number(0.01))])).unwrap();
        let oracle = (0.01f64 / 0.001).ln() / (0.1f64 / 0.001).ln();
        assert!((mid[0] - oracle).abs() < 1e-15);
        assert!((mid[0] - 0.5).abs() < 1e-12);

        let cat = SearchSpace::new(vec![ParamSpec::categorical("m", &["a", "b", "c"])]).unwrap();
        let u = cat.to_unit(&config(&[("m", ParamValue::Choice("c".into()))])).unwrap();
        assert_eq!(u, vec![1.0]);
    }

    #[test]
    fn config_mismatch_errors() {
        let space = lr_space();
        assert_eq!(
            space.to_unit(&Configuration::default()),
            Err(SpaceError::MissingParam("lr".into()))
        );
        let extra = config(&[("lr", ParamValue::Number(0.01)), ("x", ParamValue::Number(1.0))]);
        assert_eq!(space.to_unit(&extra), Err(SpaceError::UnknownParam("x".into())));
        let oob = config(&[("lr", ParamValue::Number(0.5))]);
        assert!(matches!(space.to_unit(&oob), Err(SpaceError::OutOfBounds { .. })));
    }

    #[test]
    fn sampling_is_deterministic() {
        let space = table1_space();
        assert_eq!(sample(&space, 9), sample(&space, 9));
        assert_ne!(sample(&space, 9), sample(&space, 10));
    }

    #[test]
    fn log_uniform_median() {
        // median of log-uniform on [1e-3, 1e-1] is 1e-2; binomial bound on the
        // empirical median for n = 10_000 is far inside [0.008, 0.0125]
        let space = lr_space();
        let mut rng = seed::rng(2024);
        let mut draws: Vec<f64> = (0..10_000)
            .map(|_| space.sample_with(&mut rng).number("lr").unwrap())
            .collect();
        draws.sort_by(f64::total_cmp);
        let median = 0.5 * (draws[4999] + draws[5000]);
        assert!((0.008..=0.0125).contains(&median), "median {median}");
    }

    #[test]
    fn integer_sampling_covers_range() {
        let space = SearchSpace::new(vec![ParamSpec::integer("n_f", 16, 28, Prior::Uniform)]).unwrap();
        let mut rng = seed::rng(5);
        let seen: BTreeSet<i64> = (0..10_000)
            .map(|_| space.sample_with(&mut rng).number("n_f").unwrap() as i64)
            .collect();
        assert_eq!(seen, (16..=28).collect());
    }

    #[test]
    fn grid_examples() {
        let two = SearchSpace::new(vec![
            ParamSpec::continuous("a", 0.0, 1.0, Prior::Uniform),
            ParamSpec::continuous("b", 0.0, 1.0, Prior::Uniform),
        ])
        .unwrap();
        let g = grid(&two, 3, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[1].number("b"), Some(0.5));
        assert_eq!(g[1].number("a"), Some(0.0));

        let lr = grid(&lr_space(), 3, DEFAULT_GRID_CAP).unwrap();
        let vals: Vec<f64> = lr.iter().map(|c| c.number("lr").unwrap()).collect();
        for (v, want) in vals.iter().zip([0.001, 0.01, 0.1]) {
            assert!((v / want - 1.0).abs() < 1e-12, "{v} vs {want}");
        }

        let int = SearchSpace::new(vec![ParamSpec::integer("k", 9, 12, Prior::Uniform)]).unwrap();
        let g = grid(&int, 10, DEFAULT_GRID_CAP).unwrap();
        let vals: Vec<f64> = g.iter().map(|c| c.number("k").unwrap()).collect();
        assert_eq!(vals, vec![9.0, 10.0, 11.0, 12.0]);
    }

    #[test]
    fn grid_cap_enforced() {
        let err = grid(&table1_space(), 10, DEFAULT_GRID_CAP).unwrap_err();
        assert!(matches!(err, SpaceError::GridTooLarge { .. }));
    }

    #[test]
    fn source_map_partitions_params() {
        let space = source_switch_space(
            vec![ParamSpec::continuous("lr", 0.001, 0.1, Prior::Log)],
            &["Hips-acc", "Hand-acc"],
        )
        .unwrap();
        let total: usize = space.source_map().values().map(BTreeSet::len).sum();
        assert_eq!(total, space.dim());
        assert_eq!(space.sources(), vec!["Hand-acc", "Hips-acc"]);
        assert!(space.source_params("Hips-acc").unwrap().contains("use.Hips-acc"));
    }

    #[test]
    fn json_shape() {
        let space = lr_space();
        let text = serde_json::to_string(&space).unwrap();
        assert!(text.starts_with("{\"params\":[{\"name\":\"lr\",\"kind\":\"continuous\""));
        let back = SearchSpace::from_json(&text).unwrap();
        assert_eq!(back, space);
        let bad = r#"{"params":[{"name":"lr","kind":"continuous","lower":0.1,"upper":0.001}]}"#;
        assert!(SearchSpace::from_json(bad).is_err());
    }

    #[test]
    fn trial_log_round_trip() {
        let trial = Trial {
            trial_id: 0,
            config: sample(&lr_space(), 1),
            budget: 3.0,
            nu: 0.25,
            per_activity_nu: vec![0.5, 0.0],
            f1: 0.7,
            seed: 11,
        };
        let mut w = TrialLogWriter::new(Vec::new());
        w.append(&trial).unwrap();
        let bytes = w.into_inner();
        let back = parse_trial_log(&bytes[..]).unwrap();
        assert_eq!(back, vec![trial]);
        let err = parse_trial_log(&b"{}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
