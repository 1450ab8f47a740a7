//! Stage bodies shared by the subcommands and the pipeline.

use std::path::Path;

use dynbias::dgp::DgpModel;
use dynbias::explorer::{run_with_sink, ExplorerError, RunOptions, Strategy};
use dynbias::fanova::{decompose, fit_forest, full_budget_trials, pairwise_marginal_table, Forest, ForestParams, MarginalGrid, Response};
use dynbias::hyperspace::{read_trial_log, TrialLogWriter};
use dynbias::learner::{run_protocol, HoldoutEvaluator, ModelConfig, ProtocolMode, ProtocolOptions, ProtocolSummary, Subsets};
use dynbias::sensors::{generate, ingest_csv, meta_segment_partition, write_dataset, DatasetMeta, Deployment, Frame, GenerateOptions};
use dynbias::{seed, SearchSpace, Trial};
use serde_json::json;

use crate::artifacts::{load_frames, read_json, require, FoldsFile, PlantedFile, ReportFile, SweepRow};
use crate::provenance::{write_sidecar, Provenance};

pub fn load_space(path: &Path) -> Result<SearchSpace, String> {
    require(path, "space file")?;
    SearchSpace::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Generates a planted dataset into `out`, replacing it only once complete.
pub fn run_generate(planted: &Path, options: &GenerateOptions, out: &Path, prov: &Provenance) -> Result<DatasetMeta, String> {
    require(planted, "planted file")?;
    let file: PlantedFile = read_json(planted)?;
    let ds = generate(&file.deployment, &file.planted, &file.sensor_models, options).map_err(|e| e.to_string())?;
    let staging = out.with_extension("partial");
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| e.to_string())?;
    }
    let meta_prov = json!({ "provenance": prov, "generate": options });
    write_dataset(&staging, &ds, Some(meta_prov), Some(&prov.line())).map_err(|e| e.to_string())?;
    if out.exists() {
        std::fs::remove_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    std::fs::rename(&staging, out).map_err(|e| format!("{}: {e}", out.display()))?;
    read_json(&out.join("meta.json"))
}

/// Window length recorded by `generate`, if any.
pub fn generated_window(data: &Path) -> Option<usize> {
    let meta: DatasetMeta = read_json(&data.join("meta.json")).ok()?;
    meta.provenance?.get("generate")?.get("window_len")?.as_u64().map(|w| w as usize)
}

pub struct PartitionArgs {
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub max_gap_fraction: f64,
    pub k: usize,
    pub meta_len: usize,
    pub seed: u64,
}

pub fn run_partition(data: &Path, args: &PartitionArgs, prov: &Provenance) -> Result<FoldsFile, String> {
    require(&data.join("meta.json"), "dataset")?;
    let window = args
        .window
        .or_else(|| generated_window(data))
        .ok_or("window length unknown; pass it explicitly")?;
    let stride = args.stride.unwrap_or(window);
    let ds = ingest_csv(data).map_err(|e| e.to_string())?;
    let mut file = FoldsFile {
        window_len: window,
        stride,
        max_gap_fraction: args.max_gap_fraction,
        assignment: dynbias::sensors::FoldAssignment {
            k: args.k,
            meta_len: args.meta_len,
            seed: args.seed,
            folds: Default::default(),
        },
        provenance: Some(prov.clone()),
    };
    let frames = file.segment(&ds).map_err(|e| e.to_string())?;
    file.assignment = meta_segment_partition(&frames, args.k, args.meta_len, args.seed).map_err(|e| e.to_string())?;
    Ok(file)
}

pub struct ExploreArgs<'a> {
    pub strategy: &'a Strategy,
    pub budget: usize,
    pub seed: u64,
    pub workers: usize,
    pub model: &'a ModelConfig,
    pub holdout: usize,
    pub include_null: bool,
}

/// Runs the explorer with the learner as evaluator, streaming the trial log to `out`.
pub fn run_explore(space: &SearchSpace, data: &Path, folds_path: &Path, args: &ExploreArgs, out: &Path, prov: &Provenance) -> Result<Vec<Trial>, String> {
    require(folds_path, "folds file")?;
    let folds: FoldsFile = read_json(folds_path)?;
    let (ds, frames) = load_frames(data, &folds)?;
    if args.holdout >= folds.assignment.k {
        return Err(format!("holdout fold {} out of range for k = {}", args.holdout, folds.assignment.k));
    }
    let evaluator = HoldoutEvaluator {
        deployment: &ds.deployment,
        activities: &ds.activities,
        frames: &frames,
        folds: &folds.assignment,
        base: args.model.clone(),
        holdout: args.holdout,
        include_null: args.include_null,
    };
    let options = RunOptions {
        workers: args.workers.max(1),
        full_budget: args.model.epochs as f64,
        ..RunOptions::new(args.budget, args.seed)
    };
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    }
    let marker = crate::provenance::sidecar(out);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| e.to_string())?;
    }
    let mut writer = TrialLogWriter::create(out).map_err(|e| e.to_string())?;
    let trials = run_with_sink(space, args.strategy, &evaluator, &options, |t| {
        writer.append(t).map_err(|e| ExplorerError::Sink(e.to_string()))
    })
    .map_err(|f| f.to_string())?;
    write_sidecar(out, prov).map_err(|e| e.to_string())?;
    Ok(trials)
}

pub fn load_trials(path: &Path) -> Result<Vec<Trial>, String> {
    require(path, "trial log")?;
    read_trial_log(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Fits a forest on the full-budget trials and decomposes it.
pub fn analyze_response(trials: &[Trial], space: &SearchSpace, response: Response, params: &ForestParams, seed_value: u64) -> Result<(Forest, dynbias::fanova::ImportanceReport), String> {
    let full = full_budget_trials(trials);
    let forest = fit_forest(&full, space, response, params, seed_value).map_err(|e| e.to_string())?;
    let report = decompose(&forest);
    Ok((forest, report))
}

/// Responses `nu` then one per activity.
pub fn responses(activities: &[String]) -> Vec<(Response, Option<String>)> {
    std::iter::once((Response::Nu, None))
        .chain(activities.iter().enumerate().map(|(i, a)| (Response::PerActivity(i), Some(a.clone()))))
        .collect()
}

pub fn analyze_all(
    trials: &[Trial],
    space: &SearchSpace,
    activities: &[String],
    params: &ForestParams,
    seed_value: u64,
    prov: &Provenance,
) -> Result<(Vec<ReportFile>, Forest), String> {
    let mut out = Vec::new();
    let mut overall = None;
    for (i, (response, activity)) in responses(activities).into_iter().enumerate() {
        let (forest, report) = analyze_response(trials, space, response, params, seed::derive(seed_value, i as u64))?;
        if i == 0 {
            overall = Some(forest);
        }
        out.push(ReportFile {
            activity,
            report,
            provenance: Some(prov.clone()),
        });
    }
    Ok((out, overall.expect("nu response is always first")))
}

/// Explicit pairs, or the strongest positive interactions of `report`.
pub fn choose_pairs(report: &dynbias::fanova::ImportanceReport, explicit: &[(String, String)], top: usize) -> Vec<(String, String)> {
    if !explicit.is_empty() {
        return explicit.to_vec();
    }
    let mut pairs: Vec<_> = report.pairwise.iter().filter(|p| p.importance > 0.0).collect();
    pairs.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    pairs.into_iter().take(top).map(|p| (p.u.clone(), p.v.clone())).collect()
}

pub fn marginal_grids(forest: &Forest, pairs: &[(String, String)], resolution: usize) -> Result<Vec<MarginalGrid>, String> {
    pairs
        .iter()
        .map(|(u, v)| {
            let iu = forest.dim_index(u).ok_or_else(|| format!("unknown parameter `{u}`"))?;
            let iv = forest.dim_index(v).ok_or_else(|| format!("unknown parameter `{v}`"))?;
            pairwise_marginal_table(forest, iu, iv, resolution).map_err(|e| e.to_string())
        })
        .collect()
}

/// DGP model from per-activity reports; the overall report is ignored.
pub fn dgp_from_reports(reports: &[ReportFile], space: &SearchSpace, tau_imp: f64, tau_int: f64) -> Result<DgpModel, String> {
    let per: Vec<(String, dynbias::fanova::ImportanceReport)> = reports
        .iter()
        .filter_map(|r| r.activity.clone().map(|a| (a, r.report.clone())))
        .collect();
    if per.is_empty() {
        return Err("no per-activity reports (reports need an `activity` field)".into());
    }
    DgpModel::from_reports(&per, space, tau_imp, tau_int).map_err(|e| e.to_string())
}

pub struct Cohort {
    pub deployment: Deployment,
    pub activities: Vec<String>,
    pub frames: Vec<Frame>,
    pub folds: FoldsFile,
}

pub fn load_cohort(data: &Path, folds_path: &Path) -> Result<Cohort, String> {
    require(folds_path, "folds file")?;
    let folds: FoldsFile = read_json(folds_path)?;
    let (ds, frames) = load_frames(data, &folds)?;
    Ok(Cohort {
        deployment: ds.deployment,
        activities: ds.activities,
        frames,
        folds,
    })
}

/// Subsets for `mode`, checked against the cohort's activities and sources.
pub fn mode_subsets(cohort: &Cohort, model: Option<&DgpModel>) -> Result<Option<Subsets>, String> {
    let Some(m) = model else {
        return Ok(None);
    };
    for a in &cohort.activities {
        if !m.per_activity.contains_key(a) {
            return Err(format!("DGP model has no entry for activity `{a}`"));
        }
    }
    for s in m.sources() {
        if cohort.deployment.source_index(&s).is_none() {
            return Err(format!("DGP model names unknown source `{s}`"));
        }
    }
    Ok(Some(m.subsets()))
}

pub fn run_train(cohort: &Cohort, config: &ModelConfig, mode: ProtocolMode, subsets: Option<&Subsets>, options: &ProtocolOptions, seed_value: u64) -> Result<ProtocolSummary, String> {
    run_protocol(&cohort.deployment, &cohort.activities, &cohort.frames, &cohort.folds.assignment, config, mode, subsets, options, seed_value).map_err(|e| e.to_string())
}

/// w-DGP performance and mean subset size at each importance threshold.
pub fn run_sweep(cohort: &Cohort, config: &ModelConfig, dgp: &DgpModel, taus: &[f64], options: &ProtocolOptions, seed_value: u64) -> Result<Vec<SweepRow>, String> {
    taus.iter()
        .map(|&tau| {
            let model = dgp.with_thresholds(tau, dgp.tau_int).map_err(|e| e.to_string())?;
            let subsets = model.subsets();
            let s = run_train(cohort, config, ProtocolMode::WDgp, Some(&subsets), options, seed_value)?;
            Ok(SweepRow {
                tau_imp: tau,
                mean_f1: s.mean_f1,
                std_f1: s.std_f1,
                mean_subset_size: model.mean_subset_size(),
            })
        })
        .collect()
}
