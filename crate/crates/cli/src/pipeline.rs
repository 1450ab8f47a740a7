//! End-to-end stage runner with up-to-date detection.

use std::path::{Path, PathBuf};

use dynbias::dgp::{load_hexp, DgpModel};
use dynbias::learner::ProtocolMode;
use dynbias::sensors::{DatasetMeta, GenerateOptions};
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, slug, write_json, write_text, MarginalFile, MetricsFile, ReportFile, SweepFile};
use crate::error::CliError;
use crate::manifest::{Manifest, Seeds, STAGES};
use crate::provenance::{config_hash, sidecar, Provenance};
use crate::report::{write_bundle, ReportInputs};
use crate::stages::{self, Cohort, ExploreArgs, PartitionArgs};

#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub force: bool,
    pub workers: usize,
    /// Replaces every stage seed with one derived from this base.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
    Disabled,
}

/// Listing written by `analyze` so later stages find its outputs in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeIndex {
    pub reports: Vec<String>,
    pub marginals: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    manifest: serde_json::Value,
    workers: usize,
    seeds: &'a Seeds,
}

struct Run<'a> {
    m: &'a Manifest,
    prov: Provenance,
    workers: usize,
}

fn recorded_hash(marker: &Path) -> Option<String> {
    let v: serde_json::Value = read_json(marker).ok()?;
    let h = v.get("provenance").and_then(|p| p.get("provenance").or(Some(p))).and_then(|p| p.get("config_hash")).or_else(|| v.get("config_hash"))?;
    h.as_str().map(str::to_string)
}

impl Run<'_> {
    fn marker(&self, stage: &str) -> PathBuf {
        let p = &self.m.paths;
        match stage {
            "generate" => p.data.join("meta.json"),
            "partition" => p.folds.clone(),
            "explore" => sidecar(&p.trials),
            "analyze" => p.reports.join("index.json"),
            "dgp" => p.dgp.clone(),
            "train" => p.metrics.join("sweep.json"),
            _ => p.report.join("provenance.json"),
        }
    }

    fn stage_prov(&self, stage: &str) -> Provenance {
        self.prov.for_stage(stage)
    }

    fn activities(&self) -> Result<Vec<String>, String> {
        let meta: DatasetMeta = read_json(&self.m.paths.data.join("meta.json"))?;
        Ok(meta.activities)
    }

    fn cohort(&self) -> Result<Cohort, String> {
        stages::load_cohort(&self.m.paths.data, &self.m.paths.folds)
    }

    fn run_stage(&self, stage: &str) -> Result<Vec<String>, String> {
        let m = self.m;
        let p = &m.paths;
        let prov = self.stage_prov(stage);
        let mut notices = Vec::new();
        match stage {
            "generate" => {
                let opts = GenerateOptions {
                    seed: m.seeds.generate,
                    ..m.generate.clone()
                };
                stages::run_generate(&p.planted, &opts, &p.data, &prov)?;
            }
            "partition" => {
                let args = PartitionArgs {
                    window: m.partition.window,
                    stride: m.partition.stride,
                    max_gap_fraction: m.partition.max_gap_fraction,
                    k: m.partition.k,
                    meta_len: m.partition.meta_len,
                    seed: m.seeds.partition,
                };
                let folds = stages::run_partition(&p.data, &args, &prov)?;
                write_json(&p.folds, &folds)?;
            }
            "explore" => {
                let space = stages::load_space(&p.space)?;
                let args = ExploreArgs {
                    strategy: &m.explore.strategy,
                    budget: m.explore.budget,
                    seed: m.seeds.explore,
                    workers: self.workers,
                    model: &m.model,
                    holdout: m.explore.holdout,
                    include_null: m.train.include_null,
                };
                stages::run_explore(&space, &p.data, &p.folds, &args, &p.trials, &prov)?;
            }
            "analyze" => {
                let space = stages::load_space(&p.space)?;
                let trials = stages::load_trials(&p.trials)?;
                let activities = self.activities()?;
                let (reports, overall) = stages::analyze_all(&trials, &space, &activities, &m.analyze.forest, m.seeds.analyze, &prov)?;
                let mut index = AnalyzeIndex {
                    reports: Vec::new(),
                    marginals: Vec::new(),
                    provenance: prov.clone(),
                };
                for r in &reports {
                    let stem = match &r.activity {
                        None => "report_nu".to_string(),
                        Some(a) => format!("report_{}", slug(a)),
                    };
                    write_json(&p.reports.join(format!("{stem}.json")), r)?;
                    write_text(&p.reports.join(format!("{stem}.csv")), &(prov.csv_comment() + &r.report.to_csv()))?;
                    index.reports.push(format!("{stem}.json"));
                }
                let pairs = stages::choose_pairs(&reports[0].report, &m.analyze.pairs, m.analyze.top_pairs);
                if pairs.is_empty() {
                    notices.push("no pairwise interactions; marginal tables skipped".into());
                }
                for grid in stages::marginal_grids(&overall, &pairs, m.analyze.resolution)? {
                    let name = format!("marginal_{}__{}.json", slug(&grid.u), slug(&grid.v));
                    write_json(&p.reports.join(&name), &MarginalFile { grid, provenance: Some(prov.clone()) })?;
                    index.marginals.push(name);
                }
                write_json(&p.reports.join("index.json"), &index)?;
            }
            "dgp" => {
                let space = stages::load_space(&p.space)?;
                let reports = self.reports()?;
                let mut model = stages::dgp_from_reports(&reports, &space, m.dgp.tau_imp, m.dgp.tau_int)?;
                model.provenance = Some(prov.to_value());
                model.save(&p.dgp).map_err(|e| e.to_string())?;
            }
            "train" => {
                let cohort = self.cohort()?;
                let dgp = DgpModel::from_json(&std::fs::read_to_string(&p.dgp).map_err(|e| format!("{}: {e}", p.dgp.display()))?).map_err(|e| e.to_string())?;
                let seed = m.seeds.train;
                let mut runs: Vec<(ProtocolMode, Option<DgpModel>)> = vec![(ProtocolMode::WoDgp, None), (ProtocolMode::WDgp, Some(dgp.clone()))];
                if let Some(h) = &p.hexp {
                    runs.push((ProtocolMode::WHExp, Some(load_hexp(h).map_err(|e| format!("{}: {e}", h.display()))?)));
                }
                for (mode, model) in runs {
                    let subsets = stages::mode_subsets(&cohort, model.as_ref())?;
                    let summary = stages::run_train(&cohort, &m.model, mode, subsets.as_ref(), &m.train, seed)?;
                    let file = MetricsFile {
                        summary,
                        provenance: Some(prov.clone()),
                    };
                    write_json(&p.metrics.join(format!("metrics_{mode}.json")), &file)?;
                    write_text(&p.metrics.join(format!("confusion_{mode}.csv")), &file.pooled_confusion_csv())?;
                }
                let rows = stages::run_sweep(&cohort, &m.model, &dgp, &m.report.tau_sweep, &m.train, seed)?;
                let sweep = SweepFile {
                    tau_int: dgp.tau_int,
                    n_sources: cohort.deployment.sources.len(),
                    rows,
                    provenance: Some(prov.clone()),
                };
                write_json(&p.metrics.join("sweep.json"), &sweep)?;
            }
            "report" => {
                let trials = stages::load_trials(&p.trials)?;
                let reports = self.reports()?;
                let index: AnalyzeIndex = read_json(&p.reports.join("index.json"))?;
                let marginals: Vec<MarginalFile> = index.marginals.iter().map(|f| read_json(&p.reports.join(f))).collect::<Result<_, _>>()?;
                let dgp = DgpModel::from_json(&std::fs::read_to_string(&p.dgp).map_err(|e| format!("{}: {e}", p.dgp.display()))?).map_err(|e| e.to_string())?;
                let mut metrics = Vec::new();
                for mode in [ProtocolMode::WoDgp, ProtocolMode::WDgp, ProtocolMode::WHExp] {
                    let path = p.metrics.join(format!("metrics_{mode}.json"));
                    if path.exists() {
                        metrics.push(read_json::<MetricsFile>(&path)?);
                    }
                }
                let sweep: SweepFile = read_json(&p.metrics.join("sweep.json"))?;
                let inputs = ReportInputs {
                    trials: &trials,
                    reports: &reports,
                    marginals: &marginals,
                    dgp: Some(&dgp),
                    metrics: &metrics,
                    sweep: Some(&sweep),
                };
                notices.extend(write_bundle(&p.report, &inputs, &prov)?);
                write_json(&p.report.join("provenance.json"), &prov)?;
            }
            other => return Err(format!("unknown stage `{other}`")),
        }
        Ok(notices)
    }

    fn reports(&self) -> Result<Vec<ReportFile>, String> {
        let dir = &self.m.paths.reports;
        let index: AnalyzeIndex = read_json(&dir.join("index.json"))?;
        index.reports.iter().map(|f| read_json(&dir.join(f))).collect()
    }
}

/// Runs every enabled stage in order; prints one status line per stage.
pub fn run_pipeline(manifest_path: &Path, opts: &GlobalOptions) -> Result<Vec<(String, StageStatus)>, CliError> {
    let mut m = Manifest::load(manifest_path)?;
    if let Some(base) = opts.seed {
        m.seeds = Seeds::from_base(base);
    }
    let workers = opts.workers.max(1);
    let mut manifest_value = serde_json::to_value(&m).map_err(CliError::invalid)?;
    if let Some(obj) = manifest_value.as_object_mut() {
        obj.remove("paths");
    }
    let mut inputs: Vec<&Path> = vec![&m.paths.space, &m.paths.planted];
    if let Some(h) = &m.paths.hexp {
        inputs.push(h);
    }
    let hash = config_hash(
        &HashedConfig {
            manifest: manifest_value,
            workers,
            seeds: &m.seeds,
        },
        &inputs,
    )
    .map_err(|e| CliError::invalid(format!("stage 0: {e}")))?;
    let run = Run {
        m: &m,
        prov: Provenance::new("pipeline", m.seeds.to_map(), hash.clone()),
        workers,
    };
    let mut statuses = Vec::new();
    for stage in STAGES {
        if !m.stages.enabled(stage) {
            println!("[{stage}] disabled");
            statuses.push((stage.to_string(), StageStatus::Disabled));
            continue;
        }
        let marker = run.marker(stage);
        if !opts.force && marker.exists() && recorded_hash(&marker).as_deref() == Some(hash.as_str()) {
            println!("[{stage}] up-to-date");
            statuses.push((stage.to_string(), StageStatus::UpToDate));
            continue;
        }
        log::info!("running stage {stage}");
        let notices = run.run_stage(stage).map_err(|e| CliError::stage(stage, e))?;
        for n in notices {
            println!("[{stage}] {n}");
        }
        println!("[{stage}] done");
        statuses.push((stage.to_string(), StageStatus::Ran));
    }
    Ok(statuses)
}
