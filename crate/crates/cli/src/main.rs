use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynbias::dgp::{agreement, load_hexp, DgpModel};
use dynbias::explorer::Strategy;
use dynbias::fanova::{ForestParams, Response};
use dynbias::learner::{ModelConfig, ProtocolMode, ProtocolOptions};
use dynbias::sensors::GenerateOptions;
use dynbias_cli::artifacts::{read_json, write_json, write_text, MarginalFile, MetricsFile, ReportFile, SweepFile};
use dynbias_cli::pipeline::{run_pipeline, GlobalOptions};
use dynbias_cli::provenance::{config_hash, Provenance};
use dynbias_cli::report::{write_bundle, ReportInputs};
use dynbias_cli::stages::{self, ExploreArgs, PartitionArgs};
use dynbias_cli::{svg, CliError};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "dynbias", version, about = "Architecture-space exploration and data-source selection for activity recognition")]
struct Cli {
    /// Base seed for the command (pipeline: replaces all stage seeds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rerun stages whose outputs already exist.
    #[arg(long, global = true)]
    force: bool,
    /// Parallel evaluations per explorer batch.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Pipeline manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset with planted informative sources.
    Generate(GenerateCmd),
    /// Segment a dataset and assign frames to folds by meta-segments.
    Partition(PartitionCmd),
    /// Explore a search space with the learner as evaluator.
    Explore(ExploreCmd),
    /// Fit a forest to a trial log and decompose its variance.
    Analyze(AnalyzeCmd),
    /// Derive per-activity source subsets, or compare two models.
    Dgp(DgpCmd),
    /// Cross-validated training in one of the protocol settings.
    Train(TrainCmd),
    /// Render the report bundle from existing artifacts.
    Report(ReportCmd),
    /// Run every stage listed in the manifest.
    Pipeline,
}

#[derive(Args, Serialize)]
struct GenerateCmd {
    #[arg(long)]
    planted: PathBuf,
    /// Frames per activity.
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, default_value_t = 600)]
    window: usize,
    /// Consecutive frames per activity bout.
    #[arg(long, default_value_t = 5)]
    bout: usize,
    #[arg(long, default_value_t = 1)]
    recordings: usize,
    #[arg(long, default_value_t = 0)]
    null_frames: usize,
    #[arg(long, default_value_t = 0.0)]
    ar_coeff: f64,
    #[arg(long, default_value_t = 0.0)]
    ar_sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PartitionCmd {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    meta_len: usize,
    /// Window length in samples (default: the generated window).
    #[arg(long)]
    window: Option<usize>,
    /// Stride in samples (default: the window).
    #[arg(long, conflicts_with = "stride_fraction")]
    stride: Option<usize>,
    /// Stride as a fraction of the window.
    #[arg(long)]
    stride_fraction: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    max_gap: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ExploreCmd {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "random")]
    strategy: String,
    /// Strategy setting overrides, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "folds.json")]
    folds: PathBuf,
    /// Base model configuration (JSON); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    holdout: usize,
    #[arg(long)]
    include_null: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AnalyzeCmd {
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    space: PathBuf,
    /// `nu`, `f1` or `per_activity_nu[i]`.
    #[arg(long, default_value = "nu")]
    response: String,
    /// Activity label recorded in the report.
    #[arg(long)]
    activity: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Two parameters, `u,v`, for a marginal heat map.
    #[arg(long)]
    pairwise: Option<String>,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    #[arg(long, requires = "pairwise")]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    trees: usize,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct DgpCmd {
    #[command(subcommand)]
    sub: Option<DgpSub>,
    #[command(flatten)]
    derive: DgpDerive,
}

#[derive(Args, Serialize)]
struct DgpDerive {
    /// Per-activity importance reports.
    #[arg(long = "report", num_args = 1..)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    tau_imp: f64,
    #[arg(long, default_value_t = 0.2)]
    tau_int: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DgpSub {
    /// Per-activity Jaccard agreement of two models.
    Agree {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Args, Serialize)]
struct TrainCmd {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "folds.json")]
    folds: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// `wo-DGP`, `w-DGP` or `w-HExp`.
    #[arg(long, default_value = "wo-DGP")]
    mode: String,
    /// Model supplying the subsets for masked modes.
    #[arg(long)]
    dgp: Option<PathBuf>,
    #[arg(long)]
    include_null: bool,
    /// Keep the original frames next to the masked copies.
    #[arg(long)]
    augment_supplement: bool,
    #[arg(long, default_value_t = 4)]
    mask_pool: usize,
    /// Fixed mask noise level (default: per-channel training std).
    #[arg(long)]
    mask_sigma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportCmd {
    #[arg(long)]
    trials: PathBuf,
    /// Importance report files.
    #[arg(long = "reports", num_args = 1..)]
    reports: Vec<PathBuf>,
    /// Marginal table files written by the pipeline.
    #[arg(long = "marginals", num_args = 1..)]
    marginals: Vec<PathBuf>,
    #[arg(long)]
    dgp: Option<PathBuf>,
    #[arg(long = "metrics", num_args = 1..)]
    metrics: Vec<PathBuf>,
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn hash_of<T: Serialize>(args: &T, inputs: &[&Path]) -> Result<String, CliError> {
    config_hash(args, inputs).map_err(CliError::invalid)
}

fn stage_err(stage: &str) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::stage(stage, e)
}

fn load_model_config(path: Option<&Path>) -> Result<ModelConfig, CliError> {
    let cfg = match path {
        Some(p) => read_json::<ModelConfig>(p).map_err(CliError::invalid)?,
        None => ModelConfig::default(),
    };
    cfg.validate().map_err(CliError::invalid)?;
    Ok(cfg)
}

fn load_dgp(path: &Path) -> Result<DgpModel, CliError> {
    load_hexp(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Pipeline => {
            let manifest = cli.manifest.ok_or_else(|| CliError::invalid("pipeline needs --manifest"))?;
            let opts = GlobalOptions {
                force: cli.force,
                workers: cli.workers,
                seed: cli.seed,
            };
            run_pipeline(&manifest, &opts)?;
        }
        Command::Generate(c) => {
            let opts = GenerateOptions {
                frames_per_activity: c.frames,
                window_len: c.window,
                bout_frames: c.bout,
                n_recordings: c.recordings,
                null_frames: c.null_frames,
                ar_coeff: c.ar_coeff,
                ar_sigma: c.ar_sigma,
                seed,
                ..GenerateOptions::default()
            };
            let prov = Provenance::single("generate", seed, hash_of(&c, &[&c.planted])?);
            let meta = stages::run_generate(&c.planted, &opts, &c.out, &prov).map_err(stage_err("generate"))?;
            println!("wrote {} sources, {} activities to {}", meta.sources.len(), meta.activities.len(), c.out.display());
        }
        Command::Partition(c) => {
            let window = c.window.or_else(|| stages::generated_window(&c.data));
            let stride = match (c.stride, c.stride_fraction, window) {
                (Some(s), _, _) => Some(s),
                (None, Some(f), Some(w)) => Some(dynbias::sensors::stride_from_fraction(f, w)),
                (None, Some(_), None) => return Err(CliError::invalid("--stride-fraction needs a known window")),
                _ => None,
            };
            let args = PartitionArgs {
                window,
                stride,
                max_gap_fraction: c.max_gap,
                k: c.k,
                meta_len: c.meta_len,
                seed,
            };
            let prov = Provenance::single("partition", seed, hash_of(&c, &[&c.data.join("meta.json")]).map_err(|_| CliError::stage("partition", format!("missing dataset: {}", c.data.display())))?);
            let folds = stages::run_partition(&c.data, &args, &prov).map_err(stage_err("partition"))?;
            write_json(&c.out, &folds).map_err(stage_err("partition"))?;
            println!("fold sizes {:?}", folds.assignment.fold_sizes());
        }
        Command::Explore(c) => {
            let mut strategy = Strategy::from_kind(&c.strategy).map_err(CliError::invalid)?;
            for kv in &c.sets {
                let (k, v) = kv.split_once('=').ok_or_else(|| CliError::invalid(format!("--set expects key=value, got `{kv}`")))?;
                strategy.set(k, v).map_err(CliError::invalid)?;
            }
            strategy.validate().map_err(CliError::invalid)?;
            let space = stages::load_space(&c.space).map_err(CliError::invalid)?;
            let model = load_model_config(c.config.as_deref())?;
            let mut inputs: Vec<&Path> = vec![&c.space, &c.folds];
            if let Some(p) = &c.config {
                inputs.push(p);
            }
            let hash = hash_of(&(&c, cli.workers), &inputs).map_err(|_| CliError::invalid(format!("missing folds file {}", c.folds.display())))?;
            let prov = Provenance::single("explore", seed, hash);
            let args = ExploreArgs {
                strategy: &strategy,
                budget: c.budget,
                seed,
                workers: cli.workers,
                model: &model,
                holdout: c.holdout,
                include_null: c.include_null,
            };
            let trials = stages::run_explore(&space, &c.data, &c.folds, &args, &c.out, &prov).map_err(stage_err("explore"))?;
            if let Some(best) = dynbias::explorer::incumbent(&trials) {
                println!("{} trials; best nu {:.4} (trial {})", trials.len(), best.nu, best.trial_id);
            }
        }
        Command::Analyze(c) => {
            let response: Response = c.response.parse().map_err(CliError::invalid)?;
            let space = stages::load_space(&c.space).map_err(CliError::invalid)?;
            let trials = stages::load_trials(&c.trials).map_err(CliError::invalid)?;
            let prov = Provenance::single("analyze", seed, hash_of(&c, &[&c.trials, &c.space])?);
            let params = ForestParams {
                n_trees: c.trees,
                ..ForestParams::default()
            };
            let (forest, report) = stages::analyze_response(&trials, &space, response, &params, seed).map_err(stage_err("analyze"))?;
            let file = ReportFile {
                activity: c.activity.clone(),
                report,
                provenance: Some(prov.clone()),
            };
            match &c.out {
                Some(out) => write_json(out, &file).map_err(stage_err("analyze"))?,
                None => println!("{}", serde_json::to_string_pretty(&file).expect("report serializes")),
            }
            if let Some(csv) = &c.csv {
                write_text(csv, &(prov.csv_comment() + &file.report.to_csv())).map_err(stage_err("analyze"))?;
            }
            if let Some(pair) = &c.pairwise {
                let (u, v) = pair.split_once(',').ok_or_else(|| CliError::invalid("--pairwise expects `u,v`"))?;
                let grids = stages::marginal_grids(&forest, &[(u.trim().to_string(), v.trim().to_string())], c.resolution).map_err(CliError::invalid)?;
                let grid = &grids[0];
                match &c.svg {
                    Some(path) => {
                        let title = format!("marginal of {} and {}", grid.u, grid.v);
                        write_text(path, &svg::heatmap(grid, &title, Some(&prov))).map_err(stage_err("analyze"))?;
                    }
                    None => print!("{}", grid.to_csv()),
                }
            }
        }
        Command::Dgp(c) => match c.sub {
            Some(DgpSub::Agree { a, b }) => {
                let (ma, mb) = (load_dgp(&a)?, load_dgp(&b)?);
                let ag = agreement(&ma, &mb).map_err(CliError::invalid)?;
                for (y, j) in &ag.per_activity {
                    println!("{y}\t{j:.4}");
                }
                println!("mean\t{:.4}", ag.mean);
            }
            None => {
                let d = c.derive;
                let space_path = d.space.clone().ok_or_else(|| CliError::invalid("dgp needs --space"))?;
                let out = d.out.clone().ok_or_else(|| CliError::invalid("dgp needs --out"))?;
                if d.reports.is_empty() {
                    return Err(CliError::invalid("dgp needs at least one --report"));
                }
                let space = stages::load_space(&space_path).map_err(CliError::invalid)?;
                let reports: Vec<ReportFile> = d.reports.iter().map(|p| read_json(p)).collect::<Result<_, _>>().map_err(CliError::invalid)?;
                let mut inputs: Vec<&Path> = d.reports.iter().map(PathBuf::as_path).collect();
                inputs.push(&space_path);
                let prov = Provenance::single("dgp", seed, hash_of(&d, &inputs)?);
                let mut model = stages::dgp_from_reports(&reports, &space, d.tau_imp, d.tau_int).map_err(CliError::invalid)?;
                model.provenance = Some(prov.to_value());
                model.save(&out).map_err(|e| CliError::stage("dgp", e))?;
                for (y, a) in &model.per_activity {
                    let s: Vec<&str> = a.subset.iter().map(String::as_str).collect();
                    println!("{y}\t{}", s.join(","));
                }
            }
        },
        Command::Train(c) => {
            let mode: ProtocolMode = c.mode.parse().map_err(CliError::invalid)?;
            let config = load_model_config(c.config.as_deref())?;
            let dgp = match (&c.dgp, mode) {
                (Some(p), _) => Some(load_dgp(p)?),
                (None, ProtocolMode::WoDgp) => None,
                (None, _) => return Err(CliError::invalid(format!("mode {mode} needs --dgp"))),
            };
            let mut inputs: Vec<&Path> = vec![&c.folds];
            if let Some(p) = &c.dgp {
                inputs.push(p);
            }
            if let Some(p) = &c.config {
                inputs.push(p);
            }
            let hash = hash_of(&c, &inputs).map_err(|_| CliError::invalid(format!("missing folds file {}", c.folds.display())))?;
            let prov = Provenance::single("train", seed, hash);
            let cohort = stages::load_cohort(&c.data, &c.folds).map_err(stage_err("train"))?;
            let subsets = if mode == ProtocolMode::WoDgp { None } else { stages::mode_subsets(&cohort, dgp.as_ref()).map_err(CliError::invalid)? };
            let options = ProtocolOptions {
                include_null: c.include_null,
                mask_pool: c.mask_pool,
                supplement: c.augment_supplement,
                mask_sigma: c.mask_sigma,
            };
            let summary = stages::run_train(&cohort, &config, mode, subsets.as_ref(), &options, seed).map_err(stage_err("train"))?;
            let file = MetricsFile {
                summary,
                provenance: Some(prov),
            };
            write_json(&c.out, &file).map_err(stage_err("train"))?;
            let csv_path = c.out.with_extension("confusion.csv");
            write_text(&csv_path, &file.pooled_confusion_csv()).map_err(stage_err("train"))?;
            println!("{mode}: mean f1 {:.4} (std {:.4})", file.summary.mean_f1, file.summary.std_f1);
        }
        Command::Report(c) => {
            let trials = stages::load_trials(&c.trials).map_err(CliError::invalid)?;
            let reports: Vec<ReportFile> = c.reports.iter().map(|p| read_json(p)).collect::<Result<_, _>>().map_err(CliError::invalid)?;
            let marginals: Vec<MarginalFile> = c.marginals.iter().map(|p| read_json(p)).collect::<Result<_, _>>().map_err(CliError::invalid)?;
            let metrics: Vec<MetricsFile> = c.metrics.iter().map(|p| read_json(p)).collect::<Result<_, _>>().map_err(CliError::invalid)?;
            let dgp = c.dgp.as_deref().map(load_dgp).transpose()?;
            let sweep: Option<SweepFile> = c.sweep.as_deref().map(read_json).transpose().map_err(CliError::invalid)?;
            let mut inputs: Vec<&Path> = vec![&c.trials];
            inputs.extend(c.reports.iter().map(PathBuf::as_path));
            inputs.extend(c.marginals.iter().map(PathBuf::as_path));
            inputs.extend(c.metrics.iter().map(PathBuf::as_path));
            inputs.extend(c.dgp.iter().map(PathBuf::as_path));
            inputs.extend(c.sweep.iter().map(PathBuf::as_path));
            let prov = Provenance::single("report", seed, hash_of(&c.out, &inputs)?);
            let bundle = ReportInputs {
                trials: &trials,
                reports: &reports,
                marginals: &marginals,
                dgp: dgp.as_ref(),
                metrics: &metrics,
                sweep: sweep.as_ref(),
            };
            for n in write_bundle(&c.out, &bundle, &prov).map_err(stage_err("report"))? {
                println!("[report] {n}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
