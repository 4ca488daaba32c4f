//! Command-line front end: dataset generation, pipeline runs with
//! evaluation, and microphone-pair calibration.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 numerical or
//! degenerate failure. A `manifest.json` with the resolved configuration,
//! its hash and the seed accompanies every output directory; identical
//! manifests reproduce bit-identical outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use avfusion::error::Error;
use avfusion::evaluation::{aggregate, match_clusters, IntervalScore, DEFAULT_TAU_LOC};
use avfusion::event_sync::load_replay;
use avfusion::geometry::{calibrate, calibration_rms, ItdValue, MicPairConfig, ScenePoint};
use avfusion::io::{
    events_from_intervals, intervals_from_events, read_jsonl, write_jsonl, CalibrationPair,
    ComponentSummary, DatasetRecord, HistogramRecord, ObjectRecord, ResultRecord, RunManifest,
};
use avfusion::mixture::OutlierDomain;
use avfusion::pipeline::{
    face_guided_interval, motion_guided_interval, PipelineKnobs,
    DEFAULT_ENERGY_GATE,
};
use avfusion::simulator::{builtin_scenarios, generate, ScenarioSpec};
use avfusion::Result;

#[derive(Parser)]
#[command(
    name = "avfusion",
    version,
    about = "Audio-visual speaker detection, localization and speaking-state assessment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (observations, ground truth, event log).
    Generate(GenerateArgs),
    /// Run a pipeline over a dataset and evaluate against ground truth.
    Run(RunArgs),
    /// Fit the affine ITD calibration from (position, itd) pairs.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in scenario name (see `--list`) or path to a scenario JSON.
    #[arg(long, default_value = "stacon")]
    scenario: String,
    /// List built-in scenarios and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Microphone configuration JSON; a default desk pair when omitted.
    #[arg(long)]
    mic_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    domain_margin: f64,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset directory (from `generate`) or dataset.jsonl path.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Generate this scenario in memory instead of reading a dataset.
    #[arg(long)]
    scenario: Option<String>,
    /// `motion-guided` or `face-guided`.
    #[arg(long, default_value = "motion-guided")]
    pipeline: String,
    #[arg(long)]
    mic_config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for in-memory generation.
    #[arg(long)]
    seed: Option<u64>,
    /// Rebuild intervals from the recorded event log instead of the
    /// dataset records.
    #[arg(long)]
    replay: bool,
    #[arg(long, default_value_t = DEFAULT_TAU_LOC)]
    tau_loc: f64,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    det_threshold: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_ENERGY_GATE)]
    energy_gate: f64,
    #[arg(long, default_value_t = 0.1)]
    domain_margin: f64,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// JSONL of {"position": {x,y,z}, "itd": seconds} records.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    mic_config: Option<PathBuf>,
    /// Where to write the fitted configuration (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optional overrides loaded from `--config`; any field present replaces
/// the corresponding flag value.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<String>,
    pipeline: Option<String>,
    mic_config: Option<PathBuf>,
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    replay: Option<bool>,
    tau_loc: Option<f64>,
    n_max: Option<usize>,
    det_threshold: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    energy_gate: Option<f64>,
    domain_margin: Option<f64>,
}

fn read_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("config file {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("config file {}: {e}", p.display())))
        }
    }
}

fn load_mic_config(path: Option<&Path>) -> Result<MicPairConfig> {
    match path {
        None => Ok(MicPairConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("mic config {}: {e}", p.display())))?;
            let cfg: MicPairConfig = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("mic config {}: {e}", p.display())))?;
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn resolve_scenario(name_or_path: &str, seed: Option<u64>) -> Result<(String, ScenarioSpec)> {
    let scenarios = builtin_scenarios();
    let (name, mut spec) = if let Some(spec) = scenarios.get(name_or_path) {
        (name_or_path.to_string(), spec.clone())
    } else {
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!(
                "scenario '{name_or_path}' is neither built in nor a readable file: {e}"
            ))
        })?;
        let spec: ScenarioSpec = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("scenario {}: {e}", path.display())))?;
        (
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into()),
            spec,
        )
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok((name, spec))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    if args.list {
        for (name, spec) in builtin_scenarios() {
            println!(
                "{name:8} {:>4} intervals, {} objects",
                spec.n_intervals(),
                spec.objects.len()
            );
        }
        return Ok(());
    }
    let file_cfg = read_file_config(args.config.as_deref())?;
    let scenario_name = file_cfg.scenario.unwrap_or(args.scenario);
    let out = file_cfg.out.unwrap_or(args.out);
    let seed = file_cfg.seed.or(args.seed);
    let mic_path = file_cfg.mic_config.or(args.mic_config);
    let domain_margin = file_cfg.domain_margin.unwrap_or(args.domain_margin);

    let cfg = load_mic_config(mic_path.as_deref())?;
    let (name, spec) = resolve_scenario(&scenario_name, seed)?;
    let intervals = generate(&spec, &cfg, domain_margin)?;

    std::fs::create_dir_all(&out)?;
    let records: Vec<DatasetRecord> = intervals.iter().map(DatasetRecord::from_generated).collect();
    write_jsonl(&out.join("dataset.jsonl"), &records)?;
    avfusion::event_sync::save_replay(
        &out.join("events.log"),
        &events_from_intervals(&intervals)?,
    )?;
    std::fs::write(
        out.join("scenario.json"),
        serde_json::to_string_pretty(&spec)? + "\n",
    )?;
    std::fs::write(
        out.join("mic_config.json"),
        serde_json::to_string_pretty(&cfg)? + "\n",
    )?;
    RunManifest::new(
        "generate",
        Some(spec.seed),
        serde_json::json!({
            "scenario": name,
            "spec": spec,
            "mic_config": cfg,
            "domain_margin": domain_margin,
        }),
    )
    .write(&out.join("manifest.json"))?;

    let n = intervals.len().max(1);
    let visual: usize = intervals.iter().map(|iv| iv.observations.visual_3d.len()).sum();
    let auditory: usize = intervals.iter().map(|iv| iv.observations.auditory.len()).sum();
    println!(
        "{name}: {} intervals, {:.1} visual and {:.1} auditory observations per interval",
        intervals.len(),
        visual as f64 / n as f64,
        auditory as f64 / n as f64,
    );
    println!("wrote {}", out.display());
    Ok(())
}

enum Pipeline {
    MotionGuided,
    FaceGuided,
}

impl Pipeline {
    fn parse(name: &str) -> Result<Self> {
        match name.replace('_', "-").as_str() {
            "motion-guided" => Ok(Self::MotionGuided),
            "face-guided" => Ok(Self::FaceGuided),
            other => Err(Error::InvalidInput(format!(
                "unknown pipeline '{other}' (expected motion-guided or face-guided)"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::MotionGuided => "motion-guided",
            Self::FaceGuided => "face-guided",
        }
    }
}

fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = if path.is_dir() {
        path.join("dataset.jsonl")
    } else {
        path.to_path_buf()
    };
    if !file.exists() {
        return Err(Error::InvalidInput(format!(
            "dataset file {} does not exist",
            file.display()
        )));
    }
    read_jsonl(&file)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let file_cfg = read_file_config(args.config.as_deref())?;
    let pipeline = Pipeline::parse(&file_cfg.pipeline.unwrap_or(args.pipeline))?;
    let dataset_path = file_cfg.dataset.or(args.dataset);
    let scenario = file_cfg.scenario.or(args.scenario);
    let out = file_cfg.out.unwrap_or(args.out);
    let seed = file_cfg.seed.or(args.seed);
    let replay = file_cfg.replay.unwrap_or(args.replay);
    let tau_loc = file_cfg.tau_loc.unwrap_or(args.tau_loc);
    let knobs = PipelineKnobs {
        tol: file_cfg.tol.unwrap_or(args.tol),
        max_iter: file_cfg.max_iter.unwrap_or(args.max_iter),
        n_max: file_cfg.n_max.unwrap_or(args.n_max),
        det_threshold: file_cfg.det_threshold.unwrap_or(args.det_threshold),
        domain_margin: file_cfg.domain_margin.unwrap_or(args.domain_margin),
        energy_gate: file_cfg.energy_gate.unwrap_or(args.energy_gate),
    };
    let mic_path = file_cfg.mic_config.or(args.mic_config);

    // Dataset records carry the ground truth; observations come either from
    // the records or, with --replay, from the recorded event stream.
    let (records, replayed, cfg, run_label) = match (&dataset_path, &scenario) {
        (Some(path), _) => {
            let records = load_dataset(path)?;
            // Prefer the mic config stored next to the dataset.
            let stored = if path.is_dir() {
                let p = path.join("mic_config.json");
                p.exists().then_some(p)
            } else {
                None
            };
            let cfg = load_mic_config(mic_path.as_deref().or(stored.as_deref()))?;
            let replayed = if replay {
                let dir = if path.is_dir() {
                    path.clone()
                } else {
                    path.parent().unwrap_or(Path::new(".")).to_path_buf()
                };
                let events = load_replay(&dir.join("events.log"))?;
                Some(intervals_from_events(events)?)
            } else {
                None
            };
            (records, replayed, cfg, path.display().to_string())
        }
        (None, Some(name)) => {
            let cfg = load_mic_config(mic_path.as_deref())?;
            let (label, spec) = resolve_scenario(name, seed)?;
            let intervals = generate(&spec, &cfg, knobs.domain_margin)?;
            let records: Vec<DatasetRecord> =
                intervals.iter().map(DatasetRecord::from_generated).collect();
            (records, None, cfg, label)
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "run needs --dataset or --scenario".into(),
            ));
        }
    };

    let domain = OutlierDomain::from_mic_config(&cfg, knobs.domain_margin)?;
    std::fs::create_dir_all(&out)?;

    let mut results = Vec::with_capacity(records.len());
    let mut scores: Vec<IntervalScore> = Vec::with_capacity(records.len());
    let mut histograms = Vec::with_capacity(records.len());
    let mut prev_model = None;
    let mut total_ms = 0.0;
    let mut max_ms: f64 = 0.0;

    for (i, record) in records.iter().enumerate() {
        let observations = match &replayed {
            Some(intervals) => intervals
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Format("replay stream shorter than dataset".into()))?,
            None => record.observations(),
        };

        let started = Instant::now();
        let (objects, components) = match pipeline {
            Pipeline::MotionGuided => {
                let (objects, model) =
                    motion_guided_interval(&observations, &cfg, prev_model.as_ref(), &knobs)?;
                let components = model
                    .as_ref()
                    .map(|m| {
                        (0..m.n_components())
                            .map(|c| ComponentSummary {
                                mean: m.means[c],
                                stddev: m.stddevs[c],
                                weight: m.weights[c],
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                prev_model = model;
                (objects, components)
            }
            Pipeline::FaceGuided => {
                let faces = &observations.visual_3d;
                let objects = face_guided_interval(faces, &observations.auditory, &cfg, &knobs)?;
                let components = objects
                    .iter()
                    .map(|o| ComponentSummary {
                        mean: cfg.corrected_itd(&o.position).map(|v| v.0).unwrap_or(0.0),
                        stddev: avfusion::pipeline::FACE_INIT_VARIANCE.sqrt(),
                        weight: o.weight,
                    })
                    .collect();
                (objects, components)
            }
        };
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        total_ms += wall_ms;
        max_ms = max_ms.max(wall_ms);

        let truth = record.visible_truth();
        scores.push(match_clusters(&objects, &truth, tau_loc));
        histograms.push(HistogramRecord::from_values(
            record.interval_index,
            &observations.auditory,
            domain.lo,
            domain.hi,
            50,
            components,
        ));
        results.push(ResultRecord {
            interval_index: record.interval_index,
            n_objects: objects.len(),
            objects: objects.iter().map(ObjectRecord::from).collect(),
            wall_ms,
        });
        println!(
            "interval {:>4}: {} objects, {:>7.2} ms",
            record.interval_index,
            objects.len(),
            wall_ms
        );
    }

    let table = aggregate(&scores);
    write_jsonl(&out.join("results.jsonl"), &results)?;
    write_jsonl(&out.join("scores.jsonl"), &scores)?;
    write_jsonl(&out.join("itd_hist.jsonl"), &histograms)?;
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&table)? + "\n",
    )?;
    std::fs::write(out.join("summary.txt"), format!("{table}\n"))?;
    RunManifest::new(
        "run",
        seed,
        serde_json::json!({
            "dataset": run_label,
            "pipeline": pipeline.name(),
            "replay": replay,
            "tau_loc": tau_loc,
            "knobs": knobs,
            "mic_config": cfg,
        }),
    )
    .write(&out.join("manifest.json"))?;

    let n = results.len().max(1);
    println!("{table}");
    println!(
        "processed {} intervals, wall clock {:.2} ms/interval mean, {:.2} ms max",
        results.len(),
        total_ms / n as f64,
        max_ms
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let pairs: Vec<CalibrationPair> = read_jsonl(&args.pairs).map_err(|e| match e {
        Error::Io(io) => Error::InvalidInput(format!("pairs file {}: {io}", args.pairs.display())),
        other => other,
    })?;
    let cfg0 = load_mic_config(args.mic_config.as_deref())?;
    let data: Vec<(ScenePoint, ItdValue)> = pairs
        .iter()
        .map(|p| (p.position, ItdValue(p.itd)))
        .collect();
    let fitted = calibrate(&data, &cfg0)?;
    let rms = calibration_rms(&data, &fitted)?;
    println!(
        "fitted c1 = {:.6}, c0 = {:.3e} s over {} pairs, residual RMS {:.3e} s",
        fitted.c1,
        fitted.c0,
        data.len(),
        rms
    );
    if let Some(out) = args.out {
        std::fs::write(&out, serde_json::to_string_pretty(&fitted)? + "\n")?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Io(_) | Error::Format(_) => 2,
        Error::DegenerateFit(_) | Error::InvalidModel(_) => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Run(args) => cmd_run(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
