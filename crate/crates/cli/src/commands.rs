use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pogona_core::eval::{evaluate, EvalImage, EvalSettings, GroundTruth, Prediction};
use pogona_core::ingest::{parse_config, parse_detection_log, parse_label_file, Label};
use pogona_core::report::{
    events_txt, frames_jsonl, parse_report_json, range_table, report_json, summary,
};
use pogona_core::synthgen::{generate, Scenario};
use pogona_core::{analyze, BehaviourKind, FrameGeometry, RunConfig};

use crate::output::OutputSet;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Mismatch(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "pogona",
    version,
    about = "Behaviour analytics for reptile enclosure detection logs"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a detection log into episodes and activity metrics.
    Analyze(AnalyzeArgs),
    /// Score per-frame prediction files against ground-truth labels.
    Evaluate(EvaluateArgs),
    /// Write a synthetic detection log and its expected outcome.
    Simulate(SimulateArgs),
    /// Print the activity table of a saved report.json.
    Report(ReportArgs),
}

/// Threshold overrides; these win over the config file.
#[derive(Debug, Args, Default)]
struct Thresholds {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "theta-max")]
    theta_max: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "max-gap")]
    max_gap: Option<u64>,
    #[arg(long = "disappearance-window")]
    disappearance_window: Option<u64>,
    #[arg(long = "min-episode")]
    min_episode: Option<u64>,
    #[arg(long = "cricket-gate")]
    cricket_gate: Option<f64>,
}

impl Thresholds {
    fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.theta_max {
            cfg.theta_max = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.max_gap {
            cfg.max_gap = v;
        }
        if let Some(v) = self.disappearance_window {
            cfg.disappearance_window = v;
        }
        if let Some(v) = self.min_episode {
            cfg.min_episode = v;
        }
        if let Some(v) = self.cricket_gate {
            cfg.cricket_gate = v;
        }
        cfg.validate().map_err(|(key, reason)| {
            CliError::Usage(format!("invalid --{}: {reason}", key.replace('_', "-")))
        })?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory of `<stem>_<frame>.txt` files with `class cx cy w h conf` lines.
    #[arg(long)]
    preds: PathBuf,
    /// Directory of `<stem>_<frame>.txt` files with `class cx cy w h` lines.
    #[arg(long)]
    gts: PathBuf,
    /// Directory for eval.json and eval.txt; the table is printed either way.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, default_value_t = 0.0)]
    conf: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Idle,
    Basking,
    Hunting,
}

impl From<Kind> for BehaviourKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Idle => BehaviourKind::Idle,
            Kind::Basking => BehaviourKind::Basking,
            Kind::Hunting => BehaviourKind::Hunting,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 200)]
    frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long = "vanish-frame")]
    vanish_frame: Option<u64>,
    #[arg(long = "vanish-distance", default_value_t = 0.05)]
    vanish_distance: f64,
    /// Log path; the sidecar goes next to it as `<stem>.expected.json`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// One or more report.json files written by `analyze`. With several,
    /// a table of per-behaviour ranges across the clips follows.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let file = fs::File::open(&args.log).map_err(|e| io_err(&args.log, e))?;
    let timeline = parse_detection_log(BufReader::new(file)).map_err(|e| match e.kind {
        pogona_core::ingest::ParseErrorKind::Io(io) => io_err(&args.log, io),
        _ => CliError::Parse(format!("{}:{}: {}", args.log.display(), e.line, e.kind)),
    })?;
    let base = match &args.config {
        Some(path) => parse_config(&read_to_string(path)?, timeline.geometry)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?,
        None => RunConfig::with_geometry(timeline.geometry),
    };
    let cfg = args.thresholds.apply(base)?;
    let output = analyze(&timeline, &cfg);

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let meta = serde_json::json!({
        "tool": "pogona",
        "version": env!("CARGO_PKG_VERSION"),
        "log": args.log.display().to_string(),
        "run_unix_time": started,
    });

    let out = &args.out;
    let mut files = OutputSet::default();
    let stage = |files: &mut OutputSet, name: &str, data: String| {
        let dest = out.join(name);
        files
            .stage(&dest, data.as_bytes())
            .map_err(|e| io_err(&dest, e))
    };
    stage(&mut files, "events.txt", events_txt(&output.episodes))?;
    stage(&mut files, "report.json", report_json(&output))?;
    stage(&mut files, "frames.jsonl", frames_jsonl(&output))?;
    stage(&mut files, "meta.json", format!("{meta:#}\n"))?;
    files.commit().map_err(|e| io_err(out, e))
}

fn text_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            let name = entry.file_name().to_string_lossy().into_owned();
            files.insert(name, path);
        }
    }
    Ok(files)
}

fn read_labels(path: &Path, with_confidence: bool) -> Result<Vec<Label>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    parse_label_file(BufReader::new(file), with_confidence)
        .map_err(|e| CliError::Parse(format!("{}:{}: {}", path.display(), e.line, e.kind)))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    if !(args.iou > 0.0 && args.iou < 1.0) {
        return Err(CliError::Usage(format!("--iou {} not in (0, 1)", args.iou)));
    }
    if !(0.0..=1.0).contains(&args.conf) {
        return Err(CliError::Usage(format!(
            "--conf {} not in [0, 1]",
            args.conf
        )));
    }
    let gts = text_files(&args.gts)?;
    let preds = text_files(&args.preds)?;
    if let Some(orphan) = preds.keys().find(|k| !gts.contains_key(*k)) {
        return Err(CliError::Mismatch(format!(
            "prediction file {orphan} has no ground-truth counterpart in {}",
            args.gts.display()
        )));
    }

    let mut images = Vec::with_capacity(gts.len());
    for (name, gt_path) in &gts {
        let ground_truth = read_labels(gt_path, false)?
            .into_iter()
            .map(|l| GroundTruth {
                class: l.class,
                bbox: l.bbox,
            })
            .collect();
        let predictions = match preds.get(name) {
            Some(p) => read_labels(p, true)?
                .into_iter()
                .map(|l| Prediction {
                    class: l.class,
                    bbox: l.bbox,
                    confidence: l.confidence,
                })
                .collect(),
            None => Vec::new(),
        };
        images.push(EvalImage {
            id: name.clone(),
            predictions,
            ground_truth,
        });
    }

    let report = evaluate(
        &images,
        EvalSettings {
            iou_threshold: args.iou,
            confidence_threshold: args.conf,
        },
    );
    let table = report.to_table();
    print!("{table}");
    if let Some(out) = &args.out {
        let mut files = OutputSet::default();
        let mut json = serde_json::to_string_pretty(&report).expect("report is serializable");
        json.push('\n');
        for (name, data) in [("eval.json", json), ("eval.txt", table)] {
            let dest = out.join(name);
            files
                .stage(&dest, data.as_bytes())
                .map_err(|e| io_err(&dest, e))?;
        }
        files.commit().map_err(|e| io_err(out, e))?;
    }
    Ok(())
}

fn sidecar_path(log: &Path) -> PathBuf {
    let stem = log
        .file_stem()
        .map_or_else(|| "clip".into(), |s| s.to_string_lossy().into_owned());
    log.with_file_name(format!("{stem}.expected.json"))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let geometry = FrameGeometry::new(args.width, args.height, args.fps)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let scenario = Scenario {
        kind: args.kind.into(),
        frames: args.frames,
        geometry,
        dropout_rate: args.dropout,
        position_noise: args.noise,
        seed: args.seed,
        vanish_frame: args.vanish_frame,
        vanish_distance: args.vanish_distance,
    };
    let cfg = args.thresholds.apply(RunConfig::with_geometry(geometry))?;
    let generated = generate(&scenario, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut expected = serde_json::to_string_pretty(&generated.expected)
        .expect("expected outcome is serializable");
    expected.push('\n');

    let mut files = OutputSet::default();
    let sidecar = sidecar_path(&args.out);
    files
        .stage(&args.out, generated.log.as_bytes())
        .map_err(|e| io_err(&args.out, e))?;
    files
        .stage(&sidecar, expected.as_bytes())
        .map_err(|e| io_err(&sidecar, e))?;
    files.commit().map_err(|e| io_err(&args.out, e))
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut clips = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let output = parse_report_json(&read_to_string(path)?)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        clips.push(output);
    }
    for (path, clip) in args.reports.iter().zip(&clips) {
        if clips.len() > 1 {
            println!("== {}", path.display());
        }
        print!("{}", summary(clip));
        if clips.len() > 1 {
            println!();
        }
    }
    if clips.len() > 1 {
        println!("ranges across {} clips", clips.len());
        print!("{}", range_table(&clips));
    }
    Ok(())
}
