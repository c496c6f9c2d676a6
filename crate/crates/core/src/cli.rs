//! Command-line front end.
//!
//! Every command resolves its settings as flag > config file > default,
//! writes its artifacts, and then writes a `run.json` provenance record
//! (effective config, input/output digests, toolkit version, timestamp).
//! Failures print one `error[<category>]: <message>` line to stderr and exit
//! with 1 (usage), 2 (data) or 3 (numeric).

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::det::{self, AxisScale};
use crate::embedding::{self, EmbeddingError};
use crate::manifest::{self, ManifestError, Partition};
use crate::metrics::{self, MetricsError, PaiScope};
use crate::scores::{ScoreError, ScoreSet};
use crate::synth;
use crate::train::{self, Optimizer, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numeric => 3,
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Data => "data",
            ErrorCategory::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub category: ErrorCategory,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            category: ErrorCategory::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            category: ErrorCategory::Data,
            message: message.into(),
        }
    }

    /// The single stderr line, newlines flattened.
    pub fn line(&self) -> String {
        format!(
            "error[{}]: {}",
            self.category,
            self.message.replace(['\n', '\r'], " ")
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::data(format!("manifest: {e}"))
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        CliError::data(format!("embeddings: {e}"))
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        CliError::data(format!("scores: {e}"))
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::data(format!("metrics: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let category = match &e {
            TrainError::NanLoss { .. } | TrainError::AllCellsFailed(_) => ErrorCategory::Numeric,
            TrainError::InvalidConfig(_) => ErrorCategory::Usage,
            TrainError::DegenerateData(_) | TrainError::Head(_) | TrainError::Metrics(_) => {
                ErrorCategory::Data
            }
        };
        CliError {
            category,
            message: format!("training: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(format!("io: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "padkit",
    version,
    about = "Presentation attack detection toolkit"
)]
pub struct Cli {
    /// TOML file with default values for any flag (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the provenance record. Defaults to `run.json` next to
    /// the command's primary output.
    #[arg(long, global = true)]
    pub run_record: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count samples per (label, PAI species, partition).
    Summarize(SummarizeArgs),
    /// Train one head and score a partition.
    Train(TrainArgs),
    /// Train one head per learning rate and keep the best on validation EER.
    GridSearch(GridArgs),
    /// Compute EER, BPCER10/20/100 and per-PAI APCER for a score file.
    Evaluate(EvaluateArgs),
    /// Emit the DET curve of a score file as CSV (and optionally SVG).
    Det(DetArgs),
    /// Write a synthetic two-blob manifest and embedding file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Score file for the scored partition.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerKind>,
    /// Loss weights `bona_fide,attack`.
    #[arg(long, value_delimiter = ',')]
    pub class_weights: Option<Vec<f64>>,
    /// Partition to score with the selected head.
    #[arg(long)]
    pub score_partition: Option<String>,
    /// Save the selected head as JSON.
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Save per-epoch history as JSON.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: TrainFlags,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: TrainFlags,
    #[arg(long, value_delimiter = ',')]
    pub lr_grid: Option<Vec<f64>>,
    /// Per-learning-rate results as JSON.
    #[arg(long)]
    pub grid_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// pooled, worst-case or species:<name>.
    #[arg(long)]
    pub pai_scope: Option<String>,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
pub struct DetArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pai_scope: Option<String>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Axis scale for the SVG: normal (probit) or linear.
    #[arg(long)]
    pub scale: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory receiving manifest.csv and embeddings.bin.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Samples per class in train, val and test.
    #[arg(long, value_delimiter = ',')]
    pub per_class: Option<Vec<usize>>,
    /// Per-axis distance between class means in standard deviations.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Values accepted in a `--config` file; keys mirror the long flags with
/// underscores.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub grid_report: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub lr: Option<f64>,
    pub lr_grid: Option<Vec<f64>>,
    pub hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub optimizer: Option<OptimizerKind>,
    pub class_weights: Option<Vec<f64>>,
    pub score_partition: Option<String>,
    pub pai_scope: Option<String>,
    pub format: Option<ReportFormat>,
    pub scale: Option<String>,
    pub dim: Option<usize>,
    pub per_class: Option<Vec<usize>>,
    pub separation: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Summarize,
    Train,
    GridSearch,
    Evaluate,
    Det,
    Synth,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub grid_report: Option<PathBuf>,
    pub train: TrainConfig,
    pub score_partition: Partition,
    pub pai_scope: PaiScope,
    pub format: ReportFormat,
    pub scale: String,
    pub synth_dim: usize,
    pub synth_per_class: [usize; 3],
    pub synth_separation: f64,
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("missing required --{flag}")))
}

impl RunConfig {
    /// Merges flags over the config file over built-in defaults and checks
    /// that each command has its required paths.
    pub fn resolve(command: &Command, file: &FileConfig) -> Result<Self, CliError> {
        let f = file.clone();
        let defaults = TrainConfig::default();
        let mut cfg = RunConfig {
            command: CommandKind::Summarize,
            manifest: f.manifest.clone(),
            embeddings: f.embeddings.clone(),
            scores: f.scores.clone(),
            out: f.out.clone(),
            report: f.report.clone(),
            svg: f.svg.clone(),
            head: f.head.clone(),
            history: f.history.clone(),
            grid_report: f.grid_report.clone(),
            train: defaults.clone(),
            score_partition: Partition::Test,
            pai_scope: PaiScope::Pooled,
            format: ReportFormat::Json,
            scale: "normal".into(),
            synth_dim: 16,
            synth_per_class: [200, 100, 100],
            synth_separation: 6.0,
        };
        let scope = |flag: &Option<String>| -> Result<PaiScope, CliError> {
            pick(flag.clone(), f.pai_scope.clone(), "pooled".into())
                .parse()
                .map_err(CliError::usage)
        };

        match command {
            Command::Summarize(a) => {
                cfg.command = CommandKind::Summarize;
                cfg.manifest = a.manifest.clone().or(cfg.manifest);
                cfg.out = a.out.clone().or(cfg.out);
                cfg.format = pick(a.format, f.format, ReportFormat::Text);
                require(&cfg.manifest, "manifest")?;
            }
            Command::Train(a) => {
                cfg.command = CommandKind::Train;
                cfg.apply_train_flags(&a.common, &f)?;
                cfg.train.learning_rate = pick(a.lr, f.lr, defaults.learning_rate);
                cfg.train.lr_grid = vec![cfg.train.learning_rate];
            }
            Command::GridSearch(a) => {
                cfg.command = CommandKind::GridSearch;
                cfg.apply_train_flags(&a.common, &f)?;
                cfg.train.lr_grid = pick(a.lr_grid.clone(), f.lr_grid.clone(), defaults.lr_grid);
                cfg.grid_report = a.grid_report.clone().or(cfg.grid_report);
            }
            Command::Evaluate(a) => {
                cfg.command = CommandKind::Evaluate;
                cfg.scores = a.scores.clone().or(cfg.scores);
                cfg.report = a.report.clone().or(cfg.report);
                cfg.pai_scope = scope(&a.pai_scope)?;
                cfg.format = pick(a.format, f.format, ReportFormat::Json);
                require(&cfg.scores, "scores")?;
            }
            Command::Det(a) => {
                cfg.command = CommandKind::Det;
                cfg.scores = a.scores.clone().or(cfg.scores);
                cfg.out = a.out.clone().or(cfg.out);
                cfg.svg = a.svg.clone().or(cfg.svg);
                cfg.pai_scope = scope(&a.pai_scope)?;
                cfg.scale = pick(a.scale.clone(), f.scale.clone(), "normal".into());
                cfg.scale.parse::<AxisScale>().map_err(CliError::usage)?;
                require(&cfg.scores, "scores")?;
                require(&cfg.out, "out")?;
            }
            Command::Synth(a) => {
                cfg.command = CommandKind::Synth;
                cfg.out = a.out_dir.clone().or(f.out_dir.clone());
                cfg.synth_dim = pick(a.dim, f.dim, cfg.synth_dim);
                let per_class = pick(
                    a.per_class.clone(),
                    f.per_class.clone(),
                    cfg.synth_per_class.to_vec(),
                );
                cfg.synth_per_class = per_class
                    .try_into()
                    .map_err(|_| CliError::usage("--per-class takes three counts"))?;
                cfg.synth_separation = pick(a.separation, f.separation, cfg.synth_separation);
                cfg.train.seed = pick(a.seed, f.seed, defaults.seed);
                require(&cfg.out, "out-dir")?;
                if cfg.synth_dim == 0 {
                    return Err(CliError::usage("--dim must be positive"));
                }
            }
        }
        if matches!(cfg.command, CommandKind::Train | CommandKind::GridSearch) {
            cfg.train.validate()?;
        }
        Ok(cfg)
    }

    fn apply_train_flags(&mut self, a: &TrainFlags, f: &FileConfig) -> Result<(), CliError> {
        let d = TrainConfig::default();
        self.manifest = a.manifest.clone().or(self.manifest.take());
        self.embeddings = a.embeddings.clone().or(self.embeddings.take());
        self.out = a.out.clone().or(self.out.take());
        self.head = a.head.clone().or(self.head.take());
        self.history = a.history.clone().or(self.history.take());
        self.train.hidden_width = pick(a.hidden, f.hidden, d.hidden_width);
        self.train.epochs = pick(a.epochs, f.epochs, d.epochs);
        self.train.batch_size = pick(a.batch_size, f.batch_size, d.batch_size);
        self.train.seed = pick(a.seed, f.seed, d.seed);
        self.train.optimizer = match pick(a.optimizer, f.optimizer, OptimizerKind::Adam) {
            OptimizerKind::Adam => Optimizer::default(),
            OptimizerKind::Sgd => Optimizer::Sgd,
        };
        self.train.class_weights = match a.class_weights.clone().or(f.class_weights.clone()) {
            None => None,
            Some(w) => Some(
                w.try_into()
                    .map_err(|_| CliError::usage("--class-weights takes two values"))?,
            ),
        };
        let partition = pick(
            a.score_partition.clone(),
            f.score_partition.clone(),
            "test".into(),
        );
        self.score_partition = partition.parse().map_err(CliError::usage)?;
        require(&self.manifest, "manifest")?;
        require(&self.embeddings, "embeddings")?;
        require(&self.out, "out")?;
        Ok(())
    }

    /// Directory that receives `run.json` when `--run-record` is not given.
    fn primary_output(&self) -> Option<&Path> {
        match self.command {
            CommandKind::Evaluate => self.report.as_deref(),
            CommandKind::Synth => self.out.as_deref(),
            _ => self.out.as_deref(),
        }
    }

    pub fn default_run_record(&self) -> PathBuf {
        match (self.command, self.primary_output()) {
            (CommandKind::Synth, Some(dir)) => dir.join("run.json"),
            (_, Some(out)) => out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(|p| p.join("run.json"))
                .unwrap_or_else(|| PathBuf::from("run.json")),
            (_, None) => PathBuf::from("run.json"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

fn digest(role: &str, path: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(FileDigest {
        role: role.to_string(),
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// What a successful run produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Text for stdout.
    pub stdout: String,
}

impl RunOutcome {
    fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        self.inputs.push(digest(role, path)?);
        Ok(())
    }

    fn output(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        self.outputs.push(digest(role, path)?);
        Ok(())
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Executes one resolved command.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut outcome = RunOutcome::default();
    if cfg.command != CommandKind::Synth {
        let files = [
            &cfg.out,
            &cfg.report,
            &cfg.svg,
            &cfg.head,
            &cfg.history,
            &cfg.grid_report,
        ];
        for path in files.into_iter().flatten() {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
            }
        }
    }
    match cfg.command {
        CommandKind::Summarize => run_summarize(cfg, &mut outcome)?,
        CommandKind::Train | CommandKind::GridSearch => run_train(cfg, &mut outcome)?,
        CommandKind::Evaluate => run_evaluate(cfg, &mut outcome)?,
        CommandKind::Det => run_det(cfg, &mut outcome)?,
        CommandKind::Synth => run_synth(cfg, &mut outcome)?,
    }
    Ok(outcome)
}

fn run_summarize(cfg: &RunConfig, outcome: &mut RunOutcome) -> Result<(), CliError> {
    let path = require(&cfg.manifest, "manifest")?;
    let m = manifest::parse_manifest(path)?;
    outcome.input("manifest", path)?;
    let summary = manifest::summarize(&m);
    let text = match cfg.format {
        ReportFormat::Text => summary.to_text(),
        ReportFormat::Json => String::from_utf8(to_json(&summary)).expect("utf8"),
        ReportFormat::Csv => {
            let mut s = String::from("label,pai_species,train,val,test,total\n");
            for r in &summary.rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.label,
                    r.pai_species,
                    r.train,
                    r.val,
                    r.test,
                    r.total()
                ));
            }
            s
        }
    };
    match &cfg.out {
        Some(out) => {
            write_file(out, text.as_bytes())?;
            outcome.output("summary", out)?;
        }
        None => outcome.stdout = text,
    }
    Ok(())
}

fn run_train(cfg: &RunConfig, outcome: &mut RunOutcome) -> Result<(), CliError> {
    let manifest_path = require(&cfg.manifest, "manifest")?;
    let embeddings_path = require(&cfg.embeddings, "embeddings")?;
    let out = require(&cfg.out, "out")?;
    let m = manifest::parse_manifest(manifest_path)?;
    let set = embedding::read_embeddings(embeddings_path)?;
    outcome.input("manifest", manifest_path)?;
    outcome.input("embeddings", embeddings_path)?;

    let train_data = embedding::join(&m, &set, Partition::Train)?;
    let val_data = embedding::join(&m, &set, Partition::Val)?;
    let eval_data = embedding::join(&m, &set, cfg.score_partition)?;

    let (head, history, summary) = if cfg.command == CommandKind::GridSearch {
        let grid = train::grid_search(&train_data, &val_data, &cfg.train, &cfg.train.lr_grid)?;
        let mut table = String::from("learning_rate,seed,status,val_eer,val_bpcer10,best_epoch\n");
        for row in &grid.rows {
            match &row.status {
                train::CellStatus::Ok {
                    val_eer,
                    val_bpcer10,
                    best_epoch,
                } => table.push_str(&format!(
                    "{},{},ok,{},{},{}\n",
                    row.learning_rate, row.seed, val_eer, val_bpcer10, best_epoch
                )),
                train::CellStatus::Failed { error } => table.push_str(&format!(
                    "{},{},failed: {},,,\n",
                    row.learning_rate,
                    row.seed,
                    error.replace(',', ";")
                )),
            }
        }
        table.push_str(&format!(
            "best learning_rate {}\n",
            grid.best_config.learning_rate
        ));
        if let Some(path) = &cfg.grid_report {
            #[derive(Serialize)]
            struct GridReport<'a> {
                best_learning_rate: f64,
                best_seed: u64,
                rows: &'a [train::GridRow],
            }
            write_file(
                path,
                &to_json(&GridReport {
                    best_learning_rate: grid.best_config.learning_rate,
                    best_seed: grid.best_config.seed,
                    rows: &grid.rows,
                }),
            )?;
            outcome.output("grid_report", path)?;
        }
        (grid.best.head, grid.best.history, table)
    } else {
        let result = train::train(&train_data, &val_data, &cfg.train)?;
        let rec = result.best_record();
        let summary = format!(
            "best epoch {} val_eer {} val_bpcer10 {}\n",
            result.best_epoch, rec.val_eer, rec.val_bpcer10
        );
        (result.head, result.history, summary)
    };

    let scores = train::score(&head, &eval_data)?;
    scores.write(out)?;
    outcome.output("scores", out)?;
    if let Some(path) = &cfg.head {
        write_file(path, &to_json(&head))?;
        outcome.output("head", path)?;
    }
    if let Some(path) = &cfg.history {
        write_file(path, &to_json(&history))?;
        outcome.output("history", path)?;
    }
    outcome.stdout = summary;
    Ok(())
}

fn run_evaluate(cfg: &RunConfig, outcome: &mut RunOutcome) -> Result<(), CliError> {
    let path = require(&cfg.scores, "scores")?;
    let scores = ScoreSet::read(path)?;
    outcome.input("scores", path)?;
    let report = metrics::full_report(&scores, &cfg.pai_scope)?;
    let body = match cfg.format {
        ReportFormat::Json => to_json(&report),
        ReportFormat::Csv => report.to_csv().into_bytes(),
        ReportFormat::Text => report.to_text().into_bytes(),
    };
    match &cfg.report {
        Some(out) => {
            write_file(out, &body)?;
            outcome.output("report", out)?;
            outcome.stdout = report.to_text();
        }
        None => outcome.stdout = String::from_utf8(body).expect("utf8"),
    }
    Ok(())
}

fn run_det(cfg: &RunConfig, outcome: &mut RunOutcome) -> Result<(), CliError> {
    let path = require(&cfg.scores, "scores")?;
    let out = require(&cfg.out, "out")?;
    let scores = ScoreSet::read(path)?;
    outcome.input("scores", path)?;
    let curve = metrics::det_curve(&scores, &cfg.pai_scope)?;
    write_file(out, det::det_csv(&curve).as_bytes())?;
    outcome.output("det", out)?;
    if let Some(svg) = &cfg.svg {
        let scale: AxisScale = cfg.scale.parse().map_err(CliError::usage)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        write_file(svg, det::det_svg(&[(&label, &curve)], scale).as_bytes())?;
        outcome.output("det_svg", svg)?;
    }
    Ok(())
}

fn run_synth(cfg: &RunConfig, outcome: &mut RunOutcome) -> Result<(), CliError> {
    let dir = require(&cfg.out, "out-dir")?;
    std::fs::create_dir_all(dir)?;
    let (m, set) = synth::blob_fixture(
        cfg.synth_dim,
        cfg.synth_per_class,
        cfg.synth_separation,
        cfg.train.seed,
    );
    let manifest_path = dir.join("manifest.csv");
    let embeddings_path = dir.join("embeddings.bin");
    m.write(&manifest_path)?;
    embedding::write_embeddings(&set, &embeddings_path)?;
    outcome.output("manifest", &manifest_path)?;
    outcome.output("embeddings", &embeddings_path)?;
    Ok(())
}

#[derive(Serialize)]
struct RunRecord<'a> {
    toolkit: &'static str,
    version: &'static str,
    status: &'static str,
    argv: Vec<String>,
    config_file: Option<ConfigRecord>,
    effective: &'a RunConfig,
    seed: u64,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorRecord>,
    timestamp: String,
}

#[derive(Serialize)]
struct ErrorRecord {
    category: ErrorCategory,
    message: String,
}

#[derive(Serialize)]
struct ConfigRecord {
    path: PathBuf,
    sha256: String,
    values: FileConfig,
}

fn write_run_record(
    path: &Path,
    argv: &[OsString],
    config: Option<(&Path, &FileConfig)>,
    cfg: &RunConfig,
    result: &Result<RunOutcome, CliError>,
) -> Result<(), CliError> {
    let empty = RunOutcome::default();
    let outcome = result.as_ref().unwrap_or(&empty);
    let config_file = match config {
        Some((p, values)) => Some(ConfigRecord {
            path: p.to_path_buf(),
            sha256: digest("config", p)?.sha256,
            values: values.clone(),
        }),
        None => None,
    };
    let record = RunRecord {
        toolkit: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status: if result.is_ok() { "ok" } else { "error" },
        argv: argv
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        config_file,
        effective: cfg,
        seed: cfg.train.seed,
        inputs: &outcome.inputs,
        outputs: &outcome.outputs,
        error: result.as_ref().err().map(|e| ErrorRecord {
            category: e.category,
            message: e.message.clone(),
        }),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_file(path, &to_json(&record))
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Diagnostics go to stderr, command output to stdout.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).line());
            return ErrorCategory::Usage.exit_code();
        }
    };
    match execute(&cli, &argv) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.category.exit_code()
        }
    }
}

/// Runs a parsed command line, writes its `run.json` and returns what the
/// command would print on stdout.
pub fn execute(cli: &Cli, argv: &[OsString]) -> Result<String, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(&cli.command, &file)?;
    let result = run(&cfg);
    let record_path = cli
        .run_record
        .clone()
        .unwrap_or_else(|| cfg.default_run_record());
    let config = cli.config.as_deref().map(|p| (p, &file));
    let recorded = write_run_record(&record_path, argv, config, &cfg, &result);
    let outcome = result?;
    recorded?;
    Ok(outcome.stdout)
}
