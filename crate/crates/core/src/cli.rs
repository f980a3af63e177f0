//! Command implementations behind the `intent-ids` binary.
//!
//! Every command writes into `--out` and leaves a `run_manifest.json` there
//! with the command line, resolved configuration, seed, input fingerprints,
//! tool version and timings.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autoencoder::{encode, AEConfig, Autoencoder, AutoencoderError};
use crate::classifier::{predict, Classifier, ClassifierError, MLPConfig};
use crate::features::{build_vocabulary, split_train_validation, vectorize, FeatureError, FeatureMatrix, Vocabulary};
use crate::manifest::{discover_manifests, load_corpus, parse_manifest_file, Corpus, Label, ManifestError};
use crate::metrics::{EvalReport, MetricsError};
use crate::nn::{ModelDocument, NnError};
use crate::pipeline::{run_pipeline, PipelineError};
use crate::stats::{class_counts, class_counts_from_features, top_k, write_ranked_csv, RankBy, StatsError};
use crate::sweep::{run_sweep, write_rows_csv, PlanFile, SweepError, SweepOptions};
use crate::synth::{generate_corpus, GeneratorSpec, SynthError};

/// Default `train` configuration.
pub const DEFAULT_TRAIN_CONFIG: &str = include_str!("../configs/conf40.toml");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Autoencoder(#[from] AutoencoderError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Manifest(_) => "manifest",
            CliError::Feature(_) => "features",
            CliError::Stats(_) => "stats",
            CliError::Pipeline(_) => "pipeline",
            CliError::Autoencoder(_) => "autoencoder",
            CliError::Classifier(_) => "classifier",
            CliError::Metrics(_) => "metrics",
            CliError::Nn(_) => "model",
            CliError::Sweep(_) => "sweep",
            CliError::Synth(_) => "synth",
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Format { .. } => "format",
        }
    }

    /// `{"error": <code>, "message": <text>}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.code(), "message": self.to_string() }).to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "intent-ids", version, about = "Intent-based Android malware detection")]
pub struct Cli {
    /// Seed for splitting, initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for parsing and sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse manifests into a feature CSV and a frozen vocabulary.
    Extract(ExtractArgs),
    /// Per-class intent counts and contrast rankings.
    Analyze(AnalyzeArgs),
    /// Train the autoencoder and classifier and evaluate.
    Train(TrainArgs),
    /// Run a configuration grid.
    Sweep(SweepArgs),
    /// Score manifests with a trained model directory.
    Predict(PredictArgs),
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifests: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Keep occurrence counts instead of presence bits.
    #[arg(long)]
    pub counts: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, conflicts_with_all = ["manifests", "labels"])]
    pub features: Option<PathBuf>,
    #[arg(long, requires = "labels")]
    pub manifests: Option<PathBuf>,
    #[arg(long, requires = "manifests")]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// TOML with `[ae]` and `[mlp]` tables; defaults to the bundled best configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Upper bound on epochs for both models.
    #[arg(long)]
    pub epoch_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Plan file; defaults to the bundled 42-configuration plan.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub epoch_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Output directory of a `train` run.
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long)]
    pub manifests: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n_mal: usize,
    #[arg(long, default_value_t = 200)]
    pub n_ben: usize,
    #[arg(long, default_value_t = 32)]
    pub vocab: usize,
    /// Keys emitted far more often by malicious apps.
    #[arg(long, default_value_t = 8)]
    pub signal: usize,
    #[arg(long, default_value_t = 1)]
    pub max_repeat: u32,
}

/// Model pair read from a `train` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainFile {
    pub ae: AEConfig,
    pub mlp: MLPConfig,
}

impl TrainFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_TRAIN_CONFIG, Path::new("conf40.toml")).expect("bundled config is valid")
    }
}

/// `vocab.json`: the frozen column order plus the encoding used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabFile {
    #[serde(flatten)]
    pub vocabulary: Vocabulary,
    pub binarized: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            config: serde_json::Value::Null,
            seed,
            inputs: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timings: BTreeMap::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = fingerprint_path(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("run_manifest.json"), self)
    }
}

/// SHA-256 of a file, or of every file under a directory keyed by relative path.
pub fn fingerprint_path(path: &Path) -> Result<String, CliError> {
    let meta = std::fs::metadata(path).map_err(io_err(path))?;
    if meta.is_file() {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        return Ok(hex::encode(Sha256::digest(&bytes)));
    }
    let mut files = Vec::new();
    collect_files(path, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for file in files {
        let rel = file.strip_prefix(path).unwrap_or(&file);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(std::fs::read(&file).map_err(io_err(&file))?);
        hasher.update([0]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>, path: &Path) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(buf)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(FeatureMatrix::read_csv(std::io::BufReader::new(file))?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            if json_errors {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    create_dir(&cli.out)?;
    let mut manifest = match &cli.command {
        Command::Extract(a) => cmd_extract(a, cli)?,
        Command::Analyze(a) => cmd_analyze(a, cli)?,
        Command::Train(a) => cmd_train(a, cli)?,
        Command::Sweep(a) => cmd_sweep(a, cli)?,
        Command::Predict(a) => cmd_predict(a, cli)?,
        Command::Synth(a) => cmd_synth(a, cli)?,
    };
    manifest
        .timings
        .insert("total_seconds".into(), started.elapsed().as_secs_f64());
    manifest.write(&cli.out)
}

fn stage_timer<'a>(manifest: &'a mut RunManifest) -> impl FnMut(&str, Instant) + 'a {
    move |name, since| {
        manifest
            .timings
            .insert(format!("{name}_seconds"), since.elapsed().as_secs_f64());
    }
}

pub fn cmd_extract(args: &ExtractArgs, cli: &Cli) -> Result<RunManifest, CliError> {
    let seed = cli.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("extract", Some(seed));
    manifest.input(&args.manifests)?;
    manifest.input(&args.labels)?;
    let binarize = !args.counts;
    manifest.config = serde_json::json!({
        "train_fraction": args.train_fraction,
        "binarize": binarize,
    });

    let t = Instant::now();
    let corpus = load_corpus(&args.manifests, &args.labels)?;
    let vocab = build_vocabulary(&corpus)?;
    let features = split_train_validation(vectorize(&corpus, &vocab, binarize), args.train_fraction, seed)?;
    log::info!(
        "{} apps, {} intents, {} unlabeled files ignored",
        corpus.len(),
        vocab.len(),
        corpus.ignored_files
    );

    let path = cli.out.join("features.csv");
    let mut buf = Vec::new();
    features.write_csv(&mut buf)?;
    write_bytes(&path, &buf)?;
    write_json(
        &cli.out.join("vocab.json"),
        &VocabFile {
            vocabulary: vocab,
            binarized: binarize,
        },
    )?;
    stage_timer(&mut manifest)("extract", t);
    Ok(manifest)
}

pub fn cmd_analyze(args: &AnalyzeArgs, cli: &Cli) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new("analyze", cli.seed);
    manifest.config = serde_json::json!({ "k": args.k });
    if args.k == 0 {
        return Err(StatsError::InvalidK.into());
    }
    let stats = match (&args.features, &args.manifests, &args.labels) {
        (Some(features), _, _) => {
            manifest.input(features)?;
            class_counts_from_features(&read_features(features)?)?
        }
        (None, Some(manifests), Some(labels)) => {
            manifest.input(manifests)?;
            manifest.input(labels)?;
            class_counts(&load_corpus(manifests, labels)?)?
        }
        _ => {
            return Err(CliError::Usage(
                "analyze needs --features or --manifests with --labels".into(),
            ))
        }
    };
    for (name, by) in [
        ("top_malicious.csv", RankBy::CountMal),
        ("top_benign.csv", RankBy::CountBen),
        ("top_difference.csv", RankBy::NormDiffMal),
    ] {
        let ranked = top_k(&stats, by, args.k)?;
        let path = cli.out.join(name);
        let bytes = csv_bytes(|b| write_ranked_csv(&ranked, b), &path)?;
        write_bytes(&path, &bytes)?;
    }
    Ok(manifest)
}

/// Everything `train` reports except timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub ae_val_loss: Option<f64>,
    pub mlp_val_loss: Option<f64>,
    pub evaluation: EvalReport,
}

fn apply_overrides(config: &mut TrainFile, seed: Option<u64>, epoch_cap: Option<usize>) {
    for train in [&mut config.ae.train, &mut config.mlp.train] {
        if let Some(seed) = seed {
            train.seed = seed;
        }
        if let Some(cap) = epoch_cap {
            train.epochs = train.epochs.min(cap.max(1));
        }
    }
}

pub fn cmd_train(args: &TrainArgs, cli: &Cli) -> Result<RunManifest, CliError> {
    let mut config = match &args.config {
        Some(path) => TrainFile::parse(&std::fs::read_to_string(path).map_err(io_err(path))?, path)?,
        None => TrainFile::bundled(),
    };
    apply_overrides(&mut config, cli.seed, args.epoch_cap);
    let mut manifest = RunManifest::new("train", Some(config.ae.train.seed));
    manifest.input(&args.features)?;
    if let Some(path) = &args.config {
        manifest.input(path)?;
    }
    manifest.config = serde_json::to_value(&config).expect("config serializes");

    let features = read_features(&args.features)?;
    if !features.is_split() {
        return Err(CliError::Format {
            path: args.features.clone(),
            message: "feature CSV has no split column values; run `extract` first".into(),
        });
    }
    let t = Instant::now();
    let outcome = run_pipeline(&features, &config.ae, &config.mlp)?;
    stage_timer(&mut manifest)("train", t);

    let out = &cli.out;
    write_bytes(
        &out.join("ae.json"),
        outcome.autoencoder.to_document().to_json().as_bytes(),
    )?;
    write_bytes(
        &out.join("mlp.json"),
        outcome.classifier.to_document().to_json().as_bytes(),
    )?;
    write_json(
        &out.join("vocab.json"),
        &VocabFile {
            vocabulary: features.vocabulary(),
            binarized: features.binarized,
        },
    )?;
    let path = out.join("scores.csv");
    write_bytes(&path, &csv_bytes(|b| outcome.scores.write_csv(b), &path)?)?;
    let path = out.join("roc.csv");
    write_bytes(&path, &csv_bytes(|b| outcome.roc.write_csv(b), &path)?)?;
    write_json(
        &out.join("report.json"),
        &TrainReport {
            ae_val_loss: outcome.ae_history.final_val_loss(),
            mlp_val_loss: outcome.mlp_history.final_val_loss(),
            evaluation: outcome.report.clone(),
        },
    )?;
    write_json(
        &out.join("history.json"),
        &serde_json::json!({ "ae": outcome.ae_history, "mlp": outcome.mlp_history }),
    )?;
    Ok(manifest)
}

pub fn cmd_sweep(args: &SweepArgs, cli: &Cli) -> Result<RunManifest, CliError> {
    let plan = match &args.plan {
        Some(path) => PlanFile::load(path)?,
        None => PlanFile::bundled(),
    };
    let seed = cli.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("sweep", Some(seed));
    manifest.input(&args.features)?;
    if let Some(path) = &args.plan {
        manifest.input(path)?;
    }
    manifest.config = serde_json::json!({ "plan": plan, "epoch_cap": args.epoch_cap });

    let features = read_features(&args.features)?;
    let options = SweepOptions {
        workers: cli.workers,
        epoch_cap: args.epoch_cap,
        artifacts_dir: Some(cli.out.clone()),
    };
    let t = Instant::now();
    let rows = run_sweep(&plan, &features, seed, &options)?;
    stage_timer(&mut manifest)("sweep", t);
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} sweep rows failed", rows.len());
    }
    let path = cli.out.join("sweep.csv");
    let mut buf = Vec::new();
    write_rows_csv(&rows, &mut buf)?;
    write_bytes(&path, &buf)?;
    Ok(manifest)
}

/// Loads `ae.json`, `mlp.json` and `vocab.json` from a `train` output directory.
pub fn load_model_dir(dir: &Path) -> Result<(Autoencoder, Classifier, VocabFile), CliError> {
    let load = |name: &str| ModelDocument::load(&dir.join(name));
    let ae = Autoencoder::from_document(&load("ae.json")?)?;
    let mlp = Classifier::from_document(&load("mlp.json")?)?;
    let mut vocab: VocabFile = read_json(&dir.join("vocab.json"))?;
    vocab.vocabulary = vocab.vocabulary.reindexed();
    Ok((ae, mlp, vocab))
}

pub fn cmd_predict(args: &PredictArgs, cli: &Cli) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new("predict", cli.seed);
    for name in ["ae.json", "mlp.json", "vocab.json"] {
        manifest.input(&args.model_dir.join(name))?;
    }
    manifest.input(&args.manifests)?;
    let (ae, mlp, vocab) = load_model_dir(&args.model_dir)?;

    let found = discover_manifests(&args.manifests)?;
    let samples = {
        use rayon::prelude::*;
        found
            .par_iter()
            .map(|(id, path)| parse_manifest_file(path, Some(id), Label::Unlabeled))
            .collect::<Result<Vec<_>, _>>()?
    };
    let corpus = Corpus::from_samples(samples);
    let features = vectorize(&corpus, &vocab.vocabulary, vocab.binarized);
    if features.dropped_unknown > 0 {
        log::info!(
            "ignored {} occurrences of intents outside the vocabulary",
            features.dropped_unknown
        );
    }
    let embeddings = encode(&ae, &features.app_ids, &features.values)?;
    let scores = predict(&mlp, &embeddings)?;
    manifest.config = serde_json::json!({ "apps": scores.len(), "dropped_unknown": features.dropped_unknown });

    let path = cli.out.join("scores.csv");
    write_bytes(&path, &csv_bytes(|b| scores.write_csv(b), &path)?)?;
    Ok(manifest)
}

pub fn cmd_synth(args: &SynthArgs, cli: &Cli) -> Result<RunManifest, CliError> {
    let seed = cli.seed.unwrap_or(0);
    let mut spec = GeneratorSpec::with_signal(args.n_mal, args.n_ben, args.vocab, args.signal, seed);
    spec.max_repeat = args.max_repeat;
    let mut manifest = RunManifest::new("synth", Some(seed));
    manifest.config = serde_json::to_value(&spec).expect("spec serializes");
    let t = Instant::now();
    generate_corpus(&spec, &cli.out)?;
    stage_timer(&mut manifest)("synth", t);
    Ok(manifest)
}
