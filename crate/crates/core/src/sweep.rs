//! Configuration grids run end to end, one row per configuration.
//!
//! A plan file is a list of stages. Each stage pairs an autoencoder grid
//! with a classifier grid and numbers its rows from `conf_id_start`; across
//! the whole file the ids must run 1, 2, 3, ... without gaps.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::{build_sae, encode_features, train_ae, AEConfig, Autoencoder, EmbeddingMatrix};
use crate::classifier::{build_mlp, predict, train_mlp, MLPConfig};
use crate::features::{FeatureMatrix, Split};
use crate::metrics::{evaluate, EvalReport, RocCurve, ThresholdPolicy};
use crate::nn::OptimizerKind;

/// The bundled 42-configuration plan.
pub const BUNDLED_PLAN: &str = include_str!("../configs/sweep_grid.toml");

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),
    #[error("sweep plan: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("features have no train/validation split")]
    NotSplit,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sweep CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// One classifier config, every autoencoder config.
    FixedMlpVaryAe,
    /// One autoencoder config, every classifier config.
    FixedAeVaryMlp,
    /// `ae[i]` with `mlp[i]`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    #[serde(default)]
    pub name: String,
    pub pairing: Pairing,
    pub conf_id_start: u32,
    #[serde(rename = "ae")]
    pub ae_grid: Vec<AEConfig>,
    #[serde(rename = "mlp")]
    pub mlp_grid: Vec<MLPConfig>,
}

/// One configuration to run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub conf_id: u32,
    pub stage: String,
    pub ae: AEConfig,
    pub mlp: MLPConfig,
}

impl SweepPlan {
    pub fn len(&self) -> usize {
        match self.pairing {
            Pairing::FixedMlpVaryAe => self.ae_grid.len(),
            Pairing::FixedAeVaryMlp => self.mlp_grid.len(),
            Pairing::Explicit => self.ae_grid.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::InvalidPlan(format!("stage `{}`: {msg}", self.name)));
        if self.ae_grid.is_empty() || self.mlp_grid.is_empty() {
            return bad("grids must be non-empty".into());
        }
        match self.pairing {
            Pairing::FixedMlpVaryAe if self.mlp_grid.len() != 1 => bad(format!(
                "fixed_mlp_vary_ae takes one mlp config, got {}",
                self.mlp_grid.len()
            )),
            Pairing::FixedAeVaryMlp if self.ae_grid.len() != 1 => bad(format!(
                "fixed_ae_vary_mlp takes one ae config, got {}",
                self.ae_grid.len()
            )),
            Pairing::Explicit if self.ae_grid.len() != self.mlp_grid.len() => bad(format!(
                "explicit pairing needs equal grids, got {} ae and {} mlp",
                self.ae_grid.len(),
                self.mlp_grid.len()
            )),
            _ => Ok(()),
        }
    }

    pub fn jobs(&self) -> Result<Vec<SweepJob>, SweepError> {
        self.validate()?;
        let jobs = (0..self.len())
            .map(|i| {
                let (ae, mlp) = match self.pairing {
                    Pairing::FixedMlpVaryAe => (&self.ae_grid[i], &self.mlp_grid[0]),
                    Pairing::FixedAeVaryMlp => (&self.ae_grid[0], &self.mlp_grid[i]),
                    Pairing::Explicit => (&self.ae_grid[i], &self.mlp_grid[i]),
                };
                SweepJob {
                    conf_id: self.conf_id_start + i as u32,
                    stage: self.name.clone(),
                    ae: ae.clone(),
                    mlp: mlp.clone(),
                }
            })
            .collect();
        Ok(jobs)
    }
}

/// A plan file: stages run in order of their conf ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(default)]
    pub description: String,
    #[serde(rename = "stage")]
    pub stages: Vec<SweepPlan>,
}

impl PlanFile {
    pub fn parse(text: &str) -> Result<Self, SweepError> {
        let plan: PlanFile = toml::from_str(text)?;
        plan.jobs()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_PLAN).expect("bundled plan is valid")
    }

    pub fn single(ae: AEConfig, mlp: MLPConfig) -> Self {
        PlanFile {
            description: String::new(),
            stages: vec![SweepPlan {
                name: "single".into(),
                pairing: Pairing::Explicit,
                conf_id_start: 1,
                ae_grid: vec![ae],
                mlp_grid: vec![mlp],
            }],
        }
    }

    /// All jobs, checked to carry ids `1..=n` in order.
    pub fn jobs(&self) -> Result<Vec<SweepJob>, SweepError> {
        if self.stages.is_empty() {
            return Err(SweepError::InvalidPlan("plan has no stages".into()));
        }
        let mut jobs = Vec::new();
        for stage in &self.stages {
            jobs.extend(stage.jobs()?);
        }
        for (i, job) in jobs.iter().enumerate() {
            let expected = i as u32 + 1;
            if job.conf_id != expected {
                return Err(SweepError::InvalidPlan(format!(
                    "conf ids must be unique and sequential from 1: expected {expected}, stage `{}` gives {}",
                    job.stage, job.conf_id
                )));
            }
        }
        Ok(jobs)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Threads in the pool; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Upper bound on epochs for both models, for quick runs.
    pub epoch_cap: Option<usize>,
    /// When set, each row's models and curves go to `<dir>/runs/<conf_id>/`.
    pub artifacts_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub conf_id: u32,
    pub stage: String,
    pub ae_hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub ae_epochs: usize,
    pub ae_val_loss: Option<f64>,
    pub mlp_hidden: Vec<usize>,
    pub mlp_epochs: usize,
    pub mlp_optimizer: OptimizerKind,
    pub mlp_batch_size: usize,
    pub mlp_auc: Option<f64>,
    pub accuracy_05: Option<f64>,
    pub fpr_05: Option<f64>,
    pub best_accuracy: Option<f64>,
    pub fpr_at_best_accuracy: Option<f64>,
    pub best_accuracy_threshold: Option<f64>,
    pub accuracy_at_best_f1: Option<f64>,
    pub fpr_at_best_f1: Option<f64>,
    pub best_f1_threshold: Option<f64>,
    pub wall_time: f64,
    pub error: Option<String>,
}

pub const CSV_COLUMNS: [&str; 21] = [
    "Conf. ID",
    "Stage",
    "Hidden Layer Size",
    "Embedding Dimension",
    "AE Epochs",
    "AE Val. Loss",
    "MLP Hidden Layer Size",
    "MLP Epochs",
    "MLP Optimizer",
    "MLP Batch Size",
    "MLP AUC",
    "Accuracy (Th=0.5)",
    "FPR (Th=0.5)",
    "Best Accuracy",
    "FPR @ Best Accuracy",
    "Best Accuracy Threshold",
    "Accuracy @ Best F1",
    "FPR @ Best F1",
    "Best F1 Threshold",
    "wall_time",
    "error",
];

fn layers(sizes: &[usize]) -> String {
    let inner: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SweepRow {
    fn skeleton(job: &SweepJob) -> Self {
        SweepRow {
            conf_id: job.conf_id,
            stage: job.stage.clone(),
            ae_hidden: job.ae.hidden_layers.clone(),
            embedding_dim: job.ae.embedding_dim,
            ae_epochs: job.ae.train.epochs,
            ae_val_loss: None,
            mlp_hidden: job.mlp.hidden_layers.clone(),
            mlp_epochs: job.mlp.train.epochs,
            mlp_optimizer: job.mlp.optimizer.kind,
            mlp_batch_size: job.mlp.train.batch_size,
            mlp_auc: None,
            accuracy_05: None,
            fpr_05: None,
            best_accuracy: None,
            fpr_at_best_accuracy: None,
            best_accuracy_threshold: None,
            accuracy_at_best_f1: None,
            fpr_at_best_f1: None,
            best_f1_threshold: None,
            wall_time: 0.0,
            error: None,
        }
    }

    fn fill_report(&mut self, report: &EvalReport) {
        let fixed05 = report.policy(ThresholdPolicy::Fixed05);
        let best_acc = report.policy(ThresholdPolicy::BestAccuracy);
        let best_f1 = report.policy(ThresholdPolicy::BestF1);
        self.mlp_auc = Some(report.auc);
        self.accuracy_05 = Some(fixed05.accuracy);
        self.fpr_05 = Some(fixed05.fpr);
        self.best_accuracy = Some(best_acc.accuracy);
        self.fpr_at_best_accuracy = Some(best_acc.fpr);
        self.best_accuracy_threshold = Some(best_acc.threshold);
        self.accuracy_at_best_f1 = Some(best_f1.accuracy);
        self.fpr_at_best_f1 = Some(best_f1.fpr);
        self.best_f1_threshold = Some(best_f1.threshold);
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Row fields that must replay exactly; everything but timing.
    pub fn metrics_key(&self) -> SweepRow {
        SweepRow {
            wall_time: 0.0,
            ..self.clone()
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.conf_id.to_string(),
            self.stage.clone(),
            layers(&self.ae_hidden),
            self.embedding_dim.to_string(),
            self.ae_epochs.to_string(),
            fixed(self.ae_val_loss),
            layers(&self.mlp_hidden),
            self.mlp_epochs.to_string(),
            self.mlp_optimizer.to_string(),
            self.mlp_batch_size.to_string(),
            fixed(self.mlp_auc),
            fixed(self.accuracy_05),
            fixed(self.fpr_05),
            fixed(self.best_accuracy),
            fixed(self.fpr_at_best_accuracy),
            fixed(self.best_accuracy_threshold),
            fixed(self.accuracy_at_best_f1),
            fixed(self.fpr_at_best_f1),
            fixed(self.best_f1_threshold),
            format!("{:.6}", self.wall_time),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

pub fn write_rows_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

type TrainedAe = (Autoencoder, Option<f64>, EmbeddingMatrix);

fn capped(epochs: usize, cap: Option<usize>) -> usize {
    cap.map_or(epochs, |c| epochs.min(c.max(1)))
}

/// Applies the sweep seed and epoch cap to one job.
fn resolve(mut job: SweepJob, seed: u64, cap: Option<usize>) -> SweepJob {
    job.ae.train.seed = seed;
    job.ae.train.epochs = capped(job.ae.train.epochs, cap);
    job.mlp.train.seed = seed;
    job.mlp.train.epochs = capped(job.mlp.train.epochs, cap);
    job
}

fn fit_autoencoder(config: &AEConfig, features: &FeatureMatrix) -> Result<TrainedAe, String> {
    let ae = build_sae(features.n_cols(), config).map_err(|e| e.to_string())?;
    let (ae, history) = train_ae(ae, features).map_err(|e| e.to_string())?;
    let embeddings = encode_features(&ae, features).map_err(|e| e.to_string())?;
    Ok((ae, history.final_val_loss(), embeddings))
}

struct RowArtifacts {
    ae: Autoencoder,
    classifier: crate::classifier::Classifier,
    scores: crate::classifier::ScoreVector,
    report: EvalReport,
    roc: RocCurve,
}

fn run_row(
    job: &SweepJob,
    trained: &Result<TrainedAe, String>,
    features: &FeatureMatrix,
) -> (SweepRow, Option<RowArtifacts>) {
    let started = Instant::now();
    let mut row = SweepRow::skeleton(job);
    let outcome = (|| -> Result<RowArtifacts, String> {
        let (ae, val_loss, embeddings) = trained.as_ref().map_err(|e| format!("autoencoder: {e}"))?;
        row.ae_val_loss = *val_loss;
        let mlp = build_mlp(embeddings.dim(), &job.mlp).map_err(|e| format!("classifier: {e}"))?;
        let (classifier, _) =
            train_mlp(mlp, embeddings, &features.labels, &features.split).map_err(|e| format!("classifier: {e}"))?;
        let scores = predict(&classifier, embeddings)
            .map_err(|e| format!("classifier: {e}"))?
            .with_labels(features.labels.clone());
        let validation = scores.select(&features.indices_of(Split::Validation));
        let (report, roc) = evaluate(&validation).map_err(|e| format!("evaluation: {e}"))?;
        Ok(RowArtifacts {
            ae: ae.clone(),
            classifier,
            scores,
            report,
            roc,
        })
    })();
    let artifacts = match outcome {
        Ok(a) => {
            row.fill_report(&a.report);
            Some(a)
        }
        Err(e) => {
            row.error = Some(e);
            None
        }
    };
    row.wall_time = started.elapsed().as_secs_f64();
    (row, artifacts)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn save_artifacts(dir: &Path, row: &SweepRow, a: &RowArtifacts) -> Result<(), SweepError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, body: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io_err(&path))
    };
    write("ae.json", a.ae.to_document().to_json().as_bytes())?;
    write("mlp.json", a.classifier.to_document().to_json().as_bytes())?;
    write(
        "report.json",
        serde_json::to_string_pretty(&a.report)
            .expect("report serializes")
            .as_bytes(),
    )?;
    write(
        "row.json",
        serde_json::to_string_pretty(&row.metrics_key())
            .expect("row serializes")
            .as_bytes(),
    )?;
    let mut scores = Vec::new();
    a.scores.write_csv(&mut scores)?;
    write("scores.csv", &scores)?;
    let mut roc = Vec::new();
    a.roc.write_csv(&mut roc)?;
    write("roc.csv", &roc)
}

/// Runs every job of the plan with the same seed.
///
/// Autoencoders shared by several rows are trained once. Rows come back in
/// conf-id order; a failing row carries its error and the rest still run.
pub fn run_sweep(
    plan: &PlanFile,
    features: &FeatureMatrix,
    seed: u64,
    options: &SweepOptions,
) -> Result<Vec<SweepRow>, SweepError> {
    if !features.is_split() {
        return Err(SweepError::NotSplit);
    }
    let jobs: Vec<SweepJob> = plan
        .jobs()?
        .into_iter()
        .map(|j| resolve(j, seed, options.epoch_cap))
        .collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| SweepError::Pool(e.to_string()))?;

    let mut distinct: Vec<AEConfig> = Vec::new();
    for job in &jobs {
        if !distinct.contains(&job.ae) {
            distinct.push(job.ae.clone());
        }
    }

    let mut rows = pool.install(|| -> Result<Vec<SweepRow>, SweepError> {
        let trained: Vec<Result<TrainedAe, String>> =
            distinct.par_iter().map(|c| fit_autoencoder(c, features)).collect();
        let by_config: HashMap<String, usize> =
            distinct.iter().enumerate().map(|(i, c)| (c.fingerprint(), i)).collect();

        jobs.par_iter()
            .map(|job| {
                let (mut row, artifacts) = run_row(job, &trained[by_config[&job.ae.fingerprint()]], features);
                if let (Some(root), Some(a)) = (&options.artifacts_dir, artifacts) {
                    let dir = root.join("runs").join(job.conf_id.to_string());
                    if let Err(e) = save_artifacts(&dir, &row, &a) {
                        row.error = Some(e.to_string());
                    }
                }
                Ok(row)
            })
            .collect()
    })?;
    rows.sort_by_key(|r| r.conf_id);
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageCriterion {
    /// Keep rows whose AUC is within `delta` of the best row.
    AucWithin { delta: f64 },
    /// Keep rows with AUC at least `min`.
    MinAuc { min: f64 },
}

/// Conf ids of the rows passing `criterion`. Errored rows never pass.
pub fn stage_filter(rows: &[SweepRow], criterion: StageCriterion) -> Vec<u32> {
    let scored: Vec<(u32, f64)> = rows
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| r.mlp_auc.map(|a| (r.conf_id, a)))
        .collect();
    let floor = match criterion {
        StageCriterion::AucWithin { delta } => {
            let Some(best) = scored.iter().map(|s| s.1).reduce(f64::max) else {
                return Vec::new();
            };
            best - delta
        }
        StageCriterion::MinAuc { min } => min,
    };
    scored
        .into_iter()
        .filter(|&(_, auc)| auc >= floor)
        .map(|(id, _)| id)
        .collect()
}
