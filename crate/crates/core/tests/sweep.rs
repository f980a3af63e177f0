use intent_ids::autoencoder::AEConfig;
use intent_ids::classifier::MLPConfig;
use intent_ids::features::{build_vocabulary, split_train_validation, vectorize, FeatureMatrix};
use intent_ids::metrics::ThresholdPolicy;
use intent_ids::nn::{OptimizerKind, TrainConfig};
use intent_ids::pipeline::run_pipeline;
use intent_ids::sweep::{
    run_sweep, stage_filter, Pairing, PlanFile, StageCriterion, SweepOptions, SweepPlan, SweepRow,
};
use intent_ids::synth::{sample_corpus, GeneratorSpec};

fn features() -> FeatureMatrix {
    let corpus = sample_corpus(&GeneratorSpec::with_signal(50, 50, 24, 6, 9))
        .unwrap()
        .to_corpus();
    let vocab = build_vocabulary(&corpus).unwrap();
    split_train_validation(vectorize(&corpus, &vocab, true), 0.7, 9).unwrap()
}

fn ae(hidden: Vec<usize>, emb: usize) -> AEConfig {
    AEConfig::new(hidden, emb, TrainConfig::new(15, 16, 0)).with_optimizer(OptimizerKind::Adam)
}

fn mlp(hidden: Vec<usize>) -> MLPConfig {
    MLPConfig::new(hidden, TrainConfig::new(15, 16, 0)).with_optimizer(OptimizerKind::Rmsprop)
}

fn plan() -> PlanFile {
    PlanFile {
        description: "test".into(),
        stages: vec![
            SweepPlan {
                name: "ae".into(),
                pairing: Pairing::FixedMlpVaryAe,
                conf_id_start: 1,
                ae_grid: vec![ae(vec![12], 6), ae(vec![8], 4), ae(vec![12], 6)],
                mlp_grid: vec![mlp(vec![8])],
            },
            SweepPlan {
                name: "mlp".into(),
                pairing: Pairing::FixedAeVaryMlp,
                conf_id_start: 4,
                ae_grid: vec![ae(vec![12], 6)],
                mlp_grid: vec![mlp(vec![4]), mlp(vec![8, 8])],
            },
            SweepPlan {
                name: "bad".into(),
                pairing: Pairing::Explicit,
                conf_id_start: 6,
                ae_grid: vec![ae(vec![64], 6)],
                mlp_grid: vec![mlp(vec![4])],
            },
        ],
    }
}

fn keys(rows: &[SweepRow]) -> Vec<SweepRow> {
    rows.iter().map(SweepRow::metrics_key).collect()
}

#[test]
fn rows_are_ordered_and_failures_recorded() {
    let rows = run_sweep(&plan(), &features(), 4, &SweepOptions::default()).unwrap();
    let ids: Vec<u32> = rows.iter().map(|r| r.conf_id).collect();
    assert_eq!(ids, [1, 2, 3, 4, 5, 6]);
    assert!(rows[..5].iter().all(SweepRow::is_ok));
    assert!(rows[5].error.as_deref().unwrap().contains("non-increasing"));
    assert_eq!(keys(&rows[..1])[0].mlp_auc, rows[2].mlp_auc);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let f = features();
    let one = run_sweep(
        &plan(),
        &f,
        4,
        &SweepOptions {
            workers: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let four = run_sweep(
        &plan(),
        &f,
        4,
        &SweepOptions {
            workers: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(keys(&one), keys(&four));
}

#[test]
fn single_row_equals_manual_pipeline() {
    let f = features();
    let (a, m) = (ae(vec![8], 4), mlp(vec![8]));
    let rows = run_sweep(
        &PlanFile::single(a.clone(), m.clone()),
        &f,
        21,
        &SweepOptions::default(),
    )
    .unwrap();
    let mut a = a;
    let mut m = m;
    a.train.seed = 21;
    m.train.seed = 21;
    let manual = run_pipeline(&f, &a, &m).unwrap();
    let row = &rows[0];
    assert_eq!(row.mlp_auc, Some(manual.report.auc));
    assert_eq!(row.ae_val_loss, manual.ae_history.final_val_loss());
    let best = manual.report.policy(ThresholdPolicy::BestF1);
    assert_eq!(row.best_f1_threshold, Some(best.threshold));
    assert_eq!(row.accuracy_at_best_f1, Some(best.accuracy));
}

#[test]
fn artifacts_land_under_runs() {
    let dir = tempfile::tempdir().unwrap();
    let options = SweepOptions {
        workers: Some(2),
        epoch_cap: Some(2),
        artifacts_dir: Some(dir.path().to_path_buf()),
    };
    let rows = run_sweep(&plan(), &features(), 1, &options).unwrap();
    assert!(rows.iter().all(|r| r.mlp_epochs <= 2 && r.ae_epochs <= 2));
    for id in 1..=5 {
        for f in ["ae.json", "mlp.json", "report.json", "scores.csv", "roc.csv"] {
            assert!(dir.path().join(format!("runs/{id}/{f}")).is_file(), "{id}/{f}");
        }
    }
    assert!(!dir.path().join("runs/6").exists());
}

#[test]
fn stage_filter_on_real_rows() {
    let rows = run_sweep(&plan(), &features(), 4, &SweepOptions::default()).unwrap();
    let all = stage_filter(&rows, StageCriterion::AucWithin { delta: 1.0 });
    assert_eq!(all, [1, 2, 3, 4, 5]);
    let best = stage_filter(&rows, StageCriterion::AucWithin { delta: 0.0 });
    let top = rows.iter().filter_map(|r| r.mlp_auc).fold(f64::MIN, f64::max);
    assert!(!best.is_empty());
    assert!(best.iter().all(|id| rows[*id as usize - 1].mlp_auc == Some(top)));
}
