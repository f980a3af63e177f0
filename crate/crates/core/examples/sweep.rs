//! Run a small staged sweep and keep the configurations near the best AUC.
//!
//! The bundled full grid is available as `PlanFile::bundled()`.

use intent_ids::nn::{OptimizerKind, TrainConfig};
use intent_ids::sweep::{
    run_sweep, stage_filter, write_rows_csv, Pairing, PlanFile, StageCriterion, SweepOptions, SweepPlan,
};
use intent_ids::synth::{sample_corpus, GeneratorSpec};
use intent_ids::{build_vocabulary, split_train_validation, vectorize, AEConfig, MLPConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = sample_corpus(&GeneratorSpec::with_signal(150, 150, 32, 6, 5))?.to_corpus();
    let vocab = build_vocabulary(&corpus)?;
    let features = split_train_validation(vectorize(&corpus, &vocab, true), 0.7, 5)?;

    let train = TrainConfig::new(40, 32, 0);
    let ae = |h: Vec<usize>, e| AEConfig::new(h, e, train.clone()).with_optimizer(OptimizerKind::Rmsprop);
    let mlp = |h: Vec<usize>| MLPConfig::new(h, train.clone()).with_optimizer(OptimizerKind::Rmsprop);
    let plan = PlanFile {
        description: "two-stage demo".into(),
        stages: vec![
            SweepPlan {
                name: "ae".into(),
                pairing: Pairing::FixedMlpVaryAe,
                conf_id_start: 1,
                ae_grid: vec![ae(vec![16], 8), ae(vec![16], 4), ae(vec![24, 12], 6)],
                mlp_grid: vec![mlp(vec![8])],
            },
            SweepPlan {
                name: "mlp".into(),
                pairing: Pairing::FixedAeVaryMlp,
                conf_id_start: 4,
                ae_grid: vec![ae(vec![16], 8)],
                mlp_grid: vec![mlp(vec![16, 16]), mlp(vec![8, 8, 8])],
            },
        ],
    };
    println!("{}", plan.to_toml());

    let rows = run_sweep(&plan, &features, 5, &SweepOptions::default())?;
    write_rows_csv(&rows, std::io::stdout())?;
    let kept = stage_filter(&rows, StageCriterion::AucWithin { delta: 0.02 });
    println!("\nwithin 0.02 of the best AUC: {kept:?}");
    println!("bundled grid has {} configurations", PlanFile::bundled().jobs()?.len());
    Ok(())
}
