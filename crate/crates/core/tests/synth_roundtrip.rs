use intent_ids::autoencoder::AEConfig;
use intent_ids::classifier::MLPConfig;
use intent_ids::features::{build_vocabulary, split_train_validation, vectorize};
use intent_ids::manifest::{load_corpus, Label};
use intent_ids::nn::{OptimizerKind, TrainConfig};
use intent_ids::pipeline::run_pipeline;
use intent_ids::stats::class_counts;
use intent_ids::synth::{generate_corpus, sample_corpus, GeneratorSpec};
use proptest::prelude::*;

#[test]
fn parsed_corpus_reproduces_emission_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = GeneratorSpec::with_signal(25, 15, 16, 4, 11);
    spec.max_repeat = 3;
    let (synth, paths) = generate_corpus(&spec, dir.path()).unwrap();
    let corpus = load_corpus(&paths.manifest_dir, &paths.labels).unwrap();
    assert_eq!(corpus.len(), 40);
    for (i, sample) in corpus.samples().iter().enumerate() {
        assert_eq!(sample.app_id, synth.app_ids[i]);
        assert_eq!(sample.label, synth.labels[i]);
        for (j, &c) in synth.counts[i].iter().enumerate() {
            assert_eq!(sample.count(&GeneratorSpec::key(j)), c, "app {i} key {j}");
        }
        assert_eq!(sample.total(), synth.counts[i].iter().map(|&c| c as u64).sum::<u64>());
    }
}

#[test]
fn class_counts_equal_generator_totals() {
    let synth = sample_corpus(&GeneratorSpec::with_signal(20, 20, 16, 4, 5)).unwrap();
    let stats = class_counts(&synth.to_corpus()).unwrap();
    for s in &stats {
        let j = (0..16).find(|&j| GeneratorSpec::key(j) == s.key).unwrap();
        assert_eq!(s.count_mal, synth.class_total(j, Label::Malicious));
        assert_eq!(s.count_ben, synth.class_total(j, Label::Benign));
    }
    assert_eq!(stats.len(), synth.realized_keys().len());
}

#[test]
fn one_sided_key_scores_plus_two() {
    let mut spec = GeneratorSpec::with_signal(30, 30, 4, 0, 1);
    spec.p_mal[2] = 1.0;
    spec.p_ben[2] = 0.0;
    let stats = class_counts(&sample_corpus(&spec).unwrap().to_corpus()).unwrap();
    let s = stats.iter().find(|s| s.key == GeneratorSpec::key(2)).unwrap();
    assert_eq!((s.count_mal, s.count_ben, s.norm_diff), (30, 0, Some(2.0)));
}

#[test]
fn indistinguishable_classes_give_chance_auc() {
    let mut spec = GeneratorSpec::with_signal(150, 150, 16, 0, 3);
    spec.p_ben = spec.p_mal.clone();
    let corpus = sample_corpus(&spec).unwrap().to_corpus();
    let vocab = build_vocabulary(&corpus).unwrap();
    let features = split_train_validation(vectorize(&corpus, &vocab, true), 0.7, 3).unwrap();
    let ae = AEConfig::new(vec![8], 4, TrainConfig::new(30, 32, 3)).with_optimizer(OptimizerKind::Rmsprop);
    let mlp = MLPConfig::new(vec![8], TrainConfig::new(30, 32, 3)).with_optimizer(OptimizerKind::Rmsprop);
    let auc = run_pipeline(&features, &ae, &mlp).unwrap().report.auc;
    assert!((0.3..=0.7).contains(&auc), "auc {auc}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_is_seeded(seed in any::<u64>(), n_mal in 1usize..8, n_ben in 1usize..8, vocab in 2usize..12) {
        let spec = GeneratorSpec::with_signal(n_mal, n_ben, vocab, 1, seed);
        let a = sample_corpus(&spec).unwrap();
        let b = sample_corpus(&spec).unwrap();
        prop_assert_eq!(&a.counts, &b.counts);
        prop_assert_eq!(a.app_ids.len(), n_mal + n_ben);
        prop_assert!(a.counts.iter().flatten().all(|&c| c <= 1));
    }
}
