//! Per-class intent counts and the intents that best separate the classes.

use intent_ids::synth::{sample_corpus, GeneratorSpec};
use intent_ids::{class_counts, normalized_difference, top_k, RankBy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = sample_corpus(&GeneratorSpec::with_signal(300, 300, 40, 5, 7))?.to_corpus();
    let stats = class_counts(&corpus)?;

    for (title, by) in [
        ("most frequent in malware", RankBy::CountMal),
        ("most frequent in benign apps", RankBy::CountBen),
        ("largest malicious contrast", RankBy::NormDiffMal),
    ] {
        println!("{title}:");
        for r in top_k(&stats, by, 5)? {
            println!(
                "  #{:<2} {:<24} mal={:<4} ben={:<4} diff={:+.3}",
                r.rank,
                r.stats.key.column_name(),
                r.stats.count_mal,
                r.stats.count_ben,
                r.stats.norm_diff.unwrap_or(f64::NAN)
            );
        }
    }

    // The contrast is bounded by +-2 and antisymmetric.
    println!("only-malicious {:+}", normalized_difference(10, 0)?);
    println!("only-benign    {:+}", normalized_difference(0, 10)?);
    println!("balanced       {:+}", normalized_difference(10, 10)?);
    Ok(())
}
