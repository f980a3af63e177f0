//! Write a synthetic labelled corpus to disk and read it back.
//!
//! `cargo run --example synth_corpus [out_dir]`

use intent_ids::load_corpus;
use intent_ids::synth::{generate_corpus, GeneratorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth-out".into());
    let mut spec = GeneratorSpec::with_signal(50, 50, 20, 4, 42);
    spec.max_repeat = 2;
    let (synth, paths) = generate_corpus(&spec, out.as_ref())?;
    println!(
        "wrote {} manifests to {}",
        synth.app_ids.len(),
        paths.manifest_dir.display()
    );
    println!("labels: {}", paths.labels.display());

    let corpus = load_corpus(&paths.manifest_dir, &paths.labels)?;
    let counts = corpus.label_counts();
    println!(
        "reloaded {} apps ({} malicious, {} benign)",
        corpus.len(),
        counts.malicious,
        counts.benign
    );
    println!("corpus fingerprint {}", corpus.fingerprint());
    println!("{}", synth.manifest_xml(0));
    Ok(())
}
