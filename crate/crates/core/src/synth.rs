//! Synthetic labeled manifest corpora with known per-intent emission rates.
//!
//! Every app draws each vocabulary intent independently with its class's
//! probability. The generator writes apktool-style manifests plus a labels
//! CSV in the layout [`load_corpus`](crate::manifest::load_corpus) reads, and
//! keeps the exact emission counts as ground truth.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::{IntentKey, IntentKind};
use crate::manifest::{AppSample, Corpus, Label};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("writing {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn default_repeat() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_mal: usize,
    pub n_ben: usize,
    pub vocab_size: usize,
    pub p_mal: Vec<f64>,
    pub p_ben: Vec<f64>,
    pub seed: u64,
    /// Present intents occur between 1 and `max_repeat` times.
    #[serde(default = "default_repeat")]
    pub max_repeat: u32,
}

impl GeneratorSpec {
    /// `n_signal` keys with `p_mal = 0.8`, `p_ben = 0.1`; the remaining
    /// keys share one rate per key, drawn uniformly from `[0.05, 0.5)`.
    pub fn with_signal(n_mal: usize, n_ben: usize, vocab_size: usize, n_signal: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5eed);
        let mut p_mal = Vec::with_capacity(vocab_size);
        let mut p_ben = Vec::with_capacity(vocab_size);
        for j in 0..vocab_size {
            if j < n_signal {
                p_mal.push(0.8);
                p_ben.push(0.1);
            } else {
                let p = rng.gen_range(0.05..0.5);
                p_mal.push(p);
                p_ben.push(p);
            }
        }
        GeneratorSpec {
            n_mal,
            n_ben,
            vocab_size,
            p_mal,
            p_ben,
            seed,
            max_repeat: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_mal == 0 || self.n_ben == 0 {
            return bad("both classes need at least one app".into());
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2".into());
        }
        if self.p_mal.len() != self.vocab_size || self.p_ben.len() != self.vocab_size {
            return bad("probability vectors must have vocab_size entries".into());
        }
        if self.p_mal.iter().chain(&self.p_ben).any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if self.max_repeat == 0 {
            return bad("max_repeat must be at least 1".into());
        }
        Ok(())
    }

    /// The kind and raw attribute value for generator key `j`.
    pub fn raw_key(j: usize) -> (IntentKind, String) {
        match j % 4 {
            1 => (IntentKind::Category, format!("android.intent.category.SYNTH_{j:03}")),
            3 => (IntentKind::Extra, format!("android.intent.extra.SYNTH_{j:03}")),
            _ => (IntentKind::Action, format!("android.intent.action.SYNTH_{j:03}")),
        }
    }

    pub fn key(j: usize) -> IntentKey {
        let (kind, raw) = Self::raw_key(j);
        IntentKey::from_raw(kind, &raw).expect("generated names are valid")
    }
}

/// Generated apps with their exact emission counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub spec: GeneratorSpec,
    pub app_ids: Vec<String>,
    pub labels: Vec<Label>,
    /// `counts[i][j]`: occurrences of generator key `j` in app `i`.
    pub counts: Vec<Vec<u32>>,
}

impl SyntheticCorpus {
    pub fn keys(&self) -> Vec<IntentKey> {
        (0..self.spec.vocab_size).map(GeneratorSpec::key).collect()
    }

    /// Keys that occur at least once.
    pub fn realized_keys(&self) -> Vec<IntentKey> {
        (0..self.spec.vocab_size)
            .filter(|&j| self.counts.iter().any(|row| row[j] > 0))
            .map(GeneratorSpec::key)
            .collect()
    }

    /// Total occurrences of key `j` among apps with `label`.
    pub fn class_total(&self, j: usize, label: Label) -> u64 {
        self.counts
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == label)
            .map(|(row, _)| row[j] as u64)
            .sum()
    }

    /// In-memory corpus equal to what parsing the written files yields.
    pub fn to_corpus(&self) -> Corpus {
        let samples = self
            .app_ids
            .iter()
            .zip(&self.labels)
            .zip(&self.counts)
            .map(|((id, &label), row)| {
                let mut s = AppSample::new(id.clone(), label);
                for (j, &c) in row.iter().enumerate() {
                    if c > 0 {
                        s.intents.insert(GeneratorSpec::key(j), c);
                    }
                }
                s
            })
            .collect();
        Corpus::from_samples(samples)
    }

    pub fn manifest_xml(&self, app: usize) -> String {
        render_manifest(&self.app_ids[app], &self.counts[app], self.spec.seed ^ app as u64)
    }

    /// Write `<dir>/manifests/<id>.xml`, `<dir>/labels.csv` and
    /// `<dir>/ground_truth.json`.
    pub fn write_to(&self, dir: &Path) -> Result<CorpusPaths, SynthError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SynthError::IoFailure { path, source }
        };
        let manifests = dir.join("manifests");
        fs::create_dir_all(&manifests).map_err(io(&manifests))?;
        for i in 0..self.app_ids.len() {
            let path = manifests.join(format!("{}.xml", self.app_ids[i]));
            fs::write(&path, self.manifest_xml(i)).map_err(io(&path))?;
        }

        let labels = dir.join("labels.csv");
        let mut text = String::from("app_id,label\n");
        for (id, label) in self.app_ids.iter().zip(&self.labels) {
            let _ = writeln!(text, "{id},{label}");
        }
        fs::write(&labels, text).map_err(io(&labels))?;

        let truth = dir.join("ground_truth.json");
        let json = serde_json::to_string_pretty(self).expect("ground truth serializes");
        fs::write(&truth, json).map_err(io(&truth))?;

        Ok(CorpusPaths {
            manifest_dir: manifests,
            labels,
            ground_truth: truth,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPaths {
    pub manifest_dir: PathBuf,
    pub labels: PathBuf,
    pub ground_truth: PathBuf,
}

/// Draw the emission counts (no files written).
pub fn sample_corpus(spec: &GeneratorSpec) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_mal + spec.n_ben;
    let mut app_ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for i in 0..n {
        let (label, probs) = if i < spec.n_mal {
            (Label::Malicious, &spec.p_mal)
        } else {
            (Label::Benign, &spec.p_ben)
        };
        let row = probs
            .iter()
            .map(|&p| {
                if rng.gen_bool(p) {
                    if spec.max_repeat > 1 {
                        rng.gen_range(1..=spec.max_repeat)
                    } else {
                        1
                    }
                } else {
                    0
                }
            })
            .collect();
        app_ids.push(format!("app_{i:05}"));
        labels.push(label);
        counts.push(row);
    }
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        app_ids,
        labels,
        counts,
    })
}

/// Sample a corpus and write it under `dir`.
pub fn generate_corpus(spec: &GeneratorSpec, dir: &Path) -> Result<(SyntheticCorpus, CorpusPaths), SynthError> {
    let corpus = sample_corpus(spec)?;
    let paths = corpus.write_to(dir)?;
    Ok((corpus, paths))
}

fn render_manifest(app_id: &str, counts: &[u32], seed: u64) -> String {
    // spread filter entries over a few components so repeats land in
    // separate filters
    const COMPONENTS: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut filters: Vec<Vec<String>> = vec![Vec::new(); COMPONENTS];
    let mut extras = Vec::new();
    for (j, &c) in counts.iter().enumerate() {
        let (kind, raw) = GeneratorSpec::raw_key(j);
        for _ in 0..c {
            match kind {
                IntentKind::Extra => extras.push(raw.clone()),
                IntentKind::Action => {
                    filters[rng.gen_range(0..COMPONENTS)].push(format!("<action android:name=\"{raw}\"/>"))
                }
                IntentKind::Category => {
                    filters[rng.gen_range(0..COMPONENTS)].push(format!("<category android:name=\"{raw}\"/>"))
                }
            }
        }
    }

    let package = format!(
        "org.synthetic.{}",
        app_id.replace(|c: char| !c.is_ascii_alphanumeric(), "_")
    );
    let mut xml = String::new();
    xml.push_str("<?xml version=\"1.0\" encoding=\"utf-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        xml,
        "<manifest xmlns:android=\"http://schemas.android.com/apk/res/android\" package=\"{package}\">"
    );
    xml.push_str("    <application android:label=\"@string/app_name\">\n");
    let tags = ["activity", "receiver", "service"];
    for (c, entries) in filters.iter().enumerate() {
        let _ = writeln!(xml, "        <{} android:name=\".Component{c}\">", tags[c]);
        for entry in entries {
            // one element per filter keeps repeated keys in distinct filters
            let _ = writeln!(
                xml,
                "            <intent-filter>\n                {entry}\n            </intent-filter>"
            );
        }
        let _ = writeln!(xml, "        </{}>", tags[c]);
    }
    for (k, raw) in extras.iter().enumerate() {
        let _ = writeln!(
            xml,
            "        <meta-data android:name=\"synthetic.extra.{k}\" android:value=\"{raw}\"/>"
        );
    }
    xml.push_str("    </application>\n</manifest>\n");
    xml
}
