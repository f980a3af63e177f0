//! Intent extraction from apktool-decoded `AndroidManifest.xml` files and
//! corpus assembly from a manifest directory plus a labels CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::intent::{IntentError, IntentKey, IntentKind};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed XML in `{app_id}`: {message}")]
    MalformedXml { app_id: String, message: String },
    #[error("`{app_id}`: root element is `{found}`, expected `manifest`")]
    MissingManifestRoot { app_id: String, found: String },
    #[error("`{app_id}`: {source}")]
    Intent {
        app_id: String,
        #[source]
        source: IntentError,
    },
    #[error("labels file not found: {0}")]
    LabelFileMissing(PathBuf),
    #[error("labels file has no rows: {0}")]
    EmptyLabels(PathBuf),
    #[error("{path}:{line}: unknown label `{value}` (expected malicious or benign)")]
    UnknownLabelValue { path: PathBuf, line: u64, value: String },
    #[error("{path}:{line}: {message}")]
    LabelFormat { path: PathBuf, line: u64, message: String },
    #[error("manifest file missing for app `{0}`")]
    ManifestFileMissing(String),
    #[error("duplicate app id `{0}` in labels file")]
    DuplicateAppId(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malicious => "malicious",
            Label::Benign => "benign",
            Label::Unlabeled => "unlabeled",
        }
    }

    /// Positive-class indicator used by the classifier (malicious = 1).
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Malicious => Some(1.0),
            Label::Benign => Some(0.0),
            Label::Unlabeled => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "malicious" => Ok(Label::Malicious),
            "benign" => Ok(Label::Benign),
            "unlabeled" | "" => Ok(Label::Unlabeled),
            other => Err(other.to_string()),
        }
    }
}

/// One application's intent multiset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSample {
    pub app_id: String,
    pub label: Label,
    pub intents: BTreeMap<IntentKey, u32>,
    pub source_path: String,
}

impl AppSample {
    pub fn new(app_id: impl Into<String>, label: Label) -> Self {
        AppSample {
            app_id: app_id.into(),
            label,
            intents: BTreeMap::new(),
            source_path: String::new(),
        }
    }

    pub fn add(&mut self, key: IntentKey) {
        *self.intents.entry(key).or_insert(0) += 1;
    }

    pub fn count(&self, key: &IntentKey) -> u32 {
        self.intents.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.intents.values().map(|&c| c as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub malicious: usize,
    pub benign: usize,
    pub unlabeled: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Malicious => self.malicious,
            Label::Benign => self.benign,
            Label::Unlabeled => self.unlabeled,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::Malicious => self.malicious += 1,
            Label::Benign => self.benign += 1,
            Label::Unlabeled => self.unlabeled += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.malicious + self.benign + self.unlabeled
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    samples: Vec<AppSample>,
    label_counts: LabelCounts,
    /// Manifest files found on disk without a labels row.
    pub ignored_files: usize,
}

impl Corpus {
    pub fn from_samples(samples: Vec<AppSample>) -> Self {
        let mut label_counts = LabelCounts::default();
        for s in &samples {
            label_counts.bump(s.label);
        }
        Corpus {
            samples,
            label_counts,
            ignored_files: 0,
        }
    }

    pub fn samples(&self) -> &[AppSample] {
        &self.samples
    }

    pub fn label_counts(&self) -> LabelCounts {
        self.label_counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stable content hash over ids, labels and multisets.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.samples {
            hasher.update(s.app_id.as_bytes());
            hasher.update([0u8]);
            hasher.update(s.label.as_str().as_bytes());
            for (key, count) in &s.intents {
                hasher.update(key.column_name().as_bytes());
                hasher.update(count.to_le_bytes());
            }
            hasher.update([0xffu8]);
        }
        hex::encode(&hasher.finalize()[..16])
    }
}

fn local_name(qualified: &[u8]) -> &[u8] {
    match qualified.iter().rposition(|&b| b == b':') {
        Some(pos) => &qualified[pos + 1..],
        None => qualified,
    }
}

/// `true` when a value has the `*.intent.extra.*` shape.
fn is_extra_reference(value: &str) -> bool {
    match value.find(".intent.extra.") {
        Some(pos) => pos > 0 && pos + ".intent.extra.".len() < value.len(),
        None => false,
    }
}

/// Parse one manifest document into an intent multiset.
///
/// Each `<action>`/`<category>` element inside an `<intent-filter>` adds one
/// occurrence of its `android:name`. Any attribute value anywhere in the
/// document shaped like `*.intent.extra.*` adds an `extra` occurrence.
pub fn parse_manifest(xml_text: &str, app_id: &str, label: Label) -> Result<AppSample, ManifestError> {
    let malformed = |message: String| ManifestError::MalformedXml {
        app_id: app_id.to_string(),
        message,
    };
    let intent_err = |source: IntentError| ManifestError::Intent {
        app_id: app_id.to_string(),
        source,
    };

    let mut sample = AppSample::new(app_id, label);
    let mut reader = Reader::from_str(xml_text);
    reader.config_mut().check_end_names = true;

    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut filter_depth = 0usize;
    let mut seen_root = false;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| malformed(format!("at byte {}: {e}", reader.buffer_position())))?;
        let (start, is_empty) = match event {
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(e) => {
                let name = local_name(e.name().as_ref()).to_vec();
                if name == b"intent-filter" {
                    filter_depth = filter_depth.saturating_sub(1);
                }
                stack.pop();
                continue;
            }
            Event::Text(t) => {
                if stack.is_empty() && !t.iter().all(|b| b.is_ascii_whitespace()) {
                    return Err(malformed("text outside root element".into()));
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };

        let name = local_name(start.name().as_ref()).to_vec();
        if stack.is_empty() {
            if seen_root {
                return Err(malformed("multiple root elements".into()));
            }
            seen_root = true;
            if name != b"manifest" {
                return Err(ManifestError::MissingManifestRoot {
                    app_id: app_id.to_string(),
                    found: String::from_utf8_lossy(&name).into_owned(),
                });
            }
        }

        let (name_attr, extras) = scan_attributes(&start).map_err(malformed)?;
        for value in extras {
            sample.add(IntentKey::from_raw(IntentKind::Extra, &value).map_err(intent_err)?);
        }

        if filter_depth > 0 {
            let kind = match name.as_slice() {
                b"action" => Some(IntentKind::Action),
                b"category" => Some(IntentKind::Category),
                _ => None,
            };
            if let (Some(kind), Some(value)) = (kind, name_attr) {
                // empty names carry no intent
                if !value.trim().is_empty() {
                    sample.add(IntentKey::from_raw(kind, &value).map_err(intent_err)?);
                }
            }
        }

        if !is_empty {
            if name == b"intent-filter" {
                filter_depth += 1;
            }
            stack.push(name);
        }
    }

    if !seen_root {
        return Err(malformed("document has no root element".into()));
    }
    if let Some(open) = stack.last() {
        return Err(malformed(format!(
            "unclosed element `{}`",
            String::from_utf8_lossy(open)
        )));
    }
    Ok(sample)
}

/// Returns the `name` attribute (any prefix) and every extra-shaped value.
fn scan_attributes(start: &BytesStart<'_>) -> Result<(Option<String>, Vec<String>), String> {
    let mut name_attr = None;
    let mut extras = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let value = attr.unescape_value().map_err(|e| e.to_string())?.into_owned();
        if is_extra_reference(&value) {
            extras.push(value.clone());
        }
        if local_name(attr.key.as_ref()) == b"name" && name_attr.is_none() {
            name_attr = Some(value);
        }
    }
    Ok((name_attr, extras))
}

/// Read and parse a manifest file; `app_id` defaults to the file stem.
pub fn parse_manifest_file(path: &Path, app_id: Option<&str>, label: Label) -> Result<AppSample, ManifestError> {
    let id = match app_id {
        Some(id) => id.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut sample = parse_manifest(&text, &id, label)?;
    sample.source_path = path.display().to_string();
    Ok(sample)
}

/// Location of an app's manifest: `<dir>/<id>.xml` or apktool's
/// `<dir>/<id>/AndroidManifest.xml`.
fn manifest_path(dir: &Path, app_id: &str) -> Option<PathBuf> {
    let flat = dir.join(format!("{app_id}.xml"));
    if flat.is_file() {
        return Some(flat);
    }
    let nested = dir.join(app_id).join("AndroidManifest.xml");
    nested.is_file().then_some(nested)
}

/// App ids present on disk in either supported layout, sorted.
pub fn discover_manifests(dir: &Path) -> Result<Vec<(String, PathBuf)>, ManifestError> {
    let io = |source| ManifestError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut found = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "xml") {
            if let Some(stem) = path.file_stem() {
                found.insert(stem.to_string_lossy().into_owned(), path);
            }
        } else if path.is_dir() {
            let nested = path.join("AndroidManifest.xml");
            if nested.is_file() {
                if let Some(name) = path.file_name() {
                    found.entry(name.to_string_lossy().into_owned()).or_insert(nested);
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Read a `app_id,label` CSV, preserving row order.
pub fn read_labels(labels_file: &Path) -> Result<Vec<(String, Label)>, ManifestError> {
    if !labels_file.is_file() {
        return Err(ManifestError::LabelFileMissing(labels_file.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(labels_file)
        .map_err(|e| ManifestError::LabelFormat {
            path: labels_file.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| ManifestError::LabelFormat {
            path: labels_file.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let (Some(id), Some(raw_label)) = (record.get(0), record.get(1)) else {
            return Err(ManifestError::LabelFormat {
                path: labels_file.to_path_buf(),
                line,
                message: "expected two columns `app_id,label`".into(),
            });
        };
        let label = match raw_label.parse::<Label>() {
            Ok(l @ (Label::Malicious | Label::Benign)) => l,
            _ => {
                return Err(ManifestError::UnknownLabelValue {
                    path: labels_file.to_path_buf(),
                    line,
                    value: raw_label.to_string(),
                })
            }
        };
        if !seen.insert(id.to_string()) {
            return Err(ManifestError::DuplicateAppId(id.to_string()));
        }
        rows.push((id.to_string(), label));
    }
    if rows.is_empty() {
        return Err(ManifestError::EmptyLabels(labels_file.to_path_buf()));
    }
    Ok(rows)
}

/// Build a corpus with one sample per labels row, parsing files in parallel.
pub fn load_corpus(manifest_dir: &Path, labels_file: &Path) -> Result<Corpus, ManifestError> {
    let labels = read_labels(labels_file)?;

    let mut jobs = Vec::with_capacity(labels.len());
    for (id, label) in &labels {
        let path = manifest_path(manifest_dir, id).ok_or_else(|| ManifestError::ManifestFileMissing(id.clone()))?;
        jobs.push((id.as_str(), *label, path));
    }

    let samples = jobs
        .par_iter()
        .map(|(id, label, path)| parse_manifest_file(path, Some(id), *label))
        .collect::<Result<Vec<_>, _>>()?;

    let labeled: BTreeSet<&str> = labels.iter().map(|(id, _)| id.as_str()).collect();
    let ignored = discover_manifests(manifest_dir)?
        .iter()
        .filter(|(id, _)| !labeled.contains(id.as_str()))
        .count();
    if ignored > 0 {
        warn!(
            "{ignored} manifest file(s) in {} have no label and were ignored",
            manifest_dir.display()
        );
    }

    let mut corpus = Corpus::from_samples(samples);
    corpus.ignored_files = ignored;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(kind: IntentKind, name: &str) -> IntentKey {
        IntentKey::new(kind, name).unwrap()
    }

    const LAUNCHER: &str = r#"<?xml version="1.0" encoding="utf-8" standalone="no"?>
<manifest xmlns:android="http://schemas.android.com/apk/res/android" package="com.example.app">
    <application android:label="@string/app_name">
        <activity android:name=".MainActivity">
            <intent-filter>
                <action android:name="android.intent.action.MAIN"/>
                <category android:name="android.intent.category.LAUNCHER"/>
            </intent-filter>
        </activity>
    </application>
</manifest>"#;

    #[test]
    fn main_launcher() {
        let s = parse_manifest(LAUNCHER, "app", Label::Benign).unwrap();
        assert_eq!(s.intents.len(), 2);
        assert_eq!(s.count(&key(IntentKind::Action, "MAIN")), 1);
        assert_eq!(s.count(&key(IntentKind::Category, "LAUNCHER")), 1);
    }

    #[test]
    fn no_filters_is_empty() {
        let xml = r#"<manifest package="x"><application><activity android:name=".A"/></application></manifest>"#;
        let s = parse_manifest(xml, "a", Label::Unlabeled).unwrap();
        assert!(s.intents.is_empty());
    }

    #[test]
    fn actions_outside_filters_are_ignored() {
        let xml = r#"<manifest><action android:name="android.intent.action.MAIN"/></manifest>"#;
        let s = parse_manifest(xml, "a", Label::Unlabeled).unwrap();
        assert!(s.intents.is_empty());
    }

    #[test]
    fn repeated_action_across_filters() {
        let xml = r#"<manifest xmlns:android="http://schemas.android.com/apk/res/android">
  <application>
    <receiver android:name=".Boot">
      <intent-filter><action android:name="android.intent.action.BOOT_COMPLETED"/></intent-filter>
    </receiver>
    <service android:name=".Svc">
      <intent-filter android:priority="1000">
        <action android:name="android.intent.action.BOOT_COMPLETED"></action>
      </intent-filter>
    </service>
  </application>
</manifest>"#;
        let s = parse_manifest(xml, "a", Label::Malicious).unwrap();
        assert_eq!(s.count(&key(IntentKind::Action, "BOOT_COMPLETED")), 2);
    }

    #[test]
    fn unprefixed_and_foreign_prefix_names() {
        let xml = r#"<manifest><application><activity>
            <intent-filter>
              <action name="android.intent.action.VIEW"/>
              <a:category a:name="android.intent.category.BROWSABLE"/>
            </intent-filter></activity></application></manifest>"#;
        let s = parse_manifest(xml, "a", Label::Benign).unwrap();
        assert_eq!(s.count(&key(IntentKind::Action, "VIEW")), 1);
        assert_eq!(s.count(&key(IntentKind::Category, "BROWSABLE")), 1);
    }

    #[test]
    fn extra_values_anywhere() {
        let xml = r#"<manifest><application>
            <meta-data android:name="x" android:value="android.intent.extra.DATA_REMOVED"/>
            <meta-data android:name="android.intent.extra" android:value="nope"/>
        </application></manifest>"#;
        let s = parse_manifest(xml, "a", Label::Malicious).unwrap();
        assert_eq!(s.intents.len(), 1);
        assert_eq!(s.count(&key(IntentKind::Extra, "DATA_REMOVED")), 1);
    }

    #[test]
    fn wrong_root() {
        let err = parse_manifest("<application/>", "a", Label::Benign).unwrap_err();
        assert!(matches!(err, ManifestError::MissingManifestRoot { ref found, .. } if found == "application"));
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "",
            "<manifest>",
            "<manifest><intent-filter></manifest>",
            "<manifest></manifest><manifest/>",
            "<manifest a=\"1></manifest>",
            "not xml at all",
        ] {
            let err = parse_manifest(bad, "a", Label::Benign).unwrap_err();
            assert!(
                matches!(err, ManifestError::MalformedXml { .. }),
                "{bad:?} gave {err:?}"
            );
        }
    }

    #[test]
    fn deterministic_parse() {
        let a = parse_manifest(LAUNCHER, "x", Label::Benign).unwrap();
        let b = parse_manifest(LAUNCHER, "x", Label::Benign).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Malicious".parse::<Label>().unwrap(), Label::Malicious);
        assert_eq!(" benign ".parse::<Label>().unwrap(), Label::Benign);
        assert!("evil".parse::<Label>().is_err());
    }

    fn write_corpus(dir: &Path, labels: &str, files: &[&str]) -> PathBuf {
        for f in files {
            fs::write(dir.join(format!("{f}.xml")), LAUNCHER).unwrap();
        }
        let path = dir.join("labels.csv");
        fs::write(&path, labels).unwrap();
        path
    }

    #[test]
    fn load_two_apps() {
        let tmp = tempfile::tempdir().unwrap();
        let labels = write_corpus(tmp.path(), "app_id,label\na,malicious\nb,benign\n", &["a", "b", "c"]);
        let corpus = load_corpus(tmp.path(), &labels).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.samples()[0].app_id, "a");
        assert_eq!(corpus.label_counts().malicious, 1);
        assert_eq!(corpus.label_counts().benign, 1);
        assert_eq!(corpus.ignored_files, 1);
    }

    #[test]
    fn apktool_layout_is_found() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir(tmp.path().join("nested")).unwrap();
        fs::write(tmp.path().join("nested/AndroidManifest.xml"), LAUNCHER).unwrap();
        let labels = write_corpus(tmp.path(), "app_id,label\nnested,benign\n", &[]);
        let corpus = load_corpus(tmp.path(), &labels).unwrap();
        assert_eq!(corpus.samples()[0].intents.len(), 2);
    }

    #[test]
    fn load_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let missing = load_corpus(tmp.path(), &tmp.path().join("nope.csv")).unwrap_err();
        assert!(matches!(missing, ManifestError::LabelFileMissing(_)));

        let labels = write_corpus(tmp.path(), "app_id,label\na,malicious\nghost,benign\n", &["a"]);
        match load_corpus(tmp.path(), &labels).unwrap_err() {
            ManifestError::ManifestFileMissing(id) => assert_eq!(id, "ghost"),
            other => panic!("unexpected {other:?}"),
        }

        let labels = write_corpus(tmp.path(), "app_id,label\na,malware\n", &["a"]);
        assert!(matches!(
            load_corpus(tmp.path(), &labels).unwrap_err(),
            ManifestError::UnknownLabelValue { line: 2, .. }
        ));

        let labels = write_corpus(tmp.path(), "app_id,label\na,benign\na,benign\n", &["a"]);
        assert!(matches!(
            load_corpus(tmp.path(), &labels).unwrap_err(),
            ManifestError::DuplicateAppId(_)
        ));

        let labels = write_corpus(tmp.path(), "app_id,label\n", &["a"]);
        assert!(matches!(
            load_corpus(tmp.path(), &labels).unwrap_err(),
            ManifestError::EmptyLabels(_)
        ));
    }
}
