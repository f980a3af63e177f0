//! Intent identities and name normalization.
//!
//! Manifest attributes such as `android.intent.action.BOOT_COMPLETED` are
//! reduced to a short canonical name (`BOOT_COMPLETED`) tagged with the kind
//! of declaration it came from.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokens that end the package prefix of an intent name.
const KIND_TOKENS: [&str; 3] = ["action", "category", "extra"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntentError {
    #[error("intent name is empty")]
    EmptyName,
    #[error("unknown intent kind `{0}`")]
    UnknownKind(String),
    #[error("malformed intent column `{0}`, expected `<kind>:<NAME>`")]
    MalformedColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentKind {
    Action,
    Category,
    Extra,
}

impl IntentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntentKind::Action => "action",
            IntentKind::Category => "category",
            IntentKind::Extra => "extra",
        }
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntentKind {
    type Err = IntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "action" => Ok(IntentKind::Action),
            "category" => Ok(IntentKind::Category),
            "extra" => Ok(IntentKind::Extra),
            other => Err(IntentError::UnknownKind(other.to_string())),
        }
    }
}

/// Normalize a raw intent attribute value to its canonical short name.
///
/// Everything up to and including the last `action`, `category` or `extra`
/// path segment is dropped, the rest is uppercased and joined with `_`.
/// Without such a segment the whole string is kept. Characters outside
/// `[A-Za-z0-9_.]` become `_`.
pub fn normalize_intent_name(raw: &str) -> Result<String, IntentError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(IntentError::EmptyName);
    }
    let segments: Vec<&str> = raw.split('.').collect();
    let start = segments
        .iter()
        .enumerate()
        .rev()
        .find(|(i, seg)| KIND_TOKENS.contains(seg) && *i + 1 < segments.len())
        .map(|(i, _)| i + 1)
        .unwrap_or(0);

    let name: String = segments[start..]
        .iter()
        .filter(|seg| !seg.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join("_")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();

    if name.is_empty() {
        return Err(IntentError::EmptyName);
    }
    Ok(name)
}

/// One declared intent: its kind plus normalized name.
///
/// Equality, ordering and hashing only look at `(kind, name)`; `raw` keeps
/// the first spelling seen for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntentKey {
    pub kind: IntentKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub raw: String,
}

impl IntentKey {
    pub fn from_raw(kind: IntentKind, raw: &str) -> Result<Self, IntentError> {
        Ok(IntentKey {
            kind,
            name: normalize_intent_name(raw)?,
            raw: raw.trim().to_string(),
        })
    }

    /// Key with an already-normalized name (no raw spelling).
    pub fn new(kind: IntentKind, name: &str) -> Result<Self, IntentError> {
        Ok(IntentKey {
            kind,
            name: normalize_intent_name(name)?,
            raw: String::new(),
        })
    }

    /// Column label used in feature CSV headers, e.g. `action:MAIN`.
    pub fn column_name(&self) -> String {
        format!("{}:{}", self.kind, self.name)
    }

    pub fn parse_column(column: &str) -> Result<Self, IntentError> {
        let (kind, name) = column
            .split_once(':')
            .ok_or_else(|| IntentError::MalformedColumn(column.to_string()))?;
        IntentKey::new(kind.parse()?, name)
    }
}

impl PartialEq for IntentKey {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name
    }
}

impl Eq for IntentKey {}

impl Hash for IntentKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
        self.name.hash(state);
    }
}

impl PartialOrd for IntentKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IntentKey {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.kind, &self.name).cmp(&(other.kind, &other.name))
    }
}

impl fmt::Display for IntentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_platform_prefix() {
        assert_eq!(
            normalize_intent_name("android.intent.action.BOOT_COMPLETED").unwrap(),
            "BOOT_COMPLETED"
        );
        assert_eq!(
            normalize_intent_name("android.intent.category.LAUNCHER").unwrap(),
            "LAUNCHER"
        );
        assert_eq!(
            normalize_intent_name("android.intent.action.ACTION_POWER_CONNECTED").unwrap(),
            "ACTION_POWER_CONNECTED"
        );
    }

    #[test]
    fn already_normalized() {
        assert_eq!(normalize_intent_name("MAIN").unwrap(), "MAIN");
    }

    #[test]
    fn vendor_suffix_segments_are_joined() {
        assert_eq!(
            normalize_intent_name("com.vendor.intent.action.foo.bar").unwrap(),
            "FOO_BAR"
        );
    }

    #[test]
    fn no_kind_token_keeps_everything() {
        assert_eq!(
            normalize_intent_name("com.example.Custom-Thing").unwrap(),
            "COM_EXAMPLE_CUSTOM_THING"
        );
        // trailing kind token has nothing after it
        assert_eq!(normalize_intent_name("com.foo.action").unwrap(), "COM_FOO_ACTION");
    }

    #[test]
    fn empty_is_rejected() {
        assert_eq!(normalize_intent_name(""), Err(IntentError::EmptyName));
        assert_eq!(normalize_intent_name("   "), Err(IntentError::EmptyName));
        assert_eq!(normalize_intent_name("..."), Err(IntentError::EmptyName));
    }

    #[test]
    fn equality_ignores_raw() {
        let a = IntentKey::from_raw(IntentKind::Action, "android.intent.action.MAIN").unwrap();
        let b = IntentKey::new(IntentKind::Action, "MAIN").unwrap();
        let c = IntentKey::new(IntentKind::Category, "MAIN").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn column_round_trip() {
        let key = IntentKey::new(IntentKind::Extra, "DATA_REMOVED").unwrap();
        assert_eq!(key.column_name(), "extra:DATA_REMOVED");
        assert_eq!(IntentKey::parse_column("extra:DATA_REMOVED").unwrap(), key);
        assert!(IntentKey::parse_column("DATA_REMOVED").is_err());
    }

    proptest! {
        #[test]
        fn normalized_names_are_canonical(raw in "[a-zA-Z0-9_.$-]{1,40}") {
            if let Ok(name) = normalize_intent_name(&raw) {
                prop_assert!(!name.is_empty());
                prop_assert!(name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_'));
                // idempotent
                prop_assert_eq!(normalize_intent_name(&name).unwrap(), name.clone());
            }
        }
    }
}
