//! Shared domain types and canonical label normalization.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical encoding of an entity or relation label.
///
/// Lowercases, turns hyphens and underscores into spaces, collapses runs of
/// whitespace and trims both ends. `"related-to"` and `"related to"` map to
/// the same string. The function is idempotent.
pub fn normalize_label(label: &str) -> String {
    let lowered = label.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("triplet {0} is empty after trimming")]
    EmptyField(&'static str),
    #[error("multiplicity must be at least 1")]
    ZeroMultiplicity,
    #[error("relation label {label:?} maps to an empty alias")]
    EmptyAlias { label: String },
    #[error("alias {alias:?} is used by both {first:?} and {second:?}")]
    AliasCollision {
        alias: String,
        first: String,
        second: String,
    },
    #[error("relation label {label:?} appears twice with different aliases")]
    DuplicateLabel { label: String },
    #[error("merge map entry {variant:?} -> {canonical:?} forms a chain")]
    MergeChain { variant: String, canonical: String },
    #[error("merge map entry {label:?} maps to itself")]
    MergeSelf { label: String },
    #[error("variant {variant:?} is mapped to two different canonical labels")]
    MergeConflict { variant: String },
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::EmptyField(_) => "E_EMPTY_FIELD",
            ModelError::ZeroMultiplicity => "E_MULTIPLICITY",
            ModelError::EmptyAlias { .. } => "E_EMPTY_ALIAS",
            ModelError::AliasCollision { .. } => "E_ALIAS_COLLISION",
            ModelError::DuplicateLabel { .. } => "E_DUP_LABEL",
            ModelError::MergeChain { .. } => "E_MERGE_CHAIN",
            ModelError::MergeSelf { .. } => "E_MERGE_SELF",
            ModelError::MergeConflict { .. } => "E_MERGE_CONFLICT",
        }
    }
}

fn one() -> u64 {
    1
}

/// A subject–predicate–object statement with provenance and a fold count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default = "one")]
    pub multiplicity: u64,
}

/// Identity of a triple for deduplication: the normalized three labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleKey {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triplet {
    /// Builds a triple with trimmed subject/object and a normalized predicate.
    pub fn new(subject: &str, predicate: &str, object: &str) -> Result<Self, ModelError> {
        let subject = subject.trim();
        let object = object.trim();
        let predicate = normalize_label(predicate);
        if subject.is_empty() {
            return Err(ModelError::EmptyField("subject"));
        }
        if predicate.is_empty() {
            return Err(ModelError::EmptyField("predicate"));
        }
        if object.is_empty() {
            return Err(ModelError::EmptyField("object"));
        }
        Ok(Triplet {
            subject: subject.to_owned(),
            predicate,
            object: object.to_owned(),
            paper_id: None,
            source: None,
            multiplicity: 1,
        })
    }

    pub fn with_paper(mut self, paper_id: impl Into<String>) -> Self {
        self.paper_id = Some(paper_id.into());
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn with_multiplicity(mut self, multiplicity: u64) -> Result<Self, ModelError> {
        if multiplicity == 0 {
            return Err(ModelError::ZeroMultiplicity);
        }
        self.multiplicity = multiplicity;
        Ok(self)
    }

    pub fn key(&self) -> TripleKey {
        TripleKey {
            subject: normalize_label(&self.subject),
            predicate: normalize_label(&self.predicate),
            object: normalize_label(&self.object),
        }
    }

    /// Checks the value invariants; useful for triples deserialized from JSON.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.subject.trim().is_empty() {
            return Err(ModelError::EmptyField("subject"));
        }
        if self.predicate.trim().is_empty() {
            return Err(ModelError::EmptyField("predicate"));
        }
        if self.object.trim().is_empty() {
            return Err(ModelError::EmptyField("object"));
        }
        if self.multiplicity == 0 {
            return Err(ModelError::ZeroMultiplicity);
        }
        Ok(())
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

/// Bibliographic record for one corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    pub year: i32,
    #[serde(default)]
    pub journal: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub institutions: Vec<String>,
}

/// Inclusive publication-year window for a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl Default for YearRange {
    fn default() -> Self {
        YearRange {
            first: 1996,
            last: 2019,
        }
    }
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

/// Injective map from canonical relation labels to short aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbbrevTable {
    entries: BTreeMap<String, String>,
    by_alias: HashMap<String, String>,
}

impl AbbrevTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, L, A>(pairs: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (L, A)>,
        L: AsRef<str>,
        A: AsRef<str>,
    {
        let mut table = Self::new();
        for (label, alias) in pairs {
            table.insert(label.as_ref(), alias.as_ref())?;
        }
        Ok(table)
    }

    /// Adds an entry. The label is normalized and the alias trimmed.
    /// Re-inserting an identical entry is a no-op.
    pub fn insert(&mut self, label: &str, alias: &str) -> Result<(), ModelError> {
        let label = normalize_label(label);
        let alias = alias.trim();
        if alias.is_empty() {
            return Err(ModelError::EmptyAlias { label });
        }
        if let Some(existing) = self.entries.get(&label) {
            if existing == alias {
                return Ok(());
            }
            return Err(ModelError::DuplicateLabel { label });
        }
        if let Some(owner) = self.by_alias.get(alias) {
            return Err(ModelError::AliasCollision {
                alias: alias.to_owned(),
                first: owner.clone(),
                second: label,
            });
        }
        self.by_alias.insert(alias.to_owned(), label.clone());
        self.entries.insert(label, alias.to_owned());
        Ok(())
    }

    /// Looks up the alias of an already-normalized label.
    pub fn get(&self, label: &str) -> Option<&str> {
        self.entries.get(label).map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }

    /// Reverse lookup used by the legend.
    pub fn label_for(&self, alias: &str) -> Option<&str> {
        self.by_alias.get(alias).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl Serialize for AbbrevTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AbbrevTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = BTreeMap::<String, String>::deserialize(deserializer)?;
        AbbrevTable::from_pairs(entries).map_err(serde::de::Error::custom)
    }
}

/// Curated variant → canonical relation label map.
///
/// Construction rejects self-mappings and chains, so a single lookup is
/// always final and applying the map twice equals applying it once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeMap {
    entries: BTreeMap<String, String>,
}

impl MergeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, V, C>(pairs: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (V, C)>,
        V: AsRef<str>,
        C: AsRef<str>,
    {
        let mut map = Self::new();
        for (variant, canonical) in pairs {
            map.insert(variant.as_ref(), canonical.as_ref())?;
        }
        Ok(map)
    }

    pub fn insert(&mut self, variant: &str, canonical: &str) -> Result<(), ModelError> {
        let variant = normalize_label(variant);
        let canonical = normalize_label(canonical);
        if variant.is_empty() || canonical.is_empty() {
            return Err(ModelError::EmptyField("merge map label"));
        }
        if variant == canonical {
            return Err(ModelError::MergeSelf { label: variant });
        }
        if let Some(existing) = self.entries.get(&variant) {
            if *existing == canonical {
                return Ok(());
            }
            return Err(ModelError::MergeConflict { variant });
        }
        // the new target must not be a variant, and the new variant must not
        // already be somebody's target
        if self.entries.contains_key(&canonical) || self.entries.values().any(|c| *c == variant) {
            return Err(ModelError::MergeChain { variant, canonical });
        }
        self.entries.insert(variant, canonical);
        Ok(())
    }

    /// The canonical form of `label`, or `label` itself when unmapped.
    pub fn resolve<'a>(&'a self, label: &'a str) -> &'a str {
        self.entries.get(label).map(String::as_str).unwrap_or(label)
    }

    pub fn get(&self, variant: &str) -> Option<&str> {
        self.entries.get(variant).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl Serialize for MergeMap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MergeMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = BTreeMap::<String, String>::deserialize(deserializer)?;
        MergeMap::from_pairs(entries).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_label("related-to"), "related to");
        assert_eq!(normalize_label("related to"), "related to");
        assert_eq!(normalize_label("  Influenced_By "), "influenced by");
        assert_eq!(normalize_label(""), "");
        assert_eq!(normalize_label(" - _ "), "");
        assert_eq!(normalize_label("a--b__c\t\nd"), "a b c d");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC*") {
            let once = normalize_label(&s);
            prop_assert_eq!(normalize_label(&once), once.clone());
        }

        #[test]
        fn normalize_output_shape(s in "[a-zA-Z _\\-\t]{0,40}") {
            let out = normalize_label(&s);
            prop_assert!(!out.chars().any(|c| c.is_uppercase()));
            prop_assert!(!out.contains('-') && !out.contains('_'));
            prop_assert!(!out.contains("  "));
            prop_assert_eq!(out.trim(), out.as_str());
        }

        #[test]
        fn normalize_output_is_lowercase_fixed_point(s in "\\PC*") {
            let out = normalize_label(&s);
            prop_assert_eq!(out.to_lowercase(), out);
        }
    }

    #[test]
    fn triplet_new_trims_and_normalizes() {
        let t = Triplet::new("  local governments ", "Favor", " investment").unwrap();
        assert_eq!(t.subject, "local governments");
        assert_eq!(t.predicate, "favor");
        assert_eq!(t.object, "investment");
        assert_eq!(t.multiplicity, 1);
        assert_eq!(
            Triplet::new(" ", "x", "y").unwrap_err(),
            ModelError::EmptyField("subject")
        );
        assert_eq!(
            Triplet::new("a", "--", "y").unwrap_err(),
            ModelError::EmptyField("predicate")
        );
        assert!(t.clone().with_multiplicity(0).is_err());
    }

    #[test]
    fn key_ignores_provenance_and_case() {
        let a = Triplet::new("Local Governments", "favor", "Investment")
            .unwrap()
            .with_paper("p1")
            .with_source("gpt-4o");
        let b = Triplet::new("local governments", "FAVOR", "investment").unwrap();
        assert_eq!(a.key(), b.key());
    }

    #[test]
    fn abbrev_table_rules() {
        let table = AbbrevTable::from_pairs([("influenced-by", "IFB")]).unwrap();
        assert_eq!(table.get("influenced by"), Some("IFB"));
        assert_eq!(table.label_for("IFB"), Some("influenced by"));

        let err = AbbrevTable::from_pairs([("a", "X"), ("b", "X")]).unwrap_err();
        assert_eq!(err.code(), "E_ALIAS_COLLISION");
        let err = AbbrevTable::from_pairs([("a", " ")]).unwrap_err();
        assert_eq!(err.code(), "E_EMPTY_ALIAS");
        let err = AbbrevTable::from_pairs([("a", "X"), ("A", "Y")]).unwrap_err();
        assert_eq!(err.code(), "E_DUP_LABEL");
        // identical repeat is tolerated
        assert_eq!(
            AbbrevTable::from_pairs([("a", "X"), ("A", "X")]).unwrap().len(),
            1
        );
    }

    #[test]
    fn abbrev_table_json_roundtrip() {
        let table = AbbrevTable::from_pairs([("favor", "FAV"), ("no", "NO")]).unwrap();
        let json = serde_json::to_string(&table).unwrap();
        assert_eq!(json, r#"{"favor":"FAV","no":"NO"}"#);
        let back: AbbrevTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
        assert!(serde_json::from_str::<AbbrevTable>(r#"{"a":"X","b":"X"}"#).is_err());
    }

    #[test]
    fn merge_map_rules() {
        let map = MergeMap::from_pairs([("not", "no")]).unwrap();
        assert_eq!(map.resolve("not"), "no");
        assert_eq!(map.resolve("no"), "no");

        let err = MergeMap::from_pairs([("a", "b"), ("b", "c")]).unwrap_err();
        assert_eq!(err.code(), "E_MERGE_CHAIN");
        let err = MergeMap::from_pairs([("b", "c"), ("a", "b")]).unwrap_err();
        assert_eq!(err.code(), "E_MERGE_CHAIN");
        let err = MergeMap::from_pairs([("related-to", "related to")]).unwrap_err();
        assert_eq!(err.code(), "E_MERGE_SELF");
        let err = MergeMap::from_pairs([("a", "b"), ("a", "c")]).unwrap_err();
        assert_eq!(err.code(), "E_MERGE_CONFLICT");
        // many variants onto one target is fine
        assert_eq!(
            MergeMap::from_pairs([("a", "z"), ("b", "z")]).unwrap().len(),
            2
        );
    }
}
