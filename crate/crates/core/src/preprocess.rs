//! The four-stage cleaning pipeline.
//!
//! 1. rare-relation consolidation
//! 2. curated label merging (with similarity-based proposals for review)
//! 3. exact-match deduplication that keeps multiplicity
//! 4. abbreviation validation
//!
//! Every stage is a pure function over a triple list; [`run_pipeline`]
//! chains them and fills a [`PipelineReport`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::check_integrity;
use crate::model::{AbbrevTable, MergeMap, TripleKey, Triplet};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("min_relation_count must be at least 1")]
    MinCount,
    #[error("similarity_threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("other_label is empty")]
    OtherLabel,
    #[error("stage {0} does not exist (expected 1-4)")]
    Stage(u8),
}

impl PreprocessError {
    pub fn code(&self) -> &'static str {
        "E_CONFIG"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailAction {
    Drop,
    #[default]
    Relabel,
}

impl FromStr for TailAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop" => Ok(TailAction::Drop),
            "relabel" => Ok(TailAction::Relabel),
            other => Err(format!("unknown action {other:?} (expected drop or relabel)")),
        }
    }
}

impl fmt::Display for TailAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailAction::Drop => "drop",
            TailAction::Relabel => "relabel",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub min_relation_count: u64,
    pub long_tail_action: TailAction,
    pub other_label: String,
    pub similarity_threshold: f64,
    pub merge_map: MergeMap,
    pub abbrev: AbbrevTable,
    pub second_consolidation_pass: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            min_relation_count: 3,
            long_tail_action: TailAction::Relabel,
            other_label: "other".to_owned(),
            similarity_threshold: 0.6,
            merge_map: MergeMap::new(),
            abbrev: AbbrevTable::new(),
            second_consolidation_pass: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.min_relation_count < 1 {
            return Err(PreprocessError::MinCount);
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(PreprocessError::Threshold(self.similarity_threshold));
        }
        if crate::model::normalize_label(&self.other_label).is_empty() {
            return Err(PreprocessError::OtherLabel);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCount {
    pub relation: String,
    pub count: u64,
}

/// Multiplicity-weighted relation frequencies, most frequent first.
pub fn relation_frequencies(triples: &[Triplet]) -> Vec<RelationCount> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in triples {
        *counts.entry(t.predicate.as_str()).or_default() += t.multiplicity;
    }
    let mut table: Vec<RelationCount> = counts
        .into_iter()
        .map(|(relation, count)| RelationCount {
            relation: relation.to_owned(),
            count,
        })
        .collect();
    table.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.relation.cmp(&b.relation)));
    table
}

/// Writes a frequency table as `relation,count` lines.
pub fn write_frequency_table(table: &[RelationCount], delimiter: u8) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in table {
        writer
            .write_record([row.relation.as_str(), row.count.to_string().as_str()])
            .expect("write to Vec cannot fail");
    }
    writer.into_inner().expect("flush to Vec cannot fail")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidationReport {
    /// Distinct relation labels below the threshold.
    pub relations: usize,
    /// Triple records that were dropped or relabeled.
    pub triples: usize,
    /// Multiplicity mass of those records.
    pub weight: u64,
}

/// Relabels (or drops) every triple whose relation has a weighted count
/// below `min_count`. Order of the remaining triples is unchanged.
pub fn consolidate_rare_relations(
    triples: Vec<Triplet>,
    min_count: u64,
    action: TailAction,
    other_label: &str,
) -> (Vec<Triplet>, ConsolidationReport) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in &triples {
        *counts.entry(t.predicate.as_str()).or_default() += t.multiplicity;
    }
    let tail: HashSet<String> = counts
        .into_iter()
        .filter(|&(label, count)| {
            count < min_count && !(action == TailAction::Relabel && label == other_label)
        })
        .map(|(label, _)| label.to_owned())
        .collect();

    let mut report = ConsolidationReport {
        relations: tail.len(),
        ..Default::default()
    };
    if tail.is_empty() {
        return (triples, report);
    }

    let mut out = Vec::with_capacity(triples.len());
    for mut t in triples {
        if tail.contains(&t.predicate) {
            report.triples += 1;
            report.weight += t.multiplicity;
            match action {
                TailAction::Drop => continue,
                TailAction::Relabel => t.predicate = other_label.to_owned(),
            }
        }
        out.push(t);
    }
    (out, report)
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)`, with two empty strings scoring 1.
pub fn label_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeCandidate {
    pub label_a: String,
    pub label_b: String,
    pub score: f64,
}

/// Every unordered pair of distinct labels whose similarity reaches
/// `threshold`, best first. The result is for human review only.
pub fn propose_merge_candidates<I, S>(labels: I, threshold: f64) -> Vec<MergeCandidate>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut unique: Vec<String> = labels.into_iter().map(|s| s.as_ref().to_owned()).collect();
    unique.sort();
    unique.dedup();

    let mut out = Vec::new();
    for (i, a) in unique.iter().enumerate() {
        for b in &unique[i + 1..] {
            let score = label_similarity(a, b);
            if score >= threshold {
                out.push(MergeCandidate {
                    label_a: a.clone(),
                    label_b: b.clone(),
                    score,
                });
            }
        }
    }
    out.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.label_a.cmp(&y.label_a))
            .then_with(|| x.label_b.cmp(&y.label_b))
    });
    out
}

/// Writes the review file: `label_a,label_b,score` with six decimals.
pub fn write_merge_candidates(candidates: &[MergeCandidate], delimiter: u8) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(["label_a", "label_b", "score"])
        .expect("write to Vec cannot fail");
    for c in candidates {
        writer
            .write_record([
                c.label_a.as_str(),
                c.label_b.as_str(),
                format!("{:.6}", c.score).as_str(),
            ])
            .expect("write to Vec cannot fail");
    }
    writer.into_inner().expect("flush to Vec cannot fail")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    /// Distinct variant labels that occurred and were rewritten.
    pub relations: usize,
    pub triples: usize,
}

/// Rewrites predicates found as variant keys to their canonical label.
pub fn apply_merge_map(triples: Vec<Triplet>, merge_map: &MergeMap) -> Vec<Triplet> {
    apply_merge_map_with_report(triples, merge_map).0
}

pub fn apply_merge_map_with_report(
    mut triples: Vec<Triplet>,
    merge_map: &MergeMap,
) -> (Vec<Triplet>, MergeReport) {
    let mut report = MergeReport::default();
    if merge_map.is_empty() {
        return (triples, report);
    }
    let mut seen = HashSet::new();
    for t in &mut triples {
        if let Some(canonical) = merge_map.get(&t.predicate) {
            if seen.insert(t.predicate.clone()) {
                report.relations += 1;
            }
            report.triples += 1;
            t.predicate = canonical.to_owned();
        }
    }
    (triples, report)
}

/// Folds triples with equal normalized (subject, predicate, object) keys.
///
/// The first occurrence keeps its position and provenance; its multiplicity
/// becomes the sum over the key.
pub fn deduplicate(triples: Vec<Triplet>) -> Vec<Triplet> {
    let mut folded: IndexMap<TripleKey, Triplet> = IndexMap::with_capacity(triples.len());
    for t in triples {
        match folded.entry(t.key()) {
            indexmap::map::Entry::Occupied(mut slot) => {
                slot.get_mut().multiplicity += t.multiplicity;
            }
            indexmap::map::Entry::Vacant(slot) => {
                slot.insert(t);
            }
        }
    }
    folded.into_values().collect()
}

/// Per-stage counts plus before/after relation frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub input_triples: usize,
    pub input_weight: u64,
    pub relations_consolidated: usize,
    pub triples_consolidated: usize,
    pub relations_merged: usize,
    pub triples_merged: usize,
    /// Records entering deduplication minus records leaving it.
    pub duplicates_removed: usize,
    pub labels_missing_abbrev: usize,
    pub missing_abbreviations: Vec<String>,
    pub output_triples: usize,
    pub output_weight: u64,
    pub frequency_before: Vec<RelationCount>,
    pub frequency_after: Vec<RelationCount>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

fn weight(triples: &[Triplet]) -> u64 {
    triples.iter().map(|t| t.multiplicity).sum()
}

/// Stage selector for running a single step in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Consolidate,
    Merge,
    Deduplicate,
    Abbreviations,
}

impl TryFrom<u8> for Stage {
    type Error = PreprocessError;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Stage::Consolidate),
            2 => Ok(Stage::Merge),
            3 => Ok(Stage::Deduplicate),
            4 => Ok(Stage::Abbreviations),
            other => Err(PreprocessError::Stage(other)),
        }
    }
}

/// Runs all four stages in order, with an optional second consolidation
/// right after merging.
pub fn run_pipeline(
    triples: Vec<Triplet>,
    config: &PipelineConfig,
) -> Result<(Vec<Triplet>, PipelineReport), PreprocessError> {
    let mut stages = vec![Stage::Consolidate, Stage::Merge];
    if config.second_consolidation_pass {
        stages.push(Stage::Consolidate);
    }
    stages.extend([Stage::Deduplicate, Stage::Abbreviations]);
    run_stages(triples, config, &stages)
}

/// Runs the given stages in the given order and reports on them.
pub fn run_stages(
    triples: Vec<Triplet>,
    config: &PipelineConfig,
    stages: &[Stage],
) -> Result<(Vec<Triplet>, PipelineReport), PreprocessError> {
    config.validate()?;
    let other = crate::model::normalize_label(&config.other_label);
    let mut report = PipelineReport {
        input_triples: triples.len(),
        input_weight: weight(&triples),
        frequency_before: relation_frequencies(&triples),
        ..Default::default()
    };

    let mut current = triples;
    for stage in stages {
        match stage {
            Stage::Consolidate => {
                let (next, r) = consolidate_rare_relations(
                    current,
                    config.min_relation_count,
                    config.long_tail_action,
                    &other,
                );
                report.relations_consolidated += r.relations;
                report.triples_consolidated += r.triples;
                current = next;
            }
            Stage::Merge => {
                let (next, r) = apply_merge_map_with_report(current, &config.merge_map);
                report.relations_merged += r.relations;
                report.triples_merged += r.triples;
                current = next;
            }
            Stage::Deduplicate => {
                let before = current.len();
                current = deduplicate(current);
                report.duplicates_removed += before - current.len();
            }
            Stage::Abbreviations => {
                let integrity = check_integrity(&current, &config.abbrev);
                report.labels_missing_abbrev = integrity.missing_abbreviations.len();
                report.missing_abbreviations = integrity.missing_abbreviations;
            }
        }
    }

    report.output_triples = current.len();
    report.output_weight = weight(&current);
    report.frequency_after = relation_frequencies(&current);
    Ok((current, report))
}

/// Distinct relation labels with their weighted counts, sorted by label.
pub fn relation_labels(triples: &[Triplet]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for t in triples {
        *out.entry(t.predicate.clone()).or_default() += t.multiplicity;
    }
    out
}
