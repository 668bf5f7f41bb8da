//! Candidate triple extraction.
//!
//! A backend turns document text into candidate triples. [`HttpBackend`] talks
//! to any model server speaking the JSON protocol below; [`StubBackend`] is an
//! offline, rule-based stand-in used by tests and demos.
//!
//! ```text
//! POST <endpoint>   {"document": "..."}
//! 200 OK            {"triples": [{"subject": "...", "predicate": "...", "object": "..."}]}
//! ```
//!
//! Candidates are then cleaned with [`filter_low_value`] and collapsed with
//! [`select_preferred`].

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_label, Triplet};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("document is empty")]
    EmptyDoc,
    #[error("backend {backend:?} failed: {message}")]
    Backend { backend: String, message: String },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("cannot select from an empty group")]
    EmptyGroup,
    #[error("group members do not share subject and predicate: {0}")]
    MixedGroup(String),
}

impl ExtractError {
    pub fn code(&self) -> &'static str {
        match self {
            ExtractError::EmptyDoc => "E_EMPTY_DOC",
            ExtractError::Backend { .. } => "E_BACKEND",
            ExtractError::Config(_) => "E_BACKEND_CONFIG",
            ExtractError::EmptyGroup => "E_EMPTY_GROUP",
            ExtractError::MixedGroup(_) => "E_MIXED_GROUP",
        }
    }
}

/// Something that proposes triples for a document.
pub trait ExtractionBackend: Send + Sync {
    fn name(&self) -> &str;

    fn candidates(&self, document: &str) -> Result<Vec<Triplet>, ExtractError>;
}

/// Runs `backend` on `document` and tags every candidate with the backend name.
pub fn extract_triplets(
    document: &str,
    backend: &dyn ExtractionBackend,
) -> Result<Vec<Triplet>, ExtractError> {
    if document.trim().is_empty() {
        return Err(ExtractError::EmptyDoc);
    }
    let mut triples = backend.candidates(document)?;
    for t in &mut triples {
        t.source = Some(backend.name().to_owned());
    }
    Ok(triples)
}

/// Where and how to reach a remote extraction engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub endpoint: String,
    pub timeout: Duration,
}

impl BackendDescriptor {
    pub fn new(
        name: impl Into<String>,
        endpoint: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, ExtractError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(ExtractError::Config("backend name is empty".into()));
        }
        if timeout.is_zero() {
            return Err(ExtractError::Config("timeout must be positive".into()));
        }
        Ok(BackendDescriptor {
            name,
            endpoint: endpoint.into(),
            timeout,
        })
    }
}

#[derive(Serialize)]
struct ExtractRequest<'a> {
    document: &'a str,
}

#[derive(Deserialize)]
struct ExtractResponse {
    triples: Vec<WireTriple>,
}

#[derive(Deserialize)]
struct WireTriple {
    subject: String,
    predicate: String,
    object: String,
}

/// JSON-over-HTTP backend.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    descriptor: BackendDescriptor,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, ExtractError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(descriptor.timeout)
            .build()
            .map_err(|e| ExtractError::Config(e.to_string()))?;
        Ok(HttpBackend { descriptor, client })
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn fail(&self, message: impl Into<String>) -> ExtractError {
        ExtractError::Backend {
            backend: self.descriptor.name.clone(),
            message: message.into(),
        }
    }
}

impl ExtractionBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.descriptor.name
    }

    fn candidates(&self, document: &str) -> Result<Vec<Triplet>, ExtractError> {
        let response = self
            .client
            .post(&self.descriptor.endpoint)
            .json(&ExtractRequest { document })
            .send()
            .map_err(|e| self.fail(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(self.fail(format!("endpoint returned {status}")));
        }
        let body = response.bytes().map_err(|e| self.fail(e.to_string()))?;
        let parsed: ExtractResponse = serde_json::from_slice(&body)
            .map_err(|e| self.fail(format!("malformed response body: {e}")))?;
        let mut out = Vec::with_capacity(parsed.triples.len());
        for wire in parsed.triples {
            match Triplet::new(&wire.subject, &wire.predicate, &wire.object) {
                Ok(t) => out.push(t),
                Err(e) => log::warn!("{}: skipping candidate: {e}", self.descriptor.name),
            }
        }
        Ok(out)
    }
}

const DEFAULT_RELATIONS: &[&str] = &[
    "influenced by",
    "related to",
    "leads to",
    "favor",
    "favors",
    "supports",
    "opposes",
    "influences",
    "shapes",
    "drives",
    "affects",
    "promotes",
    "constrains",
    "mediates",
    "causes",
];

const LEADING_DETERMINERS: &[&str] = &["the", "a", "an"];
const TRAILING_AUXILIARIES: &[&str] = &["is", "are", "was", "were", "be", "been"];

#[derive(Debug, Clone)]
enum StubMode {
    Fixed(Vec<Triplet>),
    Rules(Vec<Vec<String>>),
}

/// Deterministic offline backend.
///
/// In rule mode every sentence is scanned for the first known relation
/// phrase; the words before it become the subject and the words after it
/// the object.
#[derive(Debug, Clone)]
pub struct StubBackend {
    name: String,
    mode: StubMode,
}

impl Default for StubBackend {
    fn default() -> Self {
        Self::with_relations(DEFAULT_RELATIONS.iter().copied())
    }
}

impl StubBackend {
    pub const NAME: &'static str = "stub";

    /// Emits exactly `triples` for every document.
    pub fn fixed(triples: Vec<Triplet>) -> Self {
        StubBackend {
            name: Self::NAME.to_owned(),
            mode: StubMode::Fixed(triples),
        }
    }

    pub fn with_relations<I, S>(relations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut patterns: Vec<Vec<String>> = relations
            .into_iter()
            .map(|r| {
                normalize_label(r.as_ref())
                    .split(' ')
                    .map(str::to_owned)
                    .collect::<Vec<_>>()
            })
            .filter(|p| !p.is_empty() && !p[0].is_empty())
            .collect();
        // longer phrases win when two start at the same word
        patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        patterns.dedup();
        StubBackend {
            name: Self::NAME.to_owned(),
            mode: StubMode::Rules(patterns),
        }
    }

    fn rule_candidates(patterns: &[Vec<String>], document: &str) -> Vec<Triplet> {
        let mut out = Vec::new();
        for sentence in document.split(['.', '!', '?', ';', '\n']) {
            let words: Vec<&str> = sentence.split_whitespace().collect();
            let keys: Vec<String> = words.iter().map(|w| word_key(w)).collect();
            let hit = (1..keys.len()).find_map(|start| {
                patterns
                    .iter()
                    .find(|p| keys[start..].starts_with(p))
                    .map(|p| (start, p.len()))
            });
            let Some((start, len)) = hit else { continue };
            let mut subject_words = &words[..start];
            while let Some(first) = subject_words.first() {
                if LEADING_DETERMINERS.contains(&word_key(first).as_str()) {
                    subject_words = &subject_words[1..];
                } else {
                    break;
                }
            }
            while let Some(last) = subject_words.last() {
                if TRAILING_AUXILIARIES.contains(&word_key(last).as_str()) {
                    subject_words = &subject_words[..subject_words.len() - 1];
                } else {
                    break;
                }
            }
            let subject = join_clean(subject_words);
            let object = join_clean(&words[start + len..]);
            let predicate = keys[start..start + len].join(" ");
            if let Ok(t) = Triplet::new(&subject, &predicate, &object) {
                out.push(t);
            }
        }
        out
    }
}

fn word_key(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric() && c != '-')
        .to_lowercase()
}

fn join_clean(words: &[&str]) -> String {
    let joined = words.join(" ");
    joined
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_owned()
}

impl ExtractionBackend for StubBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn candidates(&self, document: &str) -> Result<Vec<Triplet>, ExtractError> {
        Ok(match &self.mode {
            StubMode::Fixed(triples) => triples.clone(),
            StubMode::Rules(patterns) => Self::rule_candidates(patterns, document),
        })
    }
}

/// Normalized terms that carry no structure when they appear as an entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowValueLexicon {
    terms: BTreeSet<String>,
}

const DEFAULT_LOW_VALUE: &[&str] = &[
    "result",
    "results",
    "study",
    "studies",
    "this study",
    "paper",
    "this paper",
    "article",
    "finding",
    "findings",
];

impl Default for LowValueLexicon {
    fn default() -> Self {
        Self::from_terms(DEFAULT_LOW_VALUE.iter().copied())
    }
}

impl LowValueLexicon {
    pub fn empty() -> Self {
        LowValueLexicon {
            terms: BTreeSet::new(),
        }
    }

    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms = terms
            .into_iter()
            .map(|t| normalize_label(t.as_ref()))
            .filter(|t| !t.is_empty())
            .collect();
        LowValueLexicon { terms }
    }

    /// One term per line; blank lines are ignored.
    pub fn parse(input: &str) -> Self {
        Self::from_terms(input.lines())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(&normalize_label(term))
    }

    pub fn insert(&mut self, term: &str) {
        let term = normalize_label(term);
        if !term.is_empty() {
            self.terms.insert(term);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Drops candidates whose subject or object is a low-value term. Order of
/// the survivors is preserved.
pub fn filter_low_value(candidates: Vec<Triplet>, lexicon: &LowValueLexicon) -> Vec<Triplet> {
    candidates
        .into_iter()
        .filter(|t| !lexicon.contains(&t.subject) && !lexicon.contains(&t.object))
        .collect()
}

fn preference(a: &(usize, String, &Triplet), b: &(usize, String, &Triplet)) -> Ordering {
    a.0.cmp(&b.0)
        .then_with(|| a.1.cmp(&b.1))
        // remaining keys only make the choice independent of input order
        .then_with(|| a.2.object.cmp(&b.2.object))
        .then_with(|| a.2.subject.cmp(&b.2.subject))
        .then_with(|| a.2.paper_id.cmp(&b.2.paper_id))
        .then_with(|| a.2.source.cmp(&b.2.source))
        .then_with(|| a.2.multiplicity.cmp(&b.2.multiplicity))
}

/// Picks the most concise member of a group of near-duplicate candidates:
/// fewest object tokens, then the lexicographically smallest normalized object.
pub fn select_preferred(group: &[Triplet]) -> Result<Triplet, ExtractError> {
    let first = group.first().ok_or(ExtractError::EmptyGroup)?;
    let subject = normalize_label(&first.subject);
    let predicate = normalize_label(&first.predicate);
    let mut best: Option<(usize, String, &Triplet)> = None;
    for t in group {
        if normalize_label(&t.subject) != subject || normalize_label(&t.predicate) != predicate {
            return Err(ExtractError::MixedGroup(format!("{first} vs {t}")));
        }
        let object = normalize_label(&t.object);
        let candidate = (object.split_whitespace().count(), object, t);
        if best
            .as_ref()
            .map_or(true, |b| preference(&candidate, b) == Ordering::Less)
        {
            best = Some(candidate);
        }
    }
    Ok(best.expect("group is non-empty").2.clone())
}

/// Groups candidates by normalized (subject, predicate) in first-seen order
/// and keeps the preferred member of each group.
pub fn select_preferred_all(candidates: &[Triplet]) -> Vec<Triplet> {
    let mut groups: IndexMap<(String, String), Vec<Triplet>> = IndexMap::new();
    for t in candidates {
        groups
            .entry((normalize_label(&t.subject), normalize_label(&t.predicate)))
            .or_default()
            .push(t.clone());
    }
    groups
        .values()
        .map(|g| select_preferred(g).expect("groups are non-empty and homogeneous"))
        .collect()
}
