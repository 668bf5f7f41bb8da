//! Readers and writers for the on-disk formats, plus load-time integrity checks.
//!
//! Triple files are either delimited text (comma by default, standard quoting,
//! columns `subject, predicate, object[, paper_id[, source[, multiplicity]]]`)
//! or JSON lines with the same keys. A malformed row is rejected and counted in
//! the [`IntegrityReport`]; only an undecodable stream fails the whole parse.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AbbrevTable, MergeMap, ModelError, PaperRecord, Triplet, YearRange};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is not valid UTF-8 (first invalid byte at offset {offset})")]
    Encoding { offset: usize },
    #[error("line {line}: expected at least {expected} fields, found {found}")]
    RowArity {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    BadRecord { line: u64, message: String },
    #[error("line {line}: {source}")]
    Model {
        line: u64,
        #[source]
        source: ModelError,
    },
    #[error("paper id {0:?} appears more than once")]
    DupPaperId(String),
    #[error("paper {paper_id:?} has year {year}, outside {first}-{last}")]
    YearRange {
        paper_id: String,
        year: i32,
        first: i32,
        last: i32,
    },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Encoding { .. } => "E_ENCODING",
            IngestError::RowArity { .. } => "E_ROW_ARITY",
            IngestError::BadRecord { .. } => "E_BAD_RECORD",
            IngestError::Model { source, .. } => source.code(),
            IngestError::DupPaperId(_) => "E_DUP_PAPER_ID",
            IngestError::YearRange { .. } => "E_YEAR_RANGE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordFormat {
    #[default]
    Delimited,
    JsonLines,
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delimited" | "csv" | "tsv" => Ok(RecordFormat::Delimited),
            "json-lines" | "jsonl" | "ndjson" => Ok(RecordFormat::JsonLines),
            other => Err(format!(
                "unknown format {other:?} (expected delimited or json-lines)"
            )),
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordFormat::Delimited => "delimited",
            RecordFormat::JsonLines => "json-lines",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub format: RecordFormat,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            format: RecordFormat::Delimited,
            delimiter: b',',
            has_header: false,
        }
    }
}

impl ParseOptions {
    pub fn delimited(delimiter: u8, has_header: bool) -> Self {
        ParseOptions {
            format: RecordFormat::Delimited,
            delimiter,
            has_header,
        }
    }

    pub fn json_lines() -> Self {
        ParseOptions {
            format: RecordFormat::JsonLines,
            ..Default::default()
        }
    }
}

/// Findings from loading and checking a triple file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub missing_abbreviations: Vec<String>,
    pub warnings: Vec<String>,
    pub triples_read: usize,
    pub rows_rejected: usize,
}

impl IntegrityReport {
    /// Folds a later report into this one.
    pub fn absorb(&mut self, other: IntegrityReport) {
        let mut missing: BTreeSet<String> = self.missing_abbreviations.drain(..).collect();
        missing.extend(other.missing_abbreviations);
        self.missing_abbreviations = missing.into_iter().collect();
        self.warnings.extend(other.warnings);
        self.triples_read = self.triples_read.max(other.triples_read);
        self.rows_rejected += other.rows_rejected;
    }

    fn reject(&mut self, err: IngestError) {
        log::warn!("rejected row: {err}");
        self.warnings.push(format!("{}: {err}", err.code()));
        self.rows_rejected += 1;
    }
}

fn decode(input: &[u8]) -> Result<&str, IngestError> {
    std::str::from_utf8(input).map_err(|e| IngestError::Encoding {
        offset: e.valid_up_to(),
    })
}

fn optional(field: Option<&str>) -> Option<String> {
    field
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(str::to_owned)
}

fn parse_multiplicity(raw: Option<&str>, line: u64) -> Result<u64, IngestError> {
    match raw.map(str::trim).filter(|f| !f.is_empty()) {
        None => Ok(1),
        Some(text) => match text.parse::<u64>() {
            Ok(0) => Err(IngestError::Model {
                line,
                source: ModelError::ZeroMultiplicity,
            }),
            Ok(n) => Ok(n),
            Err(_) => Err(IngestError::BadRecord {
                line,
                message: format!("multiplicity {text:?} is not a positive integer"),
            }),
        },
    }
}

fn build_triplet(
    fields: [&str; 3],
    paper_id: Option<String>,
    source: Option<String>,
    multiplicity: u64,
    line: u64,
) -> Result<Triplet, IngestError> {
    let mut t = Triplet::new(fields[0], fields[1], fields[2])
        .map_err(|source| IngestError::Model { line, source })?;
    t.paper_id = paper_id;
    t.source = source;
    t.multiplicity = multiplicity;
    Ok(t)
}

fn delimited_reader(text: &str, delimiter: u8, has_header: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn record_line(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(fallback)
}

/// Parses a triple stream. Predicates are normalized, subject and object
/// trimmed. Bad rows are counted in the report instead of failing the parse.
pub fn parse_triplets(
    input: &[u8],
    options: &ParseOptions,
) -> Result<(Vec<Triplet>, IntegrityReport), IngestError> {
    let text = decode(input)?;
    let mut report = IntegrityReport::default();
    let mut triples = Vec::new();

    match options.format {
        RecordFormat::Delimited => {
            let mut reader = delimited_reader(text, options.delimiter, options.has_header);
            for (index, record) in reader.records().enumerate() {
                let fallback = index as u64 + 1;
                let record = match record {
                    Ok(r) => r,
                    Err(e) => {
                        report.reject(IngestError::BadRecord {
                            line: e.position().map(|p| p.line()).unwrap_or(fallback),
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                let line = record_line(&record, fallback);
                if record.len() < 3 {
                    report.reject(IngestError::RowArity {
                        line,
                        expected: 3,
                        found: record.len(),
                    });
                    continue;
                }
                let parsed = parse_multiplicity(record.get(5), line).and_then(|m| {
                    build_triplet(
                        [&record[0], &record[1], &record[2]],
                        optional(record.get(3)),
                        optional(record.get(4)),
                        m,
                        line,
                    )
                });
                match parsed {
                    Ok(t) => triples.push(t),
                    Err(e) => report.reject(e),
                }
            }
        }
        RecordFormat::JsonLines => {
            for (index, raw) in text.lines().enumerate() {
                let line = index as u64 + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                match parse_json_triplet(raw, line) {
                    Ok(t) => triples.push(t),
                    Err(e) => report.reject(e),
                }
            }
        }
    }

    report.triples_read = triples.len();
    Ok((triples, report))
}

#[derive(Deserialize)]
struct JsonTriplet {
    subject: Option<String>,
    predicate: Option<String>,
    object: Option<String>,
    #[serde(default)]
    paper_id: Option<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    multiplicity: Option<serde_json::Value>,
}

fn parse_json_triplet(raw: &str, line: u64) -> Result<Triplet, IngestError> {
    let rec: JsonTriplet = serde_json::from_str(raw).map_err(|e| IngestError::BadRecord {
        line,
        message: e.to_string(),
    })?;
    let (Some(s), Some(p), Some(o)) = (&rec.subject, &rec.predicate, &rec.object) else {
        let found = [&rec.subject, &rec.predicate, &rec.object]
            .iter()
            .filter(|f| f.is_some())
            .count();
        return Err(IngestError::RowArity {
            line,
            expected: 3,
            found,
        });
    };
    let multiplicity = match &rec.multiplicity {
        None | Some(serde_json::Value::Null) => 1,
        Some(serde_json::Value::Number(n)) => match n.as_u64() {
            Some(0) => {
                return Err(IngestError::Model {
                    line,
                    source: ModelError::ZeroMultiplicity,
                })
            }
            Some(n) => n,
            None => {
                return Err(IngestError::BadRecord {
                    line,
                    message: format!("multiplicity {n} is not a positive integer"),
                })
            }
        },
        Some(other) => parse_multiplicity(other.as_str(), line).or_else(|_| {
            Err(IngestError::BadRecord {
                line,
                message: format!("multiplicity {other} is not a positive integer"),
            })
        })?,
    };
    build_triplet(
        [s, p, o],
        optional(rec.paper_id.as_deref()),
        optional(rec.source.as_deref()),
        multiplicity,
        line,
    )
}

pub const TRIPLE_COLUMNS: [&str; 6] = [
    "subject",
    "predicate",
    "object",
    "paper_id",
    "source",
    "multiplicity",
];

/// Writes triples in the delimited format, always with all six columns.
pub fn write_triplets(triples: &[Triplet], delimiter: u8, header: bool) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if header {
        writer
            .write_record(TRIPLE_COLUMNS)
            .expect("write to Vec cannot fail");
    }
    for t in triples {
        let multiplicity = t.multiplicity.to_string();
        writer
            .write_record([
                t.subject.as_str(),
                t.predicate.as_str(),
                t.object.as_str(),
                t.paper_id.as_deref().unwrap_or(""),
                t.source.as_deref().unwrap_or(""),
                multiplicity.as_str(),
            ])
            .expect("write to Vec cannot fail");
    }
    writer.into_inner().expect("flush to Vec cannot fail")
}

/// Writes triples as JSON lines, one object per triple.
pub fn write_triplets_jsonl(triples: &[Triplet]) -> Vec<u8> {
    let mut out = Vec::new();
    for t in triples {
        serde_json::to_writer(&mut out, t).expect("serializing a triplet cannot fail");
        out.push(b'\n');
    }
    out
}

fn two_column_rows(
    input: &[u8],
    delimiter: u8,
    has_header: bool,
) -> Result<Vec<(u64, String, String)>, IngestError> {
    let text = decode(input)?;
    let mut reader = delimited_reader(text, delimiter, has_header);
    let mut rows = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let fallback = index as u64 + 1;
        let record = record.map_err(|e| IngestError::BadRecord {
            line: e.position().map(|p| p.line()).unwrap_or(fallback),
            message: e.to_string(),
        })?;
        let line = record_line(&record, fallback);
        if record.len() < 2 {
            return Err(IngestError::RowArity {
                line,
                expected: 2,
                found: record.len(),
            });
        }
        rows.push((line, record[0].to_owned(), record[1].to_owned()));
    }
    Ok(rows)
}

/// Parses a two-column `label, alias` table and validates it.
pub fn parse_abbreviations(
    input: &[u8],
    delimiter: u8,
    has_header: bool,
) -> Result<AbbrevTable, IngestError> {
    let mut table = AbbrevTable::new();
    for (line, label, alias) in two_column_rows(input, delimiter, has_header)? {
        table
            .insert(&label, &alias)
            .map_err(|source| IngestError::Model { line, source })?;
    }
    Ok(table)
}

/// Parses a two-column `variant, canonical` merge map and validates it.
pub fn parse_merge_map(
    input: &[u8],
    delimiter: u8,
    has_header: bool,
) -> Result<MergeMap, IngestError> {
    let mut map = MergeMap::new();
    for (line, variant, canonical) in two_column_rows(input, delimiter, has_header)? {
        map.insert(&variant, &canonical)
            .map_err(|source| IngestError::Model { line, source })?;
    }
    Ok(map)
}

/// Writes an abbreviation table as two-column delimited text.
pub fn write_abbreviations(table: &AbbrevTable, delimiter: u8) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for (label, alias) in table.iter() {
        writer
            .write_record([label, alias])
            .expect("write to Vec cannot fail");
    }
    writer.into_inner().expect("flush to Vec cannot fail")
}

/// Flags every distinct predicate that has no abbreviation.
///
/// Never fails: each missing label gets one warning and is listed once,
/// sorted, in `missing_abbreviations`.
pub fn check_integrity(triples: &[Triplet], abbrev: &AbbrevTable) -> IntegrityReport {
    let mut seen = HashSet::new();
    let mut missing = BTreeSet::new();
    for t in triples {
        if !seen.insert(t.predicate.as_str()) {
            continue;
        }
        let label = crate::model::normalize_label(&t.predicate);
        if !abbrev.contains(&label) {
            missing.insert(label);
        }
    }
    let warnings = missing
        .iter()
        .map(|label| {
            log::warn!("relation {label:?} has no abbreviation; flagged for manual inspection");
            format!("relation {label:?} has no abbreviation; flagged for manual inspection")
        })
        .collect();
    IntegrityReport {
        missing_abbreviations: missing.into_iter().collect(),
        warnings,
        triples_read: triples.len(),
        rows_rejected: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetadataOptions {
    pub format: RecordFormat,
    pub delimiter: u8,
    pub has_header: bool,
    pub years: YearRange,
    /// Out-of-range years are errors instead of warnings.
    pub strict: bool,
}

impl Default for MetadataOptions {
    fn default() -> Self {
        MetadataOptions {
            format: RecordFormat::Delimited,
            delimiter: b',',
            has_header: false,
            years: YearRange::default(),
            strict: false,
        }
    }
}

fn split_list(field: Option<&str>) -> Vec<String> {
    field
        .unwrap_or("")
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Parses paper metadata.
///
/// Delimited columns are `paper_id, title, year[, journal[, authors[, institutions]]]`
/// with `;` separating names inside the last two. Returns the records and any
/// year-range warnings.
pub fn parse_paper_metadata(
    input: &[u8],
    options: &MetadataOptions,
) -> Result<(Vec<PaperRecord>, Vec<String>), IngestError> {
    let text = decode(input)?;
    let mut records = Vec::new();

    match options.format {
        RecordFormat::Delimited => {
            let mut reader = delimited_reader(text, options.delimiter, options.has_header);
            for (index, record) in reader.records().enumerate() {
                let fallback = index as u64 + 1;
                let record = record.map_err(|e| IngestError::BadRecord {
                    line: e.position().map(|p| p.line()).unwrap_or(fallback),
                    message: e.to_string(),
                })?;
                let line = record_line(&record, fallback);
                if record.len() < 3 {
                    return Err(IngestError::RowArity {
                        line,
                        expected: 3,
                        found: record.len(),
                    });
                }
                let year = record[2]
                    .trim()
                    .parse::<i32>()
                    .map_err(|_| IngestError::BadRecord {
                        line,
                        message: format!("year {:?} is not an integer", &record[2]),
                    })?;
                records.push((
                    line,
                    PaperRecord {
                        paper_id: record[0].trim().to_owned(),
                        title: record[1].trim().to_owned(),
                        year,
                        journal: record.get(3).unwrap_or("").trim().to_owned(),
                        authors: split_list(record.get(4)),
                        institutions: split_list(record.get(5)),
                    },
                ));
            }
        }
        RecordFormat::JsonLines => {
            for (index, raw) in text.lines().enumerate() {
                let line = index as u64 + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                let rec: PaperRecord =
                    serde_json::from_str(raw).map_err(|e| IngestError::BadRecord {
                        line,
                        message: e.to_string(),
                    })?;
                records.push((line, rec));
            }
        }
    }

    let mut ids = HashSet::new();
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, rec) in records {
        if rec.paper_id.trim().is_empty() {
            return Err(IngestError::Model {
                line,
                source: ModelError::EmptyField("paper_id"),
            });
        }
        if !ids.insert(rec.paper_id.clone()) {
            return Err(IngestError::DupPaperId(rec.paper_id));
        }
        if !options.years.contains(rec.year) {
            let err = IngestError::YearRange {
                paper_id: rec.paper_id.clone(),
                year: rec.year,
                first: options.years.first,
                last: options.years.last,
            };
            if options.strict {
                return Err(err);
            }
            log::warn!("{err}");
            warnings.push(format!("{}: {err}", err.code()));
        }
        out.push(rec);
    }
    Ok((out, warnings))
}
