//! Core of kgatlas: turn extracted subject–predicate–object triples into an
//! explorable knowledge graph.
//!
//! The crate is organized along the data flow:
//!
//! - [`model`] shared value types and label normalization
//! - [`ingest`] parsers for triple, abbreviation, merge-map and metadata files
//! - [`extraction`] pluggable triple extraction backends and candidate filtering
//! - [`preprocess`] the four-stage cleaning pipeline
//! - [`graph`] the immutable multi-edge graph and its queries
//! - [`layout`] headless force-directed layout and SVG rendering

pub mod extraction;
pub mod graph;
pub mod ingest;
pub mod layout;
pub mod model;
pub mod preprocess;

pub use graph::{GraphStats, KnowledgeGraph, NodeId};
pub use model::{normalize_label, AbbrevTable, MergeMap, PaperRecord, Triplet};
