use std::fs;
use std::path::PathBuf;

use kgatlas_core::ingest::{parse_abbreviations, parse_merge_map, parse_triplets, write_triplets, ParseOptions};
use kgatlas_core::preprocess::{run_pipeline, PipelineConfig};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/golden")
        .join(name)
}

fn read(name: &str) -> Vec<u8> {
    fs::read(golden(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn golden_fixture_matches_oracle_output() {
    let (triples, integrity) =
        parse_triplets(&read("triples.csv"), &ParseOptions::delimited(b',', false)).unwrap();
    assert_eq!(triples.len(), 50);
    assert_eq!(integrity.rows_rejected, 0);

    let config = PipelineConfig {
        merge_map: parse_merge_map(&read("merge_map.csv"), b',', false).unwrap(),
        abbrev: parse_abbreviations(&read("abbreviations.csv"), b',', false).unwrap(),
        ..Default::default()
    };
    let (cleaned, report) = run_pipeline(triples, &config).unwrap();

    let expected_report = String::from_utf8(read("expected_report.json")).unwrap();
    assert_eq!(report.to_json(), expected_report);

    let expected_triples = String::from_utf8(read("expected_triples.csv")).unwrap();
    let written = String::from_utf8(write_triplets(&cleaned, b',', true)).unwrap();
    assert_eq!(written, expected_triples);
}

#[test]
fn golden_fixture_is_stable_across_runs() {
    let run = || {
        let (triples, _) =
            parse_triplets(&read("triples.csv"), &ParseOptions::delimited(b',', false)).unwrap();
        let config = PipelineConfig {
            merge_map: parse_merge_map(&read("merge_map.csv"), b',', false).unwrap(),
            ..Default::default()
        };
        let (cleaned, report) = run_pipeline(triples, &config).unwrap();
        (write_triplets(&cleaned, b',', true), report.to_json())
    };
    assert_eq!(run(), run());
}
