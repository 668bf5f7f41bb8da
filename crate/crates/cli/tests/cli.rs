use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kgatlas"));
    cmd.env_remove("KGATLAS_ADDR").env_remove("KGATLAS_PORT");
    cmd
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn preprocess_golden(out: &Path, extra: &[&str]) -> Output {
    let triples = fixture("golden/triples.csv");
    let merge = fixture("golden/merge_map.csv");
    let abbrev = fixture("golden/abbreviations.csv");
    let mut args = vec![
        "preprocess",
        path_str(&triples),
        "--merge-map",
        path_str(&merge),
        "--abbreviations",
        path_str(&abbrev),
        "-o",
        path_str(out),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn preprocess_reproduces_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = preprocess_golden(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let read = |p: PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(dir.path().join("report.json")), read(fixture("golden/expected_report.json")));
    assert_eq!(read(dir.path().join("triples.csv")), read(fixture("golden/expected_triples.csv")));
    for name in ["frequency_before.csv", "frequency_after.csv", "merge_candidates.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let candidates = text(&read(dir.path().join("merge_candidates.csv")));
    assert!(candidates.lines().any(|l| l.starts_with("no,not,")));
}

#[test]
fn single_stage_runs_in_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let out = preprocess_golden(dir.path(), &["--only-stage", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["relations_consolidated"], 0);
    assert_eq!(report["relations_merged"], 0);
    assert_eq!(report["labels_missing_abbrev"], 0);
    assert!(report["duplicates_removed"].as_u64().unwrap() > 0);

    let out = preprocess_golden(dir.path(), &["--only-stage", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("kgatlas.toml");
    std::fs::write(&config, "min_relation_count = 100\nlong_tail_action = \"drop\"\n").unwrap();

    let out_a = dir.path().join("a");
    let out = preprocess_golden(&out_a, &["--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = std::fs::read_to_string(out_a.join("report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["output_triples"], 0);

    let out_b = dir.path().join("b");
    let out = preprocess_golden(
        &out_b,
        &["--config", path_str(&config), "--min-relation-count", "3", "--long-tail-action", "relabel"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(
        std::fs::read(out_b.join("report.json")).unwrap(),
        std::fs::read(fixture("golden/expected_report.json")).unwrap()
    );

    std::fs::write(&config, "no_such_flag = 1\n").unwrap();
    let out = preprocess_golden(&out_b, &["--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("error[E_CONFIG]"));
}

#[test]
fn stats_on_triangle() {
    let out = run(&["stats", path_str(&fixture("triangle/triples.csv"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("clustering coefficient: 1.0"), "{}", text(&out.stdout));

    let out = run(&["stats", "--json", path_str(&fixture("triangle/triples.csv"))]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["clustering_coefficient"], 1.0);
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("E_USAGE") && err.contains("Usage:"), "{err}");

    let out = run(&["stats", "--no-such-flag", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn operation_errors_exit_1_with_code() {
    let out = run(&["stats", "/definitely/not/here.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).starts_with("error[E_IO]"));

    // raw, undeduplicated triples signal a skipped pipeline
    let out = run(&["stats", path_str(&fixture("golden/triples.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("error[E_DUPLICATE_TRIPLE]"), "{}", text(&out.stderr));
}

/// Every flag with a module default shows it, and the shown value matches.
#[test]
fn help_lists_defaults() {
    let expect = [
        ("preprocess", "--min-relation-count", "3"),
        ("preprocess", "--long-tail-action", "relabel"),
        ("preprocess", "--other-label", "other"),
        ("preprocess", "--similarity-threshold", "0.6"),
        ("export-svg", "--repulsion-strength", "1000"),
        ("export-svg", "--spring-rest-length", "60"),
        ("export-svg", "--spring-stiffness", "0.08"),
        ("export-svg", "--centering-strength", "0.05"),
        ("export-svg", "--velocity-decay", "0.4"),
        ("export-svg", "--max-iterations", "300"),
        ("export-svg", "--displacement-epsilon", "0.1"),
        ("export-svg", "--base-curvature", "0.15"),
        ("export-svg", "--r-min", "4"),
        ("export-svg", "--r-max", "20"),
        ("serve", "--port", "8080"),
        ("serve", "--addr", "127.0.0.1"),
    ];
    // value-taking options that are optional inputs rather than settings
    let no_default = [
        "--config", "--output", "--out-dir", "--endpoint", "--lexicon", "--metadata", "--merge-map",
        "--abbreviations", "--ui-dir", "--only-stage",
    ];
    let flag_of = |line: &str| {
        line.split_whitespace()
            .map(|w| w.trim_end_matches(','))
            .find(|w| w.starts_with("--"))
            .map(str::to_owned)
    };
    for sub in ["extract", "preprocess", "stats", "export-json", "export-svg", "serve"] {
        let out = run(&[sub, "-h"]);
        assert_eq!(out.status.code(), Some(0));
        let help = text(&out.stdout);
        // an option line plus its description, which clap may wrap onto the next line
        let lines: Vec<&str> = help.lines().collect();
        let blocks: Vec<String> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.trim_start().starts_with('-'))
            .map(|(i, l)| match lines.get(i + 1) {
                Some(next) if !next.trim_start().starts_with('-') => format!("{l} {}", next.trim()),
                _ => l.to_string(),
            })
            .collect();
        for block in blocks.iter().filter(|b| b.split_whitespace().take(3).any(|w| w.starts_with('<'))) {
            let flag = flag_of(block).unwrap();
            assert!(
                block.contains("[default: ") || no_default.contains(&flag.as_str()),
                "{sub}: {block}"
            );
        }
        for (s, flag, default) in expect.iter().filter(|e| e.0 == sub) {
            let block = blocks
                .iter()
                .find(|b| flag_of(b).as_deref() == Some(*flag))
                .unwrap_or_else(|| panic!("{s} {flag} missing"));
            assert!(block.contains(&format!("[default: {default}]")), "{block}");
        }
    }
}

#[test]
fn exports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(preprocess_golden(dir.path(), &[]).status.code(), Some(0));
    let cleaned = dir.path().join("triples.csv");
    let abbrev = fixture("golden/abbreviations.csv");
    let svg = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = run(&[
            "export-svg",
            path_str(&cleaned),
            "--abbreviations",
            path_str(&abbrev),
            "--seed",
            seed,
            "-o",
            path_str(&path),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        std::fs::read(path).unwrap()
    };
    assert_eq!(svg("a.svg", "5"), svg("b.svg", "5"));
    assert_ne!(svg("a.svg", "5"), svg("c.svg", "6"));

    let json = |name: &str| {
        let path = dir.path().join(name);
        let out = run(&["export-json", path_str(&cleaned), "-o", path_str(&path)]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let first = json("a.json");
    assert_eq!(first, json("b.json"));

    // a graph export can be loaded back in place of triples
    let out = run(&["stats", "--json", path_str(&dir.path().join("a.json"))]);
    let from_export: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let out = run(&["stats", "--json", path_str(&cleaned)]);
    let from_triples: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(from_export, from_triples);
}

#[test]
fn extract_with_stub_backend() {
    let dir = tempfile::tempdir().unwrap();
    let docs = ["docs/p101.txt", "docs/p102.txt"].map(fixture);
    let extract = |name: &str, parallel: bool| {
        let out_path = dir.path().join(name);
        let mut args = vec!["extract", path_str(&docs[0]), path_str(&docs[1]), "-o", path_str(&out_path)];
        if parallel {
            args.push("--parallel");
        }
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        std::fs::read_to_string(out_path).unwrap()
    };
    let serial = extract("serial.csv", false);
    assert_eq!(serial, extract("parallel.csv", true));
    assert!(serial.contains("Local governments,favor,infrastructure investment,p101,stub,1"));
    // "This study" is a low-value subject
    assert!(!serial.to_lowercase().contains("this study"));

    let out = run(&["extract", path_str(&docs[0]), "--backend", "http", "-o", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_answers_and_binds_from_env() {
    let mut child = bin()
        .args(["serve", path_str(&fixture("triangle/triples.csv"))])
        .env("KGATLAS_PORT", "0")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("serving on ").unwrap().to_owned();
    assert!(base.starts_with("http://127.0.0.1:"), "{base}");

    let health: serde_json::Value = reqwest::blocking::get(format!("{base}/healthz")).unwrap().json().unwrap();
    assert_eq!(health["nodes"], 3);
    let stats: serde_json::Value = reqwest::blocking::get(format!("{base}/api/stats")).unwrap().json().unwrap();
    assert_eq!(stats["clustering_coefficient"], 1.0);
    child.kill().unwrap();
    child.wait().unwrap();
}
