use std::collections::HashSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use kgatlas_core::extraction::{
    extract_triplets, filter_low_value, select_preferred_all, BackendDescriptor, ExtractionBackend, HttpBackend,
    LowValueLexicon, StubBackend,
};
use kgatlas_core::graph::{build_graph_with, filter_by_degree, GraphExport, GraphOptions, RadiusScale};
use kgatlas_core::ingest::{
    parse_abbreviations, parse_merge_map, parse_paper_metadata, parse_triplets, write_triplets,
    write_triplets_jsonl, IntegrityReport, MetadataOptions, ParseOptions,
};
use kgatlas_core::layout::{render_svg, run_layout, LayoutConfig, SvgOptions};
use kgatlas_core::preprocess::{
    propose_merge_candidates, relation_labels, run_pipeline, run_stages, write_frequency_table,
    write_merge_candidates, PipelineConfig, Stage,
};
use kgatlas_core::{AbbrevTable, GraphStats, KnowledgeGraph, MergeMap, Triplet};
use kgatlas_service::{AppState, Snapshot};

use crate::cli::*;
use crate::error::CliError;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Extract(args) => extract(args),
        Command::Preprocess(args) => preprocess(args),
        Command::Stats(args) => stats(args),
        Command::ExportJson(args) => export_json(args),
        Command::ExportSvg(args) => export_svg(args),
        Command::Serve(args) => serve(args),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

/// Runs `f` over `items`, on one thread per item when `parallel` is set.
/// Results come back in input order either way.
fn map_files<T, R, F>(items: &[T], parallel: bool, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, CliError> + Sync,
{
    if !parallel || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    thread::scope(|scope| {
        let handles: Vec<_> = items.iter().map(|item| scope.spawn(|| f(item))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Resolved {
    Delimited(u8),
    JsonLines,
    Export,
}

fn resolve(format: TableFormat, path: &Path) -> Resolved {
    match format {
        TableFormat::Csv => Resolved::Delimited(b','),
        TableFormat::Tsv => Resolved::Delimited(b'\t'),
        TableFormat::Jsonl => Resolved::JsonLines,
        TableFormat::Auto => {
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .unwrap_or("")
                .to_ascii_lowercase();
            match ext.as_str() {
                "tsv" | "tab" => Resolved::Delimited(b'\t'),
                "jsonl" | "ndjson" => Resolved::JsonLines,
                "json" => Resolved::Export,
                _ => Resolved::Delimited(b','),
            }
        }
    }
}

fn starts_with_header(bytes: &[u8], delimiter: u8, first: &str) -> bool {
    let line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let field = line.split(|&b| b == delimiter).next().unwrap_or_default();
    String::from_utf8_lossy(field)
        .trim()
        .trim_start_matches('\u{feff}')
        .trim_matches('"')
        .eq_ignore_ascii_case(first)
}

fn read_triples(path: &Path, table: &TableArgs) -> Result<(Vec<Triplet>, IntegrityReport), CliError> {
    let bytes = read(path)?;
    let options = match resolve(table.input_format, path) {
        Resolved::JsonLines => ParseOptions::json_lines(),
        Resolved::Delimited(d) => {
            let header = match table.header {
                HeaderMode::Yes => true,
                HeaderMode::No => false,
                HeaderMode::Auto => starts_with_header(&bytes, d, "subject"),
            };
            ParseOptions::delimited(d, header)
        }
        Resolved::Export => {
            return Err(CliError::Usage(format!(
                "{}: expected a triple file, not a graph export",
                path.display()
            )))
        }
    };
    let (triples, report) = parse_triplets(&bytes, &options).map_err(|e| CliError::from(e).within(path))?;
    for warning in &report.warnings {
        log::warn!("{}: {warning}", path.display());
    }
    Ok((triples, report))
}

fn read_table<T>(
    path: &Path,
    parse: impl Fn(&[u8], u8, bool) -> Result<T, kgatlas_core::ingest::IngestError>,
) -> Result<T, CliError> {
    let bytes = read(path)?;
    let delimiter = match resolve(TableFormat::Auto, path) {
        Resolved::Delimited(d) => d,
        _ => b',',
    };
    let header = starts_with_header(&bytes, delimiter, "label") || starts_with_header(&bytes, delimiter, "variant");
    parse(&bytes, delimiter, header).map_err(|e| CliError::from(e).within(path))
}

fn write_triple_file(path: &Path, format: TableFormat, triples: &[Triplet]) -> Result<(), CliError> {
    let bytes = match resolve(format, path) {
        Resolved::Delimited(d) => write_triplets(triples, d, true),
        Resolved::JsonLines => write_triplets_jsonl(triples),
        Resolved::Export => {
            return Err(CliError::Usage(format!(
                "{}: triples cannot be written as a graph export; use export-json",
                path.display()
            )))
        }
    };
    write(path, &bytes)
}

fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let backend: Box<dyn ExtractionBackend> = match args.backend {
        BackendKind::Stub => Box::new(StubBackend::default()),
        BackendKind::Http => {
            let endpoint = args
                .endpoint
                .clone()
                .ok_or_else(|| CliError::Usage("--endpoint is required with --backend http".into()))?;
            let descriptor = BackendDescriptor::new(
                args.backend_name.clone(),
                endpoint,
                Duration::from_secs(args.timeout_secs),
            )?;
            Box::new(HttpBackend::new(descriptor)?)
        }
    };
    let lexicon = match &args.lexicon {
        Some(path) => {
            let text = String::from_utf8(read(path)?)
                .map_err(|_| CliError::Usage(format!("{}: lexicon is not UTF-8", path.display())))?;
            LowValueLexicon::parse(&text)
        }
        None => LowValueLexicon::default(),
    };

    let known_papers: Option<HashSet<String>> = match &args.metadata {
        Some(path) => {
            let bytes = read(path)?;
            let options = MetadataOptions {
                has_header: starts_with_header(&bytes, b',', "paper_id"),
                ..Default::default()
            };
            let (records, warnings) =
                parse_paper_metadata(&bytes, &options).map_err(|e| CliError::from(e).within(path))?;
            for w in warnings {
                log::warn!("{}: {w}", path.display());
            }
            Some(records.into_iter().map(|r| r.paper_id).collect())
        }
        None => None,
    };

    let per_document = map_files(&args.inputs, args.parallel, |path: &PathBuf| {
        let text = String::from_utf8(read(path)?)
            .map_err(|_| CliError::Usage(format!("{}: document is not UTF-8", path.display())))?;
        let paper_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(known) = &known_papers {
            if !known.contains(&paper_id) {
                log::warn!("{}: paper id {paper_id:?} is not in the metadata table", path.display());
            }
        }
        let mut triples = extract_triplets(&text, backend.as_ref()).map_err(|e| CliError::from(e).within(path))?;
        for t in &mut triples {
            t.paper_id = Some(paper_id.clone());
        }
        if !args.keep_low_value {
            triples = filter_low_value(triples, &lexicon);
        }
        if args.prefer_concise {
            triples = select_preferred_all(&triples);
        }
        log::info!("{}: {} triples", path.display(), triples.len());
        Ok(triples)
    })?;

    let triples: Vec<Triplet> = per_document.into_iter().flatten().collect();
    write_triple_file(&args.output, args.output_format, &triples)?;
    println!("{} triples from {} documents", triples.len(), args.inputs.len());
    Ok(())
}

fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let merge_map = match &args.merge_map {
        Some(path) => read_table(path, parse_merge_map)?,
        None => MergeMap::new(),
    };
    let abbrev = match &args.abbreviations {
        Some(path) => read_table(path, parse_abbreviations)?,
        None => AbbrevTable::new(),
    };
    let config = PipelineConfig {
        min_relation_count: args.min_relation_count,
        long_tail_action: args.long_tail_action,
        other_label: args.other_label.clone(),
        similarity_threshold: args.similarity_threshold,
        merge_map,
        abbrev,
        second_consolidation_pass: args.second_consolidation_pass,
    };
    config.validate()?;
    Ok(config)
}

fn preprocess(args: PreprocessArgs) -> Result<(), CliError> {
    let config = pipeline_config(&args.pipeline)?;
    let parsed = map_files(&args.inputs, args.parallel, |path: &PathBuf| read_triples(path, &args.table))?;
    let mut triples = Vec::new();
    for (mut batch, _) in parsed {
        triples.append(&mut batch);
    }

    let candidates = propose_merge_candidates(relation_labels(&triples).into_keys(), config.similarity_threshold);
    let (cleaned, report) = match args.only_stage {
        Some(n) => run_stages(triples, &config, &[Stage::try_from(n)?])?,
        None => run_pipeline(triples, &config)?,
    };

    let ext = match resolve(args.output_format, Path::new("x.csv")) {
        Resolved::Delimited(b'\t') => "tsv",
        Resolved::JsonLines => "jsonl",
        _ => "csv",
    };
    let out = &args.out_dir;
    write_triple_file(&out.join(format!("triples.{ext}")), args.output_format, &cleaned)?;
    write(&out.join("report.json"), report.to_json().as_bytes())?;
    write(&out.join("frequency_before.csv"), &write_frequency_table(&report.frequency_before, b','))?;
    write(&out.join("frequency_after.csv"), &write_frequency_table(&report.frequency_after, b','))?;
    write(&out.join("merge_candidates.csv"), &write_merge_candidates(&candidates, b','))?;

    println!(
        "{} -> {} triples ({} duplicates folded), {} relation labels without abbreviation",
        report.input_triples, report.output_triples, report.duplicates_removed, report.labels_missing_abbrev
    );
    Ok(())
}

fn radius_scale(args: &GraphArgs) -> Result<RadiusScale, CliError> {
    if !(args.r_min >= 0.0 && args.r_min <= args.r_max && args.r_max.is_finite()) {
        return Err(CliError::Usage("radii must satisfy 0 <= --r-min <= --r-max".into()));
    }
    Ok(RadiusScale {
        r_min: args.r_min,
        r_max: args.r_max,
    })
}

/// Loads a triple file (building the graph) or a graph JSON export.
fn load_graph(args: &GraphArgs) -> Result<(KnowledgeGraph, AbbrevTable), CliError> {
    if !args.base_curvature.is_finite() {
        return Err(CliError::Usage("--base-curvature must be finite".into()));
    }
    let from_file = match &args.abbreviations {
        Some(path) => Some(read_table(path, parse_abbreviations)?),
        None => None,
    };
    if resolve(args.table.input_format, &args.input) == Resolved::Export {
        let bytes = read(&args.input)?;
        let export: GraphExport =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Export(e.to_string()).within(&args.input))?;
        let graph = KnowledgeGraph::from_export(&export).map_err(|e| CliError::from(e).within(&args.input))?;
        let abbrev = match from_file {
            Some(table) => table,
            None => {
                let mut table = AbbrevTable::new();
                for link in export.links.iter().filter(|l| !l.abbrev.is_empty()) {
                    table.insert(&link.relation, &link.abbrev)?;
                }
                table
            }
        };
        return Ok((graph, abbrev));
    }
    let (triples, _) = read_triples(&args.input, &args.table)?;
    let abbrev = from_file.unwrap_or_default();
    let options = GraphOptions {
        base_curvature: args.base_curvature,
    };
    let graph = build_graph_with(&triples, &abbrev, &options).map_err(|e| CliError::from(e).within(&args.input))?;
    Ok((graph, abbrev))
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let (graph, _) = load_graph(&args.graph)?;
    let graph = filter_by_degree(&graph, args.min_degree);
    let stats = GraphStats::compute(&graph);
    let mut out = std::io::stdout().lock();
    let result = if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats).expect("stats serialize"))
    } else {
        print_stats(&mut out, &stats)
    };
    match result {
        // `kgatlas stats | head` is fine
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn print_stats(out: &mut impl std::io::Write, stats: &GraphStats) -> std::io::Result<()> {
    writeln!(out, "nodes: {}", stats.node_count)?;
    writeln!(out, "edges: {}", stats.edge_count)?;
    writeln!(out, "max degree: {}", stats.max_degree)?;
    writeln!(out, "clustering coefficient: {:?}", stats.clustering_coefficient)?;
    writeln!(out, "degree distribution:")?;
    for (degree, count) in &stats.degree_distribution {
        writeln!(out, "  {degree}: {count}")?;
    }
    Ok(())
}

fn export_json(args: ExportJsonArgs) -> Result<(), CliError> {
    let scale = radius_scale(&args.graph)?;
    let (graph, abbrev) = load_graph(&args.graph)?;
    let snapshot = Snapshot::new(graph, abbrev, scale);
    let payload = snapshot.filtered(args.min_degree);
    let mut text = serde_json::to_string_pretty(&payload).expect("payload serializes");
    text.push('\n');
    write(&args.output, text.as_bytes())?;
    println!(
        "{} nodes, {} links written to {}",
        payload.graph.nodes.len(),
        payload.graph.links.len(),
        args.output.display()
    );
    Ok(())
}

fn layout_config(args: &LayoutArgs) -> Result<LayoutConfig, CliError> {
    let config = LayoutConfig {
        repulsion_strength: args.repulsion_strength,
        spring_rest_length: args.spring_rest_length,
        spring_stiffness: args.spring_stiffness,
        centering_strength: args.centering_strength,
        velocity_decay: args.velocity_decay,
        max_iterations: args.max_iterations,
        displacement_epsilon: args.displacement_epsilon,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

fn export_svg(args: ExportSvgArgs) -> Result<(), CliError> {
    let scale = radius_scale(&args.graph)?;
    let config = layout_config(&args.layout)?;
    if !(args.width > 0.0 && args.height > 0.0 && args.margin >= 0.0) {
        return Err(CliError::Usage("--width and --height must be positive, --margin non-negative".into()));
    }
    let (graph, _) = load_graph(&args.graph)?;
    let graph = filter_by_degree(&graph, args.min_degree);
    let outcome = run_layout(&graph, &config)?;
    if !outcome.converged {
        log::info!("layout stopped after {} iterations without settling", outcome.iterations);
    }
    let options = SvgOptions {
        show_labels: !args.no_labels,
        width: args.width,
        height: args.height,
        margin: args.margin,
        radius: scale,
    };
    let svg = render_svg(&graph, &outcome.positions, &options)?;
    write(&args.output, svg.as_bytes())?;
    println!(
        "{} nodes, {} edges, {} iterations{}",
        graph.node_count(),
        graph.edge_count(),
        outcome.iterations,
        if outcome.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let scale = radius_scale(&args.graph)?;
    let (graph, abbrev) = load_graph(&args.graph)?;
    if let Some(dir) = &args.ui_dir {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{}: not a directory", dir.display())));
        }
    }
    let state = AppState::new(Snapshot::new(graph, abbrev, scale), args.ui_dir.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::Serve)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.addr, args.port))
            .await
            .map_err(CliError::Serve)?;
        let addr = listener.local_addr().map_err(CliError::Serve)?;
        println!("serving on http://{addr}");
        let _ = std::io::stdout().flush();
        kgatlas_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(CliError::Serve)
    })
}
