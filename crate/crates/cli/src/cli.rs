use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgatlas_core::graph::DEFAULT_BASE_CURVATURE;
use kgatlas_core::preprocess::TailAction;

#[derive(Debug, Parser)]
#[command(name = "kgatlas", version, about = "Build and explore knowledge graphs from extracted triples")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Only log errors
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// JSON or TOML file with default values for any flag; flags on the
    /// command line win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract candidate triples from plain-text documents
    Extract(ExtractArgs),
    /// Clean a triple corpus: consolidate, merge, deduplicate, check abbreviations
    Preprocess(PreprocessArgs),
    /// Print degree distribution and clustering statistics
    Stats(StatsArgs),
    /// Write the graph payload served by /api/graph
    ExportJson(ExportJsonArgs),
    /// Lay the graph out and write a static SVG
    ExportSvg(ExportSvgArgs),
    /// Serve the HTTP API (and optionally the explorer bundle)
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    /// Pick from the file extension (.tsv, .jsonl, .json, otherwise csv)
    Auto,
    Csv,
    Tsv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeaderMode {
    /// Treat the first row as a header when it starts with "subject"
    Auto,
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Offline rule-based extractor
    Stub,
    /// JSON-over-HTTP extraction service
    Http,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Format of triple files
    #[arg(long, value_enum, default_value_t = TableFormat::Auto)]
    pub input_format: TableFormat,

    /// Header row handling for delimited files
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    pub header: HeaderMode,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Documents to read; the file stem becomes the paper id
    #[arg(required = true, value_name = "DOCUMENT")]
    pub inputs: Vec<PathBuf>,

    /// Output triple file
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,

    /// Output format
    #[arg(long, value_enum, default_value_t = TableFormat::Auto)]
    pub output_format: TableFormat,

    #[arg(long, value_enum, default_value_t = BackendKind::Stub)]
    pub backend: BackendKind,

    /// Endpoint URL for the http backend
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,

    /// Name recorded as the source of every triple from the http backend
    #[arg(long, default_value = "http")]
    pub backend_name: String,

    /// Request timeout for the http backend
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,

    /// Low-value term list, one term per line (replaces the built-in list)
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,

    /// Keep candidates whose subject or object is a low-value term
    #[arg(long)]
    pub keep_low_value: bool,

    /// Keep only the most concise object per (subject, relation)
    #[arg(long)]
    pub prefer_concise: bool,

    /// Paper metadata table used to check document ids and years
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,

    /// Process documents on separate threads (output order is unchanged)
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Relations with fewer occurrences form the long tail
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_relation_count: u64,

    /// What to do with long-tail relations: relabel or drop
    #[arg(long, default_value_t = TailAction::Relabel)]
    pub long_tail_action: TailAction,

    /// Label given to relabeled long-tail relations
    #[arg(long, default_value = "other")]
    pub other_label: String,

    /// Minimum similarity for a label pair to be proposed for merging
    #[arg(long, default_value_t = 0.6)]
    pub similarity_threshold: f64,

    /// Two-column variant,canonical file
    #[arg(long, value_name = "FILE")]
    pub merge_map: Option<PathBuf>,

    /// Two-column label,alias file
    #[arg(long, value_name = "FILE")]
    pub abbreviations: Option<PathBuf>,

    /// Consolidate again after merging
    #[arg(long)]
    pub second_consolidation_pass: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Triple files; multiple files are concatenated in the given order
    #[arg(required = true, value_name = "TRIPLES")]
    pub inputs: Vec<PathBuf>,

    /// Directory for the cleaned triples and the reports
    #[arg(short, long, value_name = "DIR")]
    pub out_dir: PathBuf,

    #[command(flatten)]
    pub table: TableArgs,

    /// Format of the cleaned triple file
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub output_format: TableFormat,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Run a single stage: 1 consolidate, 2 merge, 3 deduplicate, 4 abbreviation check
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u8).range(1..=4))]
    pub only_stage: Option<u8>,

    /// Parse input files on separate threads
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Cleaned triple file, or a graph JSON export
    #[arg(value_name = "INPUT")]
    pub input: PathBuf,

    #[command(flatten)]
    pub table: TableArgs,

    /// Two-column label,alias file
    #[arg(long, value_name = "FILE")]
    pub abbreviations: Option<PathBuf>,

    /// Curvature step between parallel edges
    #[arg(long, default_value_t = DEFAULT_BASE_CURVATURE)]
    pub base_curvature: f64,

    /// Radius of a degree-zero node
    #[arg(long, default_value_t = 4.0)]
    pub r_min: f64,

    /// Radius of the highest-degree node
    #[arg(long, default_value_t = 20.0)]
    pub r_max: f64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    /// Compute over the degree-filtered subgraph
    #[arg(long, default_value_t = 0)]
    pub min_degree: usize,

    /// Print JSON instead of text
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExportJsonArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,

    /// Drop nodes whose degree is below this
    #[arg(long, default_value_t = 0)]
    pub min_degree: usize,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[arg(long, default_value_t = 1000.0)]
    pub repulsion_strength: f64,

    #[arg(long, default_value_t = 60.0)]
    pub spring_rest_length: f64,

    #[arg(long, default_value_t = 0.08)]
    pub spring_stiffness: f64,

    #[arg(long, default_value_t = 0.05)]
    pub centering_strength: f64,

    #[arg(long, default_value_t = 0.4)]
    pub velocity_decay: f64,

    #[arg(long, default_value_t = 300)]
    pub max_iterations: usize,

    /// Stop once no node moves further than this in one step
    #[arg(long, default_value_t = 0.1)]
    pub displacement_epsilon: f64,

    /// Seed for the initial placement
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExportSvgArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,

    #[arg(long, default_value_t = 0)]
    pub min_degree: usize,

    #[command(flatten)]
    pub layout: LayoutArgs,

    #[arg(long, default_value_t = 960.0)]
    pub width: f64,

    #[arg(long, default_value_t = 720.0)]
    pub height: f64,

    #[arg(long, default_value_t = 40.0)]
    pub margin: f64,

    /// Leave out edge labels
    #[arg(long)]
    pub no_labels: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    /// Address to bind
    #[arg(long, env = kgatlas_service::ADDR_ENV, default_value = kgatlas_service::DEFAULT_ADDR)]
    pub addr: IpAddr,

    /// Port to bind (0 picks a free one)
    #[arg(long, env = kgatlas_service::PORT_ENV, default_value_t = kgatlas_service::DEFAULT_PORT)]
    pub port: u16,

    /// Directory with the built explorer bundle, served at /
    #[arg(long, value_name = "DIR")]
    pub ui_dir: Option<PathBuf>,
}
