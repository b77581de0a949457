use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use refspect_core::spectrum::{EraThresholdRule, MarkerMode, YearRange};

#[derive(Debug, Parser)]
#[command(name = "refspect", version, about = "Reference publication year spectroscopy (RPYS and RPYS-CO)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an export file, store it in the corpus cache and print statistics.
    Ingest(IngestArgs),
    /// Write the spectrum CSV (RPY,NCR,MEDIAN5,DEV).
    Spectrum(AnalysisArgs),
    /// Detect peaks in a spectrum and list the most cited clusters per peak.
    Peaks(PeaksArgs),
    /// Write the cluster table CSV.
    Clusters(AnalysisArgs),
    /// The most cited clusters of one reference publication year.
    Top(TopArgs),
    /// Spectrum of the records co-citing the marker references (RPYS-CO).
    Co(CoArgs),
    /// Merge clusters into one (ledger edit).
    Merge(MergeArgs),
    /// Split a cluster along a partition of its variants (ledger edit).
    Split(SplitArgs),
    /// Override the publication year of a cluster (ledger edit).
    CorrectYear(CorrectYearArgs),
    /// Create or inspect session files.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Run every stage and report the intermediate counts as JSON.
    Run(RunArgs),
    /// Start the HTTP/JSON service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Field-tagged export or three-column CSV.
    pub input: PathBuf,
    /// Cache entry name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Write the canonical CSV here instead of the cache.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cutoff used for the below-cutoff statistic.
    #[arg(long, default_value_t = 1971)]
    pub cutoff: i32,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus file, or the name of an ingested corpus in the cache.
    #[arg(long, short = 'c')]
    pub corpus: String,
    /// Session file supplying filters, clustering settings, ledger and markers.
    #[arg(long, conflicts_with = "ledger")]
    pub session: Option<PathBuf>,
    /// Override ledger (JSON Lines) to replay.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Keep references strictly older than this year.
    #[arg(long, conflicts_with = "no_cutoff")]
    pub cutoff: Option<i32>,
    /// Keep every dated reference.
    #[arg(long)]
    pub no_cutoff: bool,
    /// Spectrum range, START:END.
    #[arg(long)]
    pub range: Option<YearRange>,
    /// Era threshold START:END=MIN; repeatable, ranges must not overlap.
    #[arg(long = "min-ncr", value_name = "START:END=MIN")]
    pub min_ncr: Vec<EraThresholdRule>,
    /// `all`, `articles` (articles and reviews) or a comma-separated list.
    #[arg(long)]
    pub doc_types: Option<String>,
    /// Similarity threshold for variant clustering.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Years two variants may differ by and still be compared.
    #[arg(long)]
    pub year_tolerance: Option<u32>,
    /// Compare variants even when volume or page disagree.
    #[arg(long)]
    pub no_vol_page_gate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
    /// Output path; stdout when absent.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PeaksArgs {
    #[command(flatten)]
    pub corpus: Option<CorpusArgs>,
    #[command(flatten)]
    pub filters: FilterArgs,
    /// Read the spectrum from a CSV instead of a corpus.
    #[arg(long, conflicts_with = "corpus")]
    pub spectrum: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_deviation: i64,
    /// Keep at most this many peaks.
    #[arg(long)]
    pub max: Option<usize>,
    /// Clusters listed per peak.
    #[arg(long, short = 'k', default_value_t = 5)]
    pub top: usize,
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[arg(long)]
    pub year: i32,
    #[arg(short = 'k', long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct CoArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Cluster id or AUTHOR/RPY/SOURCE-PREFIX matcher; repeatable.
    #[arg(long, required = true)]
    pub marker: Vec<String>,
    /// Combine markers with `or` (any) or `and` (all).
    #[arg(long, default_value = "or")]
    pub mode: MarkerMode,
}

#[derive(Debug, Clone, Args)]
pub struct EditArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
    #[arg(long, default_value = "")]
    pub note: String,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    /// Cluster ids or marker-style matchers.
    #[arg(required = true, num_args = 2..)]
    pub ids: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    pub id: String,
    /// One block of the partition as a JSON array of raw variant strings;
    /// repeat for every block.
    #[arg(long = "part", required = true)]
    pub parts: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CorrectYearArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    pub id: String,
    pub year: i32,
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Write a session file from the given corpus, filters and ledger.
    Save(SessionSaveArgs),
    /// Check a session file against a corpus and summarize it.
    Load(SessionLoadArgs),
}

#[derive(Debug, Args)]
pub struct SessionSaveArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Marker cluster ids or matchers to store with the session.
    #[arg(long)]
    pub marker: Vec<String>,
    #[arg(long, default_value = "or")]
    pub mode: MarkerMode,
}

#[derive(Debug, Args)]
pub struct SessionLoadArgs {
    #[arg(long, short = 'c')]
    pub corpus: String,
    #[arg(long)]
    pub session: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Also write the spectrum CSV here.
    #[arg(long)]
    pub spectrum_out: Option<PathBuf>,
    /// Also write the cluster CSV here.
    #[arg(long)]
    pub clusters_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, short = 'c')]
    pub corpus: String,
    /// Session file to resume, and the default target of POST /session/save.
    #[arg(long)]
    pub session: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[command(flatten)]
    pub filters: FilterArgs,
}
