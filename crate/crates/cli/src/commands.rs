use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use refspect_core::export::{read_spectrum_csv, write_clusters_csv, write_peaks_csv, write_spectrum_csv};
use refspect_core::ingest::{
    corpus_stats, read_corpus_file, CitingRecord, Corpus, DocumentTypeFilter, InputFormat, ReferenceIndex,
};
use refspect_core::reference::{ClusterId, OverrideLedger};
use refspect_core::session::{
    load_session, now, save_session, write_atomic, AnalysisSession, LiveSession, SessionError,
};
use refspect_core::spectrum::{
    cluster_rows, detect_peaks, peak_reports, run_standard_pipeline, top_references_for_year, Analysis, Derived,
    MarkerMode, MarkerSelection, PeakParams, PeakReport, PipelineConfig,
};

use crate::args::*;
use crate::marker;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or arguments; exit code 1.
    User(String),
    /// Something broke on our side or in the environment; exit code 2.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Io(_) => internal(e),
            _ => user(e),
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Peaks(a) => peaks(a),
        Command::Clusters(a) => clusters(a),
        Command::Top(a) => top(a),
        Command::Co(a) => co(a),
        Command::Merge(a) => merge(a),
        Command::Split(a) => split(a),
        Command::CorrectYear(a) => correct_year(a),
        Command::Session(SessionCommand::Save(a)) => session_save(a),
        Command::Session(SessionCommand::Load(a)) => session_load(a),
        Command::Run(a) => pipeline(a),
        Command::Serve(a) => serve(a),
    }
}

/// `REFSPECT_CACHE_DIR`, else `$HOME/.cache/refspect`.
pub fn cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("REFSPECT_CACHE_DIR") {
        return PathBuf::from(dir);
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join(".cache").join("refspect")
}

fn write_output(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, write).map_err(|e| internal(format!("{}: {e}", path.display()))),
        None => {
            let stdout = io::stdout();
            let mut lock = io::BufWriter::new(stdout.lock());
            write(&mut lock).and_then(|_| lock.flush()).map_err(internal)
        }
    }
}

/// Reads a corpus from a path, or from the cache when `spec` names an
/// ingested corpus. Skipped records are reported on stderr.
fn load_corpus(spec: &str) -> Result<Corpus> {
    let direct = PathBuf::from(spec);
    let path = if direct.exists() {
        direct
    } else {
        let cached = cache_dir().join(format!("{spec}.csv"));
        if !cached.exists() {
            return Err(user(format!("no corpus file `{spec}` and no cache entry {}", cached.display())));
        }
        cached
    };
    let (format, mut ingested) = read_corpus_file(&path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    if !ingested.diagnostics.is_empty() {
        eprintln!("refspect: skipped {} malformed record(s) in {}", ingested.diagnostics.len(), path.display());
    }
    if format == InputFormat::Csv {
        read_types_sidecar(&path, &mut ingested.records)?;
    }
    let (corpus, _) = ingested.into_corpus().map_err(user)?;
    Ok(corpus)
}

/// The CSV corpus format has no document type column, so `ingest` keeps
/// the types next to the CSV as `<stem>.types.tsv` (record id, tab, type).
fn types_sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("types.tsv")
}

fn write_types_sidecar(csv: &Path, corpus: &Corpus) -> Result<()> {
    let path = types_sidecar(csv);
    let typed: Vec<_> = corpus
        .records()
        .iter()
        .filter(|r| !r.document_type.is_empty() && !r.document_type.contains(['\t', '\n']))
        .collect();
    if typed.is_empty() {
        return match std::fs::remove_file(&path) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(internal(format!("{}: {e}", path.display()))),
            _ => Ok(()),
        };
    }
    write_atomic(&path, |w| {
        for r in typed {
            writeln!(w, "{}\t{}", r.record_id, r.document_type)?;
        }
        Ok(())
    })
    .map_err(|e| internal(format!("{}: {e}", path.display())))
}

fn read_types_sidecar(csv: &Path, records: &mut [CitingRecord]) -> Result<()> {
    let path = types_sidecar(csv);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(user(format!("{}: {e}", path.display()))),
    };
    let types: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once('\t')).collect();
    for r in records.iter_mut().filter(|r| r.document_type.is_empty()) {
        if let Some(t) = types.get(r.record_id.as_str()) {
            r.document_type = t.to_string();
        }
    }
    Ok(())
}

fn apply_filters(config: &mut PipelineConfig, f: &FilterArgs) -> Result<()> {
    if f.no_cutoff {
        config.cutoff_year = None;
    } else if let Some(c) = f.cutoff {
        config.cutoff_year = Some(c);
    }
    if let Some(r) = f.range {
        config.year_range = Some(r);
    }
    if !f.min_ncr.is_empty() {
        refspect_core::spectrum::check_disjoint(&f.min_ncr).map_err(user)?;
        config.era_rules = Some(f.min_ncr.clone());
    }
    if let Some(types) = &f.doc_types {
        config.document_types = match types.trim().to_ascii_lowercase().as_str() {
            "all" => DocumentTypeFilter::All,
            "articles" => DocumentTypeFilter::ArticlesAndReviews,
            _ => DocumentTypeFilter::Only(types.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()),
        };
    }
    if let Some(t) = f.threshold {
        config.clustering.threshold = t;
    }
    if let Some(t) = f.year_tolerance {
        config.clustering.year_tolerance = t;
    }
    if f.no_vol_page_gate {
        config.clustering.require_vol_page_match = false;
    }
    config.clustering.validate().map_err(user)?;
    Ok(())
}

fn read_ledger(path: &Path) -> Result<OverrideLedger> {
    let file = File::open(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    OverrideLedger::read_jsonl(BufReader::new(file)).map_err(|e| user(format!("{}: {e}", path.display())))
}

/// The session a command works on: from `--session`, or assembled from the
/// flags and `--ledger`. Explicit flags override session settings.
fn open_live(corpus_args: &CorpusArgs, filters: &FilterArgs) -> Result<LiveSession> {
    let analysis = Analysis::new(load_corpus(&corpus_args.corpus)?);
    let mut session = match &corpus_args.session {
        Some(path) => load_session(path, analysis.fingerprint())
            .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?,
        None => AnalysisSession::new(analysis.fingerprint().clone(), &PipelineConfig::default(), now()),
    };
    let mut config = session.pipeline_config();
    apply_filters(&mut config, filters)?;
    session.set_pipeline_config(&config);
    if let Some(path) = &corpus_args.ledger {
        if path.exists() {
            session.ledger = read_ledger(path)?;
        }
    }
    LiveSession::open(analysis, session).map_err(CliError::from)
}

fn derived(live: &LiveSession) -> Result<std::sync::Arc<Derived>> {
    live.derived().map_err(user)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (format, ingested) = read_corpus_file(&a.input).map_err(|e| user(format!("{}: {e}", a.input.display())))?;
    for d in &ingested.diagnostics {
        eprintln!("{}: {d}", a.input.display());
    }
    let skipped = ingested.diagnostics.len();
    let (corpus, _) = ingested.into_corpus().map_err(user)?;
    let target = match a.out {
        Some(p) => p,
        None => {
            let name = a
                .name
                .or_else(|| a.input.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .ok_or_else(|| user("cannot derive a cache name; pass --name"))?;
            let dir = cache_dir();
            std::fs::create_dir_all(&dir).map_err(|e| internal(format!("{}: {e}", dir.display())))?;
            dir.join(format!("{name}.csv"))
        }
    };
    write_atomic(&target, |w| corpus.write_csv(w).map_err(io::Error::other))
        .map_err(|e| internal(format!("{}: {e}", target.display())))?;
    write_types_sidecar(&target, &corpus)?;
    eprintln!("refspect: wrote {}", target.display());

    let index = ReferenceIndex::build(&corpus);
    let stats = corpus_stats(&corpus, &index, a.cutoff);
    let opt = |v: Option<i32>| v.map(|y| y.to_string()).unwrap_or_else(|| "-".into());
    write_output(None, |w| {
        writeln!(w, "format\t{}", match format {
            InputFormat::FieldTagged => "field-tagged",
            InputFormat::Csv => "csv",
        })?;
        writeln!(w, "fingerprint\t{}", corpus.fingerprint())?;
        writeln!(w, "records_skipped\t{skipped}")?;
        writeln!(w, "citing_records\t{}", stats.num_citing_records)?;
        writeln!(w, "reference_instances\t{}", stats.num_reference_instances)?;
        writeln!(w, "reference_instances_below_cutoff\t{}", stats.num_reference_instances_below_cutoff)?;
        writeln!(w, "reference_instances_without_rpy\t{}", stats.num_reference_instances_without_rpy)?;
        writeln!(w, "distinct_references\t{}", stats.num_distinct_references)?;
        writeln!(w, "min_rpy\t{}", opt(stats.min_rpy))?;
        writeln!(w, "max_rpy\t{}", opt(stats.max_rpy))
    })
}

fn spectrum(a: AnalysisArgs) -> Result<()> {
    let live = open_live(&a.corpus, &a.filters)?;
    let d = derived(&live)?;
    write_output(a.out.as_deref(), |w| write_spectrum_csv(&d.spectrum, w))
}

fn peaks(a: PeaksArgs) -> Result<()> {
    if a.min_deviation < 0 {
        return Err(user("--min-deviation must be at least 0"));
    }
    let params = PeakParams {
        min_deviation: a.min_deviation,
        max_peaks: a.max,
    };
    let reports: Vec<PeakReport> = match (&a.spectrum, &a.corpus) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
            let spectrum = read_spectrum_csv(BufReader::new(file)).map_err(|e| user(format!("{}: {e}", path.display())))?;
            detect_peaks(&spectrum, &params)
                .into_iter()
                .map(|p| PeakReport {
                    rpy: p.rpy,
                    deviation: p.deviation,
                    ncr_total: p.ncr,
                    top_clusters: Vec::new(),
                })
                .collect()
        }
        (None, Some(corpus)) => {
            let live = open_live(corpus, &a.filters)?;
            let d = derived(&live)?;
            let found = detect_peaks(&d.spectrum, &params);
            peak_reports(&found, live.table(), &d.counts, &d.selection, a.top)
        }
        (None, None) => return Err(user("peaks needs --corpus or --spectrum")),
    };
    write_output(a.out.as_deref(), |w| write_peaks_csv(&reports, w))
}

fn clusters(a: AnalysisArgs) -> Result<()> {
    let live = open_live(&a.corpus, &a.filters)?;
    let d = derived(&live)?;
    let rows = cluster_rows(live.table(), &d.counts, &d.selection);
    write_output(a.out.as_deref(), |w| write_clusters_csv(&rows, w))
}

fn top(a: TopArgs) -> Result<()> {
    if a.k == 0 {
        return Err(user("-k must be at least 1"));
    }
    let live = open_live(&a.analysis.corpus, &a.analysis.filters)?;
    let d = derived(&live)?;
    let ranked = top_references_for_year(live.table(), &d.counts, &d.selection, a.year, a.k);
    let mut by_id: HashMap<ClusterId, _> = cluster_rows(live.table(), &d.counts, &d.selection)
        .into_iter()
        .map(|r| (r.cluster_id.clone(), r))
        .collect();
    let rows: Vec<_> = ranked.iter().filter_map(|r| by_id.remove(&r.cluster_id)).collect();
    write_output(a.analysis.out.as_deref(), |w| write_clusters_csv(&rows, w))
}

fn resolve_markers(live: &LiveSession, specs: &[String], mode: MarkerMode) -> Result<MarkerSelection> {
    let mut ids = Vec::new();
    for spec in specs {
        ids.push(marker::resolve(live.table(), spec).map_err(user)?);
    }
    Ok(MarkerSelection { cluster_ids: ids, mode })
}

fn co(a: CoArgs) -> Result<()> {
    let mut live = open_live(&a.analysis.corpus, &a.analysis.filters)?;
    let markers = resolve_markers(&live, &a.marker, a.mode)?;
    live.set_markers(markers).map_err(user)?;
    let d = derived(&live)?;
    for id in &d.markers_without_citers {
        eprintln!("refspect: marker {id} is cited by no record; the reduced corpus is empty");
    }
    write_output(a.analysis.out.as_deref(), |w| write_spectrum_csv(&d.spectrum, w))
}

/// Opens the edit target, applies `edit` and writes the session or ledger
/// back.
fn edit(args: &EditArgs, apply: impl FnOnce(&mut LiveSession) -> Result<String>) -> Result<()> {
    if args.corpus.session.is_none() && args.corpus.ledger.is_none() {
        return Err(user("ledger edits need --session or --ledger to record into"));
    }
    let mut live = open_live(&args.corpus, &args.filters)?;
    let message = apply(&mut live)?;
    if let Some(path) = &args.corpus.session {
        save_session(live.session(), path)?;
    }
    if let Some(path) = &args.corpus.ledger {
        write_atomic(path, |w| live.session().ledger.write_jsonl(w)).map_err(|e| internal(format!("{}: {e}", path.display())))?;
    }
    println!("{message}");
    Ok(())
}

fn merge(a: MergeArgs) -> Result<()> {
    let note = a.edit.note.clone();
    edit(&a.edit, |live| {
        let mut ids = Vec::new();
        for spec in &a.ids {
            ids.push(marker::resolve(live.table(), spec).map_err(user)?);
        }
        let outcome = live.merge(&ids, now(), &note).map_err(user)?;
        if outcome.noop {
            eprintln!("refspect: all ids already name {}; nothing recorded", outcome.cluster_id);
        }
        Ok(outcome.cluster_id.to_string())
    })
}

fn split(a: SplitArgs) -> Result<()> {
    let mut partition = Vec::new();
    for part in &a.parts {
        let block: Vec<String> =
            serde_json::from_str(part).map_err(|e| user(format!("--part must be a JSON array of strings ({e}): {part}")))?;
        partition.push(block);
    }
    let note = a.edit.note.clone();
    edit(&a.edit, |live| {
        let id = marker::resolve(live.table(), &a.id).map_err(user)?;
        let parts = live.split(&id, &partition, now(), &note).map_err(user)?;
        Ok(parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("\n"))
    })
}

fn correct_year(a: CorrectYearArgs) -> Result<()> {
    let note = a.edit.note.clone();
    edit(&a.edit, |live| {
        let id = marker::resolve(live.table(), &a.id).map_err(user)?;
        live.correct_year(&id, a.year, now(), &note).map_err(user)?;
        Ok(id.to_string())
    })
}

fn session_save(a: SessionSaveArgs) -> Result<()> {
    let out = a.analysis.out.clone().ok_or_else(|| user("session save needs --out"))?;
    let mut live = open_live(&a.analysis.corpus, &a.analysis.filters)?;
    if !a.marker.is_empty() {
        let markers = resolve_markers(&live, &a.marker, a.mode)?;
        live.set_markers(markers).map_err(user)?;
    }
    derived(&live)?;
    save_session(live.session(), &out)?;
    eprintln!("refspect: wrote {}", out.display());
    Ok(())
}

fn session_load(a: SessionLoadArgs) -> Result<()> {
    let analysis = Analysis::new(load_corpus(&a.corpus)?);
    let session = load_session(&a.session, analysis.fingerprint())
        .map_err(|e| CliError::User(format!("{}: {e}", a.session.display())))?;
    let live = LiveSession::open(analysis, session)?;
    let d = derived(&live)?;
    let s = live.session();
    write_output(None, |w| {
        writeln!(w, "session_id\t{}", s.session_id)?;
        writeln!(w, "corpus_fingerprint\t{}", s.corpus_fingerprint)?;
        writeln!(w, "ledger_entries\t{}", s.ledger.len())?;
        writeln!(w, "clusters\t{}", live.table().len())?;
        writeln!(w, "markers\t{}", s.markers.cluster_ids.len())?;
        writeln!(w, "spectrum_years\t{}", d.spectrum.points().len())
    })
}

fn pipeline(a: RunArgs) -> Result<()> {
    let live = open_live(&a.analysis.corpus, &a.analysis.filters)?;
    let session = live.session();
    let out = run_standard_pipeline(live.analysis(), &session.pipeline_config(), &session.ledger, &session.markers)
        .map_err(user)?;
    if let Some(path) = &a.spectrum_out {
        write_output(Some(path), |w| write_spectrum_csv(&out.derived.spectrum, w))?;
    }
    if let Some(path) = &a.clusters_out {
        let rows = cluster_rows(&out.table, &out.derived.counts, &out.derived.selection);
        write_output(Some(path), |w| write_clusters_csv(&rows, w))?;
    }
    let text = serde_json::to_string_pretty(&out.stages).map_err(internal)?;
    write_output(a.analysis.out.as_deref(), |w| writeln!(w, "{text}"))
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut config = PipelineConfig::default();
    apply_filters(&mut config, &a.filters)?;
    let corpus = PathBuf::from(&a.corpus);
    let corpus = if corpus.exists() {
        corpus
    } else {
        cache_dir().join(format!("{}.csv", a.corpus))
    };
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    runtime
        .block_on(refspect_service::serve(refspect_service::ServeConfig {
            bind: a.bind,
            corpus_path: corpus,
            session_path: a.session,
            pipeline: config,
        }))
        .map_err(user)
}
