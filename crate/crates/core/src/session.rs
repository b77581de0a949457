//! Persisted analysis sessions and the live, mutable state built from one.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::{DocumentTypeFilter, Fingerprint, ReferenceView};
use crate::reference::{ClusterConfig, ClusterId, ClusterTable, LedgerEntry, LedgerOp, MergeOutcome, NormalizerError, OverrideLedger};
use crate::spectrum::{Analysis, Derived, EraThresholdRule, MarkerSelection, PeakParams, PipelineConfig, SpectrumError, YearRange};

pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("session file line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported session version {0}")]
    Version(u32),
    #[error("session was saved for corpus {expected} but the loaded corpus is {found}")]
    FingerprintMismatch { expected: Fingerprint, found: Fingerprint },
    #[error(transparent)]
    Normalizer(#[from] NormalizerError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub clustering: ClusterConfig<f64>,
    pub peaks: PeakParams<i64>,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFilters {
    pub cutoff_year: Option<i32>,
    pub era_rules: Option<Vec<EraThresholdRule>>,
    pub year_range: Option<YearRange>,
    pub document_types: DocumentTypeFilter,
}

/// Everything needed to reproduce an analysis over one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSession {
    pub version: u32,
    pub session_id: String,
    pub corpus_fingerprint: Fingerprint,
    pub config: SessionConfig,
    pub ledger: OverrideLedger,
    pub filters: SessionFilters,
    #[serde(default)]
    pub markers: MarkerSelection,
}

impl AnalysisSession {
    pub fn new(fingerprint: Fingerprint, config: &PipelineConfig, created: DateTime<Utc>) -> Self {
        let mut hash = Sha256::new();
        hash.update(fingerprint.as_str());
        hash.update(created.timestamp_nanos_opt().unwrap_or_default().to_le_bytes());
        let digest = hash.finalize();
        let session_id = format!("s{}", hex(&digest[..8]));
        let mut session = AnalysisSession {
            version: SESSION_VERSION,
            session_id,
            corpus_fingerprint: fingerprint,
            config: SessionConfig {
                clustering: config.clustering,
                peaks: config.peaks,
                top_k: config.top_k,
            },
            ledger: OverrideLedger::new(),
            filters: SessionFilters {
                cutoff_year: None,
                era_rules: None,
                year_range: None,
                document_types: DocumentTypeFilter::default(),
            },
            markers: MarkerSelection::default(),
        };
        session.set_pipeline_config(config);
        session
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            cutoff_year: self.filters.cutoff_year,
            document_types: self.filters.document_types.clone(),
            clustering: self.config.clustering,
            era_rules: self.filters.era_rules.clone(),
            year_range: self.filters.year_range,
            peaks: self.config.peaks,
            top_k: self.config.top_k,
        }
    }

    pub fn set_pipeline_config(&mut self, config: &PipelineConfig) {
        self.config = SessionConfig {
            clustering: config.clustering,
            peaks: config.peaks,
            top_k: config.top_k,
        };
        self.filters = SessionFilters {
            cutoff_year: config.cutoff_year,
            era_rules: config.era_rules.clone(),
            year_range: config.year_range,
            document_types: config.document_types.clone(),
        };
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("session serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let session: AnalysisSession = serde_json::from_str(text).map_err(|e| SessionError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if session.version != SESSION_VERSION {
            return Err(SessionError::Version(session.version));
        }
        Ok(session)
    }

    /// Fails unless the session was saved for the corpus with `fingerprint`.
    pub fn check_fingerprint(&self, fingerprint: &Fingerprint) -> Result<(), SessionError> {
        if &self.corpus_fingerprint != fingerprint {
            return Err(SessionError::FingerprintMismatch {
                expected: self.corpus_fingerprint.clone(),
                found: fingerprint.clone(),
            });
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `path` through a temporary file in the same directory, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_session(session: &AnalysisSession, path: &Path) -> Result<(), SessionError> {
    let text = session.to_json();
    write_atomic(path, |w| w.write_all(text.as_bytes()))?;
    Ok(())
}

/// Reads a session file and checks it belongs to the corpus with
/// `fingerprint`.
pub fn load_session(path: &Path, fingerprint: &Fingerprint) -> Result<AnalysisSession, SessionError> {
    let text = fs::read_to_string(path)?;
    let session = AnalysisSession::from_json(&text)?;
    session.check_fingerprint(fingerprint)?;
    Ok(session)
}

/// Current time, or `SOURCE_DATE_EPOCH` when set so that scripted runs write
/// reproducible ledgers.
pub fn now() -> DateTime<Utc> {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| Utc.timestamp_opt(secs, 0).single())
        .unwrap_or_else(Utc::now)
}

/// The inputs of a derivation, detached from the live session so it can run
/// without holding any lock.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub generation: u64,
    pub analysis: Analysis,
    pub base: Arc<ReferenceView>,
    pub table: Arc<ClusterTable>,
    pub config: PipelineConfig,
    pub markers: MarkerSelection,
}

impl Snapshot {
    pub fn derive(&self) -> Result<Derived, SpectrumError> {
        self.analysis.derive(&self.base, &self.table, &self.config, &self.markers)
    }
}

/// A session applied to a corpus: the cluster table with the ledger
/// replayed, plus a cache of the derived spectrum that is dropped on every
/// change.
#[derive(Debug)]
pub struct LiveSession {
    analysis: Analysis,
    session: AnalysisSession,
    base: Arc<ReferenceView>,
    algorithmic: Arc<ClusterTable>,
    table: Arc<ClusterTable>,
    generation: u64,
    cache: Mutex<Option<(u64, Arc<Derived>)>>,
}

impl LiveSession {
    /// Clusters the corpus and replays the session ledger.
    pub fn open(analysis: Analysis, session: AnalysisSession) -> Result<Self, SessionError> {
        session.check_fingerprint(analysis.fingerprint())?;
        let config = session.pipeline_config();
        config.clustering.validate().map_err(SpectrumError::InvalidConfig)?;
        if let Some(rules) = &config.era_rules {
            crate::spectrum::check_disjoint(rules)?;
        }
        let base = analysis.base_view(&config);
        let algorithmic = analysis.cluster(&base, &config);
        let mut table = algorithmic.clone();
        session.ledger.replay(&mut table)?;
        Ok(LiveSession {
            analysis,
            session,
            base: Arc::new(base),
            algorithmic: Arc::new(algorithmic),
            table: Arc::new(table),
            generation: 0,
            cache: Mutex::new(None),
        })
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    pub fn session(&self) -> &AnalysisSession {
        &self.session
    }

    pub fn table(&self) -> &Arc<ClusterTable> {
        &self.table
    }

    pub fn base_view(&self) -> &Arc<ReferenceView> {
        &self.base
    }

    /// Bumped on every change to the ledger or the markers.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            generation: self.generation,
            analysis: self.analysis.clone(),
            base: self.base.clone(),
            table: self.table.clone(),
            config: self.session.pipeline_config(),
            markers: self.session.markers.clone(),
        }
    }

    /// The derived spectrum for the current state, computed at most once per
    /// generation.
    pub fn derived(&self) -> Result<Arc<Derived>, SpectrumError> {
        if let Some((generation, derived)) = &*self.cache.lock().expect("cache lock") {
            if *generation == self.generation {
                return Ok(derived.clone());
            }
        }
        let derived = Arc::new(self.snapshot().derive()?);
        *self.cache.lock().expect("cache lock") = Some((self.generation, derived.clone()));
        Ok(derived)
    }

    fn record(&mut self, op: LedgerOp, timestamp: DateTime<Utc>, note: &str) -> Result<(), NormalizerError> {
        let entry = LedgerEntry::new(op, timestamp, note);
        let table = Arc::make_mut(&mut self.table);
        self.session.ledger.record(table, entry)?;
        self.generation += 1;
        Ok(())
    }

    pub fn merge(&mut self, ids: &[ClusterId], timestamp: DateTime<Utc>, note: &str) -> Result<MergeOutcome, NormalizerError> {
        let mut probe = (*self.table).clone();
        let outcome = probe.merge(ids)?;
        if !outcome.noop {
            self.record(LedgerOp::Merge { cluster_ids: ids.to_vec() }, timestamp, note)?;
        }
        Ok(outcome)
    }

    pub fn split(
        &mut self,
        id: &ClusterId,
        partition: &[Vec<String>],
        timestamp: DateTime<Utc>,
        note: &str,
    ) -> Result<Vec<ClusterId>, NormalizerError> {
        let mut probe = (*self.table).clone();
        let parts = probe.split(id, partition)?;
        self.record(
            LedgerOp::Split {
                cluster_id: id.clone(),
                partition: partition.to_vec(),
            },
            timestamp,
            note,
        )?;
        Ok(parts)
    }

    pub fn correct_year(&mut self, id: &ClusterId, year: i32, timestamp: DateTime<Utc>, note: &str) -> Result<(), NormalizerError> {
        self.record(
            LedgerOp::YearCorrection {
                cluster_id: id.clone(),
                corrected_year: year,
            },
            timestamp,
            note,
        )
    }

    /// Replaces the marker selection. Ids are resolved against the live
    /// table first so unknown ids are rejected here.
    pub fn set_markers(&mut self, markers: MarkerSelection) -> Result<(), NormalizerError> {
        for id in &markers.cluster_ids {
            self.table.resolve(id)?;
        }
        self.session.markers = markers;
        self.generation += 1;
        Ok(())
    }

    pub fn clear_markers(&mut self) {
        self.session.markers = MarkerSelection::default();
        self.generation += 1;
    }

    /// Number of clusters before any ledger entry was applied.
    pub fn algorithmic_cluster_count(&self) -> usize {
        self.algorithmic.len()
    }
}
