//! Corpus ingest: field-tagged exports, the three-column CSV format, the
//! reference index built over a corpus, and filtered reference views.

mod csv;
mod record;
mod tagged;
mod view;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::csv::{parse_csv_corpus, write_csv_corpus, CSV_HEADER};
pub use self::record::{
    year_in_bounds, CitingRecord, Corpus, DocumentTypeFilter, Fingerprint, MAX_YEAR, MIN_YEAR,
};
pub use self::tagged::parse_field_tagged_export;
pub use self::view::{apply_rpy_cutoff, corpus_stats, CorpusStats, RefId, ReferenceIndex, ReferenceView, ViewRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV header must be `{expected}`, found `{found}`")]
    CsvHeader { expected: &'static str, found: String },
    #[error("CSV error: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Why a record or row was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "code", content = "detail")]
pub enum DiagnosticReason {
    MissingPublicationYear,
    InvalidPublicationYear(String),
    MissingRecordId,
    DuplicateRecordId(String),
    TruncatedRecord,
    UnexpectedContinuation,
    MalformedLine(String),
    StrayEndOfRecord,
    InvalidCitingYear(String),
    ConflictingCitingYear(String),
    MalformedRow(String),
}

impl DiagnosticReason {
    pub fn code(&self) -> &'static str {
        match self {
            DiagnosticReason::MissingPublicationYear => "missing_publication_year",
            DiagnosticReason::InvalidPublicationYear(_) => "invalid_publication_year",
            DiagnosticReason::MissingRecordId => "missing_record_id",
            DiagnosticReason::DuplicateRecordId(_) => "duplicate_record_id",
            DiagnosticReason::TruncatedRecord => "truncated_record",
            DiagnosticReason::UnexpectedContinuation => "unexpected_continuation",
            DiagnosticReason::MalformedLine(_) => "malformed_line",
            DiagnosticReason::StrayEndOfRecord => "stray_end_of_record",
            DiagnosticReason::InvalidCitingYear(_) => "invalid_citing_year",
            DiagnosticReason::ConflictingCitingYear(_) => "conflicting_citing_year",
            DiagnosticReason::MalformedRow(_) => "malformed_row",
        }
    }
}

/// A skipped record or row, located by byte offset and 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub byte_offset: u64,
    pub line: u64,
    pub reason: DiagnosticReason,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} (byte {}): {}", self.line, self.byte_offset, self.reason.code())?;
        match &self.reason {
            DiagnosticReason::InvalidPublicationYear(s)
            | DiagnosticReason::DuplicateRecordId(s)
            | DiagnosticReason::MalformedLine(s)
            | DiagnosticReason::InvalidCitingYear(s)
            | DiagnosticReason::ConflictingCitingYear(s)
            | DiagnosticReason::MalformedRow(s) => write!(f, " ({s})"),
            _ => Ok(()),
        }
    }
}

/// Parser output: the records that survived plus what was skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ingested {
    pub records: Vec<CitingRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Ingested {
    pub fn into_corpus(self) -> Result<(Corpus, Vec<Diagnostic>), IngestError> {
        Ok((Corpus::new(self.records)?, self.diagnostics))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    FieldTagged,
    Csv,
}

/// Sniffs the format from the first bytes: the CSV header, or anything else
/// as a field-tagged export.
pub fn detect_format(head: &[u8]) -> InputFormat {
    let head = head.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(head);
    if head.starts_with(CSV_HEADER.as_bytes()) {
        InputFormat::Csv
    } else {
        InputFormat::FieldTagged
    }
}

pub fn parse_reader<R: Read>(reader: R, format: InputFormat) -> Result<Ingested, IngestError> {
    match format {
        InputFormat::FieldTagged => parse_field_tagged_export(BufReader::with_capacity(1 << 16, reader)),
        InputFormat::Csv => parse_csv_corpus(reader),
    }
}

/// Opens a corpus file of either format, detecting which from its content.
pub fn read_corpus_file(path: impl AsRef<Path>) -> Result<(InputFormat, Ingested), IngestError> {
    let mut reader = BufReader::with_capacity(1 << 16, File::open(path.as_ref())?);
    let format = detect_format(reader.fill_buf()?);
    Ok((format, parse_reader(reader, format)?))
}
