use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;

/// Earliest publication year accepted anywhere in the engine.
pub const MIN_YEAR: i32 = 1000;
/// Latest publication year accepted anywhere in the engine.
pub const MAX_YEAR: i32 = 2100;

pub fn year_in_bounds(year: i32) -> bool {
    (MIN_YEAR..=MAX_YEAR).contains(&year)
}

/// One citing publication with its raw reference list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitingRecord {
    pub record_id: String,
    pub publication_year: i32,
    /// Free-text type label (`DT` when present, otherwise `PT`). Empty when
    /// the source format carries no type.
    pub document_type: String,
    pub cited_raw: Vec<String>,
}

/// Which document types take part in an analysis.
///
/// Records are never dropped at ingest; this filter is applied when a view
/// is built.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "types")]
pub enum DocumentTypeFilter {
    All,
    /// Articles and reviews, plus records whose type is unknown (empty, or
    /// the bare journal code `J`).
    #[default]
    ArticlesAndReviews,
    /// Case-insensitive exact labels.
    Only(Vec<String>),
}

impl DocumentTypeFilter {
    pub fn accepts(&self, document_type: &str) -> bool {
        let label = document_type.trim();
        match self {
            DocumentTypeFilter::All => true,
            DocumentTypeFilter::ArticlesAndReviews => {
                if label.is_empty() || label.eq_ignore_ascii_case("J") {
                    return true;
                }
                let lower = label.to_ascii_lowercase();
                lower.contains("article") || lower.contains("review")
            }
            DocumentTypeFilter::Only(types) => types.iter().any(|t| t.trim().eq_ignore_ascii_case(label)),
        }
    }
}

/// Content hash identifying a corpus independently of its source format.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for Fingerprint {
    fn from(s: String) -> Self {
        Fingerprint(s)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A validated, immutable set of citing records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<CitingRecord>,
}

impl Corpus {
    /// Validates the record invariants: unique ids, years in bounds, and
    /// non-empty reference strings (entries are trimmed).
    pub fn new(records: Vec<CitingRecord>) -> Result<Self, IngestError> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut records = records;
        for record in &mut records {
            if record.record_id.is_empty() {
                return Err(IngestError::InvalidRecord("empty record id".into()));
            }
            if !seen.insert(record.record_id.clone()) {
                return Err(IngestError::InvalidRecord(format!("duplicate record id {}", record.record_id)));
            }
            if !year_in_bounds(record.publication_year) {
                return Err(IngestError::InvalidRecord(format!(
                    "record {} has publication year {} outside [{MIN_YEAR}, {MAX_YEAR}]",
                    record.record_id, record.publication_year
                )));
            }
            record.cited_raw.retain_mut(|raw| {
                let trimmed = raw.trim();
                if trimmed.len() != raw.len() {
                    *raw = trimmed.to_string();
                }
                !raw.is_empty()
            });
        }
        Ok(Corpus { records })
    }

    pub fn records(&self) -> &[CitingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_reference_instances(&self) -> usize {
        self.records.iter().map(|r| r.cited_raw.len()).sum()
    }

    /// Writes the canonical CSV serialization (see `write_csv_corpus`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IngestError> {
        super::csv::write_csv_corpus(&self.records, out)
    }

    /// `sha256:<hex>` over the canonical CSV serialization.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut hasher = HashWriter(Sha256::new());
        self.write_csv(&mut hasher).expect("hashing never fails");
        let digest = hasher.0.finalize();
        let mut hex = String::with_capacity(7 + digest.len() * 2);
        hex.push_str("sha256:");
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        Fingerprint(hex)
    }
}

struct HashWriter(Sha256);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, year: i32, refs: &[&str]) -> CitingRecord {
        CitingRecord {
            record_id: id.into(),
            publication_year: year,
            document_type: "Article".into(),
            cited_raw: refs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = Corpus::new(vec![record("A", 2000, &[]), record("A", 2001, &[])]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn rejects_out_of_range_year() {
        assert!(Corpus::new(vec![record("A", 999, &[])]).is_err());
        assert!(Corpus::new(vec![record("A", 2101, &[])]).is_err());
    }

    #[test]
    fn trims_and_drops_blank_references() {
        let corpus = Corpus::new(vec![record("A", 2000, &["  X, 1900  ", "   ", "Y"])]).unwrap();
        assert_eq!(corpus.records()[0].cited_raw, vec!["X, 1900", "Y"]);
    }

    #[test]
    fn fingerprint_ignores_document_type_but_tracks_content() {
        let a = Corpus::new(vec![record("A", 2000, &["X"])]).unwrap();
        let mut b_rec = record("A", 2000, &["X"]);
        b_rec.document_type = "Review".into();
        let b = Corpus::new(vec![b_rec]).unwrap();
        let c = Corpus::new(vec![record("A", 2000, &["Y"])]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert!(a.fingerprint().as_str().starts_with("sha256:"));
        assert_eq!(a.fingerprint().as_str().len(), 7 + 64);
    }

    #[test]
    fn document_type_filter() {
        let f = DocumentTypeFilter::default();
        assert!(f.accepts("Article"));
        assert!(f.accepts("Review"));
        assert!(f.accepts("Article; Proceedings Paper"));
        assert!(f.accepts(""));
        assert!(f.accepts("J"));
        assert!(!f.accepts("Editorial Material"));
        assert!(DocumentTypeFilter::All.accepts("Letter"));
        assert!(DocumentTypeFilter::Only(vec!["letter".into()]).accepts("Letter"));
        assert!(!DocumentTypeFilter::Only(vec!["letter".into()]).accepts("Article"));
    }
}
