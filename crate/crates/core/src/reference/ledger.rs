//! Append-only log of analyst decisions over the algorithmic clustering.
//!
//! On disk a ledger is JSON Lines, one entry per line:
//!
//! ```text
//! {"op":"merge","args":{"cluster_ids":["c1a2b3c4d5e6f","c0f9e8d7c6b5a"]},"timestamp":"2026-01-05T10:00:00Z","note":"journal title variant"}
//! {"op":"split","args":{"cluster_id":"c...","partition":[["RAW A"],["RAW B"]]},"timestamp":"...","note":""}
//! {"op":"year_correction","args":{"cluster_id":"c...","corrected_year":1824},"timestamp":"...","note":""}
//! ```

use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::table::ClusterTable;
use super::{ClusterId, NormalizerError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum LedgerOp {
    Merge { cluster_ids: Vec<ClusterId> },
    Split { cluster_id: ClusterId, partition: Vec<Vec<String>> },
    YearCorrection { cluster_id: ClusterId, corrected_year: i32 },
}

mod rfc3339_seconds {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    #[serde(flatten)]
    pub op: LedgerOp,
    #[serde(with = "rfc3339_seconds")]
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub note: String,
}

impl LedgerEntry {
    pub fn new(op: LedgerOp, timestamp: DateTime<Utc>, note: impl Into<String>) -> Self {
        LedgerEntry {
            op,
            timestamp,
            note: note.into(),
        }
    }

    /// Applies this entry to `table`.
    pub fn apply(&self, table: &mut ClusterTable) -> Result<(), NormalizerError> {
        match &self.op {
            LedgerOp::Merge { cluster_ids } => table.merge(cluster_ids).map(|_| ()),
            LedgerOp::Split { cluster_id, partition } => table.split(cluster_id, partition).map(|_| ()),
            LedgerOp::YearCorrection {
                cluster_id,
                corrected_year,
            } => table.correct_year(cluster_id, *corrected_year).map(|_| ()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OverrideLedger {
    entries: Vec<LedgerEntry>,
}

impl OverrideLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    /// Applies `entry` to `table` and records it only if it succeeded.
    pub fn record(&mut self, table: &mut ClusterTable, entry: LedgerEntry) -> Result<(), NormalizerError> {
        entry.apply(table)?;
        self.entries.push(entry);
        Ok(())
    }

    /// Applies every entry in order. Fails on the first entry that no
    /// longer applies, naming its position.
    pub fn replay(&self, table: &mut ClusterTable) -> Result<(), NormalizerError> {
        for (i, entry) in self.entries.iter().enumerate() {
            entry.apply(table).map_err(|e| NormalizerError::Replay {
                entry: i,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, NormalizerError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| NormalizerError::LedgerFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|e| NormalizerError::LedgerFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(OverrideLedger { entries })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Formats a timestamp the way ledger files store it.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 1, 5, 10, 0, 0).unwrap()
    }

    #[test]
    fn jsonl_line_format() {
        let mut ledger = OverrideLedger::new();
        ledger.push(LedgerEntry::new(
            LedgerOp::Merge {
                cluster_ids: vec!["ca".into(), "cb".into()],
            },
            ts(),
            "variant",
        ));
        ledger.push(LedgerEntry::new(
            LedgerOp::YearCorrection {
                cluster_id: "cc".into(),
                corrected_year: 1824,
            },
            ts(),
            "",
        ));
        ledger.push(LedgerEntry::new(
            LedgerOp::Split {
                cluster_id: "cd".into(),
                partition: vec![vec!["A".into()], vec!["B".into()]],
            },
            ts(),
            "",
        ));
        let mut buf = Vec::new();
        ledger.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            concat!(
                r#"{"op":"merge","args":{"cluster_ids":["ca","cb"]},"timestamp":"2026-01-05T10:00:00Z","note":"variant"}"#,
                "\n",
                r#"{"op":"year_correction","args":{"cluster_id":"cc","corrected_year":1824},"timestamp":"2026-01-05T10:00:00Z","note":""}"#,
                "\n",
                r#"{"op":"split","args":{"cluster_id":"cd","partition":[["A"],["B"]]},"timestamp":"2026-01-05T10:00:00Z","note":""}"#,
                "\n",
            )
        );
        let back = OverrideLedger::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, ledger);
    }

    #[test]
    fn malformed_line_is_located() {
        let text = "\n{\"op\":\"merge\",\"args\":{\"cluster_ids\":[]},\"timestamp\":\"2026-01-05T10:00:00Z\"}\n{oops}\n";
        let err = OverrideLedger::read_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(err, NormalizerError::LedgerFormat { line: 3, .. }), "{err}");
    }
}
