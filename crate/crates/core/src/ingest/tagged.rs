//! Field-tagged export parser.
//!
//! A record is a run of `TAG value` lines closed by `ER`; `EF` ends the file.
//! Lines starting with three spaces continue the previous tag. Under `CR`
//! every continuation line is a further cited reference; under other tags it
//! is appended to the value with a single space.

use std::collections::HashSet;
use std::io::BufRead;

use super::record::year_in_bounds;
use super::{CitingRecord, Diagnostic, DiagnosticReason, IngestError, Ingested};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    PublicationType,
    DocumentType,
    PublicationYear,
    RecordId,
    CitedReference,
    Other,
}

#[derive(Debug, Default)]
struct PendingRecord {
    start_line: u64,
    start_offset: u64,
    publication_type: Option<String>,
    document_type: Option<String>,
    publication_year: Option<String>,
    record_id: Option<String>,
    cited: Vec<String>,
    last: Option<Field>,
}

impl PendingRecord {
    fn slot(&mut self, field: Field) -> Option<&mut Option<String>> {
        match field {
            Field::PublicationType => Some(&mut self.publication_type),
            Field::DocumentType => Some(&mut self.document_type),
            Field::PublicationYear => Some(&mut self.publication_year),
            Field::RecordId => Some(&mut self.record_id),
            Field::CitedReference | Field::Other => None,
        }
    }

    fn push_cited(&mut self, value: &str) {
        let value = value.trim();
        if !value.is_empty() {
            self.cited.push(value.to_string());
        }
    }
}

struct Parser {
    out: Ingested,
    seen_ids: HashSet<String>,
    current: Option<PendingRecord>,
}

impl Parser {
    fn diagnose(&mut self, line: u64, byte_offset: u64, reason: DiagnosticReason) {
        self.out.diagnostics.push(Diagnostic { byte_offset, line, reason });
    }

    fn finish(&mut self, pending: PendingRecord) {
        let at = (pending.start_line, pending.start_offset);
        let Some(year_text) = pending.publication_year else {
            self.diagnose(at.0, at.1, DiagnosticReason::MissingPublicationYear);
            return;
        };
        let year_text = year_text.trim();
        let year = if year_text.len() == 4 && year_text.bytes().all(|b| b.is_ascii_digit()) {
            year_text.parse::<i32>().ok().filter(|y| year_in_bounds(*y))
        } else {
            None
        };
        let Some(publication_year) = year else {
            self.diagnose(at.0, at.1, DiagnosticReason::InvalidPublicationYear(year_text.to_string()));
            return;
        };
        let record_id = match pending.record_id.map(|s| s.trim().to_string()) {
            Some(id) if !id.is_empty() => id,
            _ => {
                self.diagnose(at.0, at.1, DiagnosticReason::MissingRecordId);
                return;
            }
        };
        if !self.seen_ids.insert(record_id.clone()) {
            self.diagnose(at.0, at.1, DiagnosticReason::DuplicateRecordId(record_id));
            return;
        }
        let document_type = pending
            .document_type
            .or(pending.publication_type)
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        self.out.records.push(CitingRecord {
            record_id,
            publication_year,
            document_type,
            cited_raw: pending.cited,
        });
    }

    fn line(&mut self, text: &str, line_no: u64, offset: u64) -> bool {
        if text.trim().is_empty() {
            return true;
        }

        if let Some(rest) = text.strip_prefix("   ") {
            match self.current.as_mut() {
                Some(pending) if pending.last.is_some() => {
                    let field = pending.last.unwrap();
                    if field == Field::CitedReference {
                        pending.push_cited(rest);
                    } else if let Some(Some(value)) = pending.slot(field) {
                        value.push(' ');
                        value.push_str(rest.trim());
                    }
                }
                _ => self.diagnose(line_no, offset, DiagnosticReason::UnexpectedContinuation),
            }
            return true;
        }

        let bytes = text.as_bytes();
        let well_formed = bytes.len() >= 2
            && bytes[..2].iter().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
            && (bytes.len() == 2 || bytes[2] == b' ');
        if !well_formed {
            let shown: String = text.chars().take(40).collect();
            self.diagnose(line_no, offset, DiagnosticReason::MalformedLine(shown));
            return true;
        }
        let tag = &text[..2];
        let value = text.get(3..).unwrap_or("").trim();

        match tag {
            "EF" => {
                if let Some(pending) = self.current.take() {
                    self.diagnose(pending.start_line, pending.start_offset, DiagnosticReason::TruncatedRecord);
                }
                return false;
            }
            "ER" => match self.current.take() {
                Some(pending) => self.finish(pending),
                None => self.diagnose(line_no, offset, DiagnosticReason::StrayEndOfRecord),
            },
            "FN" | "VR" if self.current.is_none() => {}
            _ => {
                let pending = self.current.get_or_insert_with(|| PendingRecord {
                    start_line: line_no,
                    start_offset: offset,
                    ..Default::default()
                });
                let field = match tag {
                    "PT" => Field::PublicationType,
                    "DT" => Field::DocumentType,
                    "PY" => Field::PublicationYear,
                    "UT" => Field::RecordId,
                    "CR" => Field::CitedReference,
                    _ => Field::Other,
                };
                pending.last = Some(field);
                if field == Field::CitedReference {
                    pending.push_cited(value);
                } else if let Some(slot) = pending.slot(field) {
                    *slot = Some(value.to_string());
                }
            }
        }
        true
    }
}

/// Parses a field-tagged export in one pass, holding at most one record in
/// memory besides the output.
///
/// Malformed records are skipped and reported; only I/O failures are fatal.
pub fn parse_field_tagged_export<R: BufRead>(mut reader: R) -> Result<Ingested, IngestError> {
    let mut parser = Parser {
        out: Ingested::default(),
        seen_ids: HashSet::new(),
        current: None,
    };
    let mut buf = Vec::with_capacity(256);
    let mut offset = 0u64;
    let mut line_no = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let mut bytes = buf.as_slice();
        if line_no == 1 {
            bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
        }
        while let Some((&last, rest)) = bytes.split_last() {
            if last == b'\n' || last == b'\r' {
                bytes = rest;
            } else {
                break;
            }
        }
        let text = String::from_utf8_lossy(bytes);
        let keep_going = parser.line(&text, line_no, offset);
        offset += n as u64;
        if !keep_going {
            break;
        }
    }
    if let Some(pending) = parser.current.take() {
        parser.diagnose(pending.start_line, pending.start_offset, DiagnosticReason::TruncatedRecord);
    }
    Ok(parser.out)
}
