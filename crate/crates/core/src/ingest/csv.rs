use std::collections::HashMap;
use std::io::{Read, Write};

use csv::{ByteRecord, QuoteStyle, ReaderBuilder, Terminator, WriterBuilder};

use super::record::year_in_bounds;
use super::{CitingRecord, Diagnostic, DiagnosticReason, IngestError, Ingested};

pub const CSV_HEADER: &str = "citing_id,citing_year,cited_raw";

/// Parses the `citing_id,citing_year,cited_raw` format, grouping rows by
/// citing id in first-appearance order.
///
/// A row with an empty `cited_raw` creates the record without adding a
/// reference, which keeps reference-free records representable.
pub fn parse_csv_corpus<R: Read>(reader: R) -> Result<Ingested, IngestError> {
    let mut rdr = ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = Ingested::default();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut row = ByteRecord::new();

    let mut first = true;
    while rdr.read_byte_record(&mut row)? {
        let pos = row.position().cloned().unwrap_or_else(::csv::Position::new);
        let (line, byte_offset) = (pos.line(), pos.byte());
        if first {
            first = false;
            let found: Vec<String> = row.iter().map(|f| String::from_utf8_lossy(f).into_owned()).collect();
            let mut found = found.join(",");
            if let Some(stripped) = found.strip_prefix('\u{feff}') {
                found = stripped.to_string();
            }
            if found != CSV_HEADER {
                return Err(IngestError::CsvHeader { expected: CSV_HEADER, found });
            }
            continue;
        }
        let mut diagnose = |reason| out.diagnostics.push(Diagnostic { byte_offset, line, reason });
        if row.len() != 3 {
            diagnose(DiagnosticReason::MalformedRow(format!("expected 3 fields, found {}", row.len())));
            continue;
        }
        let field = |i: usize| String::from_utf8_lossy(&row[i]).into_owned();
        let citing_id = field(0).trim().to_string();
        let year_text = field(1);
        let cited = field(2);
        if citing_id.is_empty() {
            diagnose(DiagnosticReason::MissingRecordId);
            continue;
        }
        let trimmed_year = year_text.trim();
        let year = match trimmed_year.parse::<i32>() {
            Ok(y) if year_in_bounds(y) => y,
            _ => {
                diagnose(DiagnosticReason::InvalidCitingYear(year_text));
                continue;
            }
        };
        let cited = cited.trim();
        match by_id.get(&citing_id) {
            Some(&idx) => {
                let record = &mut out.records[idx];
                if record.publication_year != year {
                    diagnose(DiagnosticReason::ConflictingCitingYear(format!(
                        "{citing_id}: {year} vs {}",
                        record.publication_year
                    )));
                    continue;
                }
                if !cited.is_empty() {
                    record.cited_raw.push(cited.to_string());
                }
            }
            None => {
                by_id.insert(citing_id.clone(), out.records.len());
                out.records.push(CitingRecord {
                    record_id: citing_id,
                    publication_year: year,
                    document_type: String::new(),
                    cited_raw: if cited.is_empty() { Vec::new() } else { vec![cited.to_string()] },
                });
            }
        }
    }
    Ok(out)
}

/// Canonical CSV serialization: header, then one row per reference in
/// record order; a record without references is written as one row with an
/// empty `cited_raw`. Fields are quoted only when needed, lines end in `\n`.
pub fn write_csv_corpus<W: Write>(records: &[CitingRecord], out: W) -> Result<(), IngestError> {
    let mut wtr = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .quote_style(QuoteStyle::Necessary)
        .from_writer(out);
    wtr.write_record(["citing_id", "citing_year", "cited_raw"])?;
    for record in records {
        let year = record.publication_year.to_string();
        if record.cited_raw.is_empty() {
            wtr.write_record([record.record_id.as_str(), year.as_str(), ""])?;
        }
        for cited in &record.cited_raw {
            wtr.write_record([record.record_id.as_str(), year.as_str(), cited.as_str()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Ingested {
        parse_csv_corpus(text.as_bytes()).unwrap()
    }

    #[test]
    fn groups_rows_by_citing_id() {
        let out = parse("citing_id,citing_year,cited_raw\nA,2001,X\nA,2001,Y\nB,2002,Z\nA,2001,W\n");
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].cited_raw, vec!["X", "Y", "W"]);
        assert_eq!(out.records[1].record_id, "B");
    }

    #[test]
    fn header_only() {
        assert_eq!(parse("citing_id,citing_year,cited_raw\n"), Ingested::default());
    }

    #[test]
    fn bad_year_is_skipped_with_diagnostic() {
        let out = parse("citing_id,citing_year,cited_raw\nA,18XX,X\nB,2000,Y\n");
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].line, 2);
        assert_eq!(out.diagnostics[0].reason, DiagnosticReason::InvalidCitingYear("18XX".into()));
    }

    #[test]
    fn duplicate_rows_are_kept() {
        let out = parse("citing_id,citing_year,cited_raw\nA,2001,X\nA,2001,X\n");
        assert_eq!(out.records[0].cited_raw, vec!["X", "X"]);
    }

    #[test]
    fn quoted_fields_with_commas() {
        let out = parse("citing_id,citing_year,cited_raw\nA,2001,\"ARRHENIUS S, 1896, PHILOS MAG, V41, P237\"\n");
        assert_eq!(out.records[0].cited_raw[0], "ARRHENIUS S, 1896, PHILOS MAG, V41, P237");
    }

    #[test]
    fn wrong_header_is_fatal() {
        assert!(matches!(
            parse_csv_corpus("id,year,ref\n".as_bytes()),
            Err(IngestError::CsvHeader { .. })
        ));
    }

    #[test]
    fn conflicting_years_and_short_rows() {
        let out = parse("citing_id,citing_year,cited_raw\nA,2001,X\nA,2002,Y\nB,2000\n");
        let codes: Vec<_> = out.diagnostics.iter().map(|d| d.reason.code()).collect();
        assert_eq!(codes, vec!["conflicting_citing_year", "malformed_row"]);
    }

    #[test]
    fn canonical_output_and_reference_free_records() {
        let records = vec![
            CitingRecord {
                record_id: "A".into(),
                publication_year: 2001,
                document_type: "Article".into(),
                cited_raw: vec!["X, 1900, \"Q\"".into(), "Y".into()],
            },
            CitingRecord {
                record_id: "B".into(),
                publication_year: 2002,
                document_type: String::new(),
                cited_raw: vec![],
            },
        ];
        let mut buf = Vec::new();
        write_csv_corpus(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "citing_id,citing_year,cited_raw\nA,2001,\"X, 1900, \"\"Q\"\"\"\nA,2001,Y\nB,2002,\n"
        );
        let back = parse(&text);
        assert_eq!(back.records.len(), 2);
        assert_eq!(back.records[0].cited_raw, records[0].cited_raw);
        assert!(back.records[1].cited_raw.is_empty());
    }
}
