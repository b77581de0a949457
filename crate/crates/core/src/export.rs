//! CSV exports of the spectrum and the cluster table.

use std::fmt::Display;
use std::io::{self, Write};
use std::path::Path;

use crate::session::write_atomic;
use crate::spectrum::{ClusterRow, PeakReport, Spectrum};

pub const SPECTRUM_HEADER: &str = "RPY,NCR,MEDIAN5,DEV";
pub const CLUSTERS_HEADER: &str = "CLUSTER_ID,RPY,NCR,AUTHOR,SOURCE,VOLUME,PAGE,DOI,N_VARIANTS";
pub const PEAKS_HEADER: &str = "RPY,DEV,NCR,TOP_CLUSTERS";

pub fn write_spectrum_csv<C: Display>(spectrum: &Spectrum<C>, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    for p in spectrum.points() {
        writeln!(out, "{},{},{},{}", p.rpy, p.ncr, p.median5, p.deviation)?;
    }
    Ok(())
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_clusters_csv(rows: &[ClusterRow], out: &mut dyn Write) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CLUSTERS_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.cluster_id.to_string(),
            opt(&r.rpy),
            r.ncr.to_string(),
            r.author.clone(),
            opt(&r.source),
            opt(&r.volume),
            opt(&r.page),
            opt(&r.doi),
            r.n_variants.to_string(),
        ])?;
    }
    w.flush()
}

/// One line per peak; the top clusters are `id:ncr` joined by `;`.
pub fn write_peaks_csv(peaks: &[PeakReport], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{PEAKS_HEADER}")?;
    for p in peaks {
        let top: Vec<String> = p.top_clusters.iter().map(|c| format!("{}:{}", c.cluster_id, c.ncr)).collect();
        writeln!(out, "{},{},{},{}", p.rpy, p.deviation, p.ncr_total, top.join(";"))?;
    }
    Ok(())
}

pub fn export_spectrum_csv<C: Display>(spectrum: &Spectrum<C>, path: &Path) -> io::Result<()> {
    write_atomic(path, |w| write_spectrum_csv(spectrum, w))
}

pub fn export_clusters_csv(rows: &[ClusterRow], path: &Path) -> io::Result<()> {
    write_atomic(path, |w| write_clusters_csv(rows, w))
}

/// Reads a spectrum written by [`write_spectrum_csv`], taking only the year
/// and NCR columns; medians and deviations are recomputed.
pub fn read_spectrum_csv<R: io::Read>(input: R) -> Result<Spectrum<i64>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name).ok_or(format!("missing column {name}"));
    let (rpy_col, ncr_col) = (col("RPY")?, col("NCR")?);
    let mut first = None;
    let mut counts = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let field = |c: usize| row.get(c).unwrap_or("").trim().to_string();
        let rpy: i32 = field(rpy_col).parse().map_err(|_| format!("row {}: bad RPY", i + 2))?;
        let ncr: i64 = field(ncr_col).parse().map_err(|_| format!("row {}: bad NCR", i + 2))?;
        let start = *first.get_or_insert(rpy);
        if rpy != start + counts.len() as i32 {
            return Err(format!("row {}: years must be consecutive and ascending", i + 2));
        }
        counts.push(ncr);
    }
    Ok(first.map(|s| Spectrum::from_counts(s, &counts)).unwrap_or_default())
}
