use std::cmp::Ordering;

use num_traits::Num;
use serde::{Deserialize, Serialize};

use super::{ClusterSelection, Spectrum};
use crate::reference::{ClusterId, ClusterTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakParams<C> {
    /// Candidates need at least this deviation; never below zero.
    pub min_deviation: C,
    /// Keep at most this many peaks; `None` keeps all.
    pub max_peaks: Option<usize>,
}

impl<C: Num> Default for PeakParams<C> {
    fn default() -> Self {
        PeakParams {
            min_deviation: C::one(),
            max_peaks: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Peak<C> {
    pub rpy: i32,
    pub ncr: C,
    pub deviation: C,
}

/// Local maxima of the deviation curve.
///
/// A year qualifies when its deviation is positive, at least `min_deviation`,
/// and no smaller than either neighbour (missing neighbours never block).
/// Peaks are ranked by deviation, larger first, then by earlier year.
pub fn detect_peaks<C>(spectrum: &Spectrum<C>, params: &PeakParams<C>) -> Vec<Peak<C>>
where
    C: Num + Copy + PartialOrd,
{
    let points = spectrum.points();
    let mut peaks: Vec<Peak<C>> = points
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            let d = p.deviation;
            let left_ok = i.checked_sub(1).is_none_or(|j| d >= points[j].deviation);
            let right_ok = points.get(i + 1).is_none_or(|q| d >= q.deviation);
            d > C::zero() && d >= params.min_deviation && left_ok && right_ok
        })
        .map(|(_, p)| Peak {
            rpy: p.rpy,
            ncr: p.ncr,
            deviation: p.deviation,
        })
        .collect();
    peaks.sort_by(|a, b| {
        b.deviation
            .partial_cmp(&a.deviation)
            .unwrap_or(Ordering::Equal)
            .then(a.rpy.cmp(&b.rpy))
    });
    if let Some(max) = params.max_peaks {
        peaks.truncate(max);
    }
    peaks
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedCluster {
    pub cluster_id: ClusterId,
    pub ncr: u64,
}

/// The `k` selected clusters of year `rpy` with the highest NCR; ties go to
/// the smaller canonical raw text.
pub fn top_references_for_year(
    table: &ClusterTable,
    counts: &[u64],
    selection: &ClusterSelection,
    rpy: i32,
    k: usize,
) -> Vec<RankedCluster> {
    let mut hits: Vec<usize> = selection
        .positions()
        .filter(|&pos| table.clusters()[pos].effective_rpy == Some(rpy) && counts[pos] > 0)
        .collect();
    hits.sort_by(|&a, &b| {
        counts[b].cmp(&counts[a]).then_with(|| {
            let ra = &table.canonical(&table.clusters()[a]).raw_text;
            let rb = &table.canonical(&table.clusters()[b]).raw_text;
            ra.cmp(rb)
        })
    });
    hits.into_iter()
        .take(k)
        .map(|pos| RankedCluster {
            cluster_id: table.clusters()[pos].id.clone(),
            ncr: counts[pos],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakReport {
    pub rpy: i32,
    pub deviation: i64,
    pub ncr_total: i64,
    pub top_clusters: Vec<RankedCluster>,
}

/// Attaches the `k` most cited clusters to each peak.
pub fn peak_reports(
    peaks: &[Peak<i64>],
    table: &ClusterTable,
    counts: &[u64],
    selection: &ClusterSelection,
    k: usize,
) -> Vec<PeakReport> {
    peaks
        .iter()
        .map(|p| PeakReport {
            rpy: p.rpy,
            deviation: p.deviation,
            ncr_total: p.ncr,
            top_clusters: top_references_for_year(table, counts, selection, p.rpy, k),
        })
        .collect()
}
