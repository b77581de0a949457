//! Reference publication year spectra, era thresholds, peak detection and
//! co-citation reduction.
//!
//! The spectrum math is generic over the count type so the same code runs on
//! integer tallies, floats and exact rationals.

mod co;
mod era;
mod peaks;
mod pipeline;

use std::fmt;

use num_traits::Num;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ReferenceView;
use crate::reference::{ClusterId, ClusterTable, NormalizerError};

pub use self::co::{rpys_co, CoReduction, MarkerMode, MarkerSelection};
pub use self::era::{apply_era_thresholds, check_disjoint, EraThresholdRule};
pub use self::peaks::{detect_peaks, peak_reports, top_references_for_year, Peak, PeakParams, PeakReport, RankedCluster};
pub use self::pipeline::{
    cluster_rows, run_standard_pipeline, Analysis, ClusterRow, Derived, PipelineConfig, PipelineOutput, StageCounts,
};

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("inverted year range {start}:{end}")]
    InvertedRange { start: i32, end: i32 },
    #[error("era rules overlap: {0} and {1}")]
    OverlappingRules(EraThresholdRule, EraThresholdRule),
    #[error("at least one marker cluster is required")]
    NoMarkers,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cluster(#[from] NormalizerError),
}

/// Inclusive range of reference publication years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawYearRange")]
pub struct YearRange {
    start: i32,
    end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self, SpectrumError> {
        if start > end {
            return Err(SpectrumError::InvertedRange { start, end });
        }
        Ok(YearRange { start, end })
    }

    pub fn start(&self) -> i32 {
        self.start
    }

    pub fn end(&self) -> i32 {
        self.end
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn len(&self) -> usize {
        (self.end as i64 - self.start as i64 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &YearRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Deserialize)]
struct RawYearRange {
    start: i32,
    end: i32,
}

impl TryFrom<RawYearRange> for YearRange {
    type Error = SpectrumError;

    fn try_from(raw: RawYearRange) -> Result<Self, Self::Error> {
        YearRange::new(raw.start, raw.end)
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl std::str::FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected START:END, got `{s}`"))?;
        let start = a.trim().parse().map_err(|_| format!("bad start year `{a}`"))?;
        let end = b.trim().parse().map_err(|_| format!("bad end year `{b}`"))?;
        YearRange::new(start, end).map_err(|e| e.to_string())
    }
}

/// Count and five-year-median deviation for one year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumPoint<C> {
    pub rpy: i32,
    pub ncr: C,
    pub median5: C,
    pub deviation: C,
}

/// One point per year of a contiguous range, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spectrum<C> {
    points: Vec<SpectrumPoint<C>>,
}

impl<C> Default for Spectrum<C> {
    fn default() -> Self {
        Spectrum { points: Vec::new() }
    }
}

/// Median of five values.
pub fn median5<C: Copy + PartialOrd>(mut window: [C; 5]) -> C {
    window.sort_by(|a, b| a.partial_cmp(b).expect("counts are totally ordered"));
    window[2]
}

impl<C: Num + Copy + PartialOrd> Spectrum<C> {
    /// Builds the spectrum for consecutive years starting at `start`.
    /// Years outside the series count as zero in the median window.
    pub fn from_counts(start: i32, counts: &[C]) -> Self {
        let at = |i: isize| -> C {
            if i < 0 || i as usize >= counts.len() {
                C::zero()
            } else {
                counts[i as usize]
            }
        };
        let points = (0..counts.len() as isize)
            .map(|i| {
                let ncr = counts[i as usize];
                let median = median5([at(i - 2), at(i - 1), ncr, at(i + 1), at(i + 2)]);
                SpectrumPoint {
                    rpy: start + i as i32,
                    ncr,
                    median5: median,
                    deviation: ncr - median,
                }
            })
            .collect();
        Spectrum { points }
    }

    /// Applies `f` to every count and rebuilds medians and deviations.
    pub fn map_counts<D: Num + Copy + PartialOrd>(&self, f: impl Fn(C) -> D) -> Spectrum<D> {
        let counts: Vec<D> = self.points.iter().map(|p| f(p.ncr)).collect();
        match self.points.first() {
            Some(first) => Spectrum::from_counts(first.rpy, &counts),
            None => Spectrum::default(),
        }
    }
}

impl<C> Spectrum<C> {
    pub fn points(&self) -> &[SpectrumPoint<C>] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn year_range(&self) -> Option<YearRange> {
        Some(YearRange {
            start: self.points.first()?.rpy,
            end: self.points.last()?.rpy,
        })
    }

    pub fn get(&self, year: i32) -> Option<&SpectrumPoint<C>> {
        let first = self.points.first()?.rpy;
        let offset = usize::try_from(year.checked_sub(first)?).ok()?;
        self.points.get(offset)
    }
}

/// Subset of a cluster table's clusters, by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSelection {
    mask: Vec<bool>,
}

impl ClusterSelection {
    pub fn all(table: &ClusterTable) -> Self {
        ClusterSelection {
            mask: vec![true; table.len()],
        }
    }

    pub fn none(table: &ClusterTable) -> Self {
        ClusterSelection {
            mask: vec![false; table.len()],
        }
    }

    pub fn from_fn(table: &ClusterTable, mut keep: impl FnMut(usize) -> bool) -> Self {
        ClusterSelection {
            mask: (0..table.len()).map(&mut keep).collect(),
        }
    }

    pub fn contains(&self, position: usize) -> bool {
        self.mask.get(position).copied().unwrap_or(false)
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|k| **k).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids<'a>(&'a self, table: &'a ClusterTable) -> impl Iterator<Item = &'a ClusterId> + 'a {
        self.positions().map(|p| &table.clusters()[p].id)
    }
}

/// NCR per year: the number of (citing record, cluster) pairs in `view`
/// whose selected cluster has its effective year in `range`. A record citing
/// several variants of one cluster counts once.
pub fn compute_spectrum(
    view: &ReferenceView,
    table: &ClusterTable,
    selection: &ClusterSelection,
    range: YearRange,
) -> Spectrum<i64> {
    let counts = table.count_citations(view);
    spectrum_from_cluster_counts(table, &counts, selection, range)
}

/// Same as [`compute_spectrum`] with per-cluster counts already tallied.
pub fn spectrum_from_cluster_counts(
    table: &ClusterTable,
    counts: &[u64],
    selection: &ClusterSelection,
    range: YearRange,
) -> Spectrum<i64> {
    let mut per_year = vec![0i64; range.len()];
    for pos in selection.positions() {
        if let Some(year) = table.clusters()[pos].effective_rpy {
            if range.contains(year) {
                per_year[(year - range.start) as usize] += counts[pos] as i64;
            }
        }
    }
    Spectrum::from_counts(range.start, &per_year)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn median_deviation_hand_example() {
        // median(2, 3, 10, 3, 2) = 3, so the deviation at 1896 is 10 - 3 = 7.
        let s = Spectrum::from_counts(1894, &[2i64, 3, 10, 3, 2]);
        let p = s.get(1896).unwrap();
        assert_eq!((p.ncr, p.median5, p.deviation), (10, 3, 7));
    }

    #[test]
    fn zero_extension_at_the_boundary() {
        // 1900 is the middle of [1898, 1902]: median(0, 0, 5, 0, 0) = 0.
        let s = Spectrum::from_counts(1898, &[0i64, 0, 5, 0, 0]);
        assert_eq!(s.get(1900).unwrap().deviation, 5);
        // The first year of a range sees two zero-extended years to its left.
        let s = Spectrum::from_counts(1900, &[4i64, 4, 4]);
        assert_eq!(s.get(1900).unwrap().median5, 4);
        let s = Spectrum::from_counts(1900, &[4i64]);
        assert_eq!(s.get(1900).unwrap().median5, 0);
    }

    #[test]
    fn constant_series_has_zero_interior_deviation() {
        let s = Spectrum::from_counts(1900, &[7i64; 11]);
        for year in 1902..=1908 {
            assert_eq!(s.get(year).unwrap().deviation, 0);
        }
        assert_eq!(s.year_range(), Some(YearRange::new(1900, 1910).unwrap()));
    }

    #[test]
    fn generic_counts() {
        let s = Spectrum::from_counts(1894, &[2.0f64, 3.0, 10.0, 3.0, 2.0]);
        assert_eq!(s.get(1896).unwrap().deviation, 7.0);
        let r = |n| Ratio::from_integer(n);
        let s = Spectrum::from_counts(1894, &[r(2), r(3), r(10), r(3), r(2)]).map_counts(|c| c / Ratio::from_integer(4));
        assert_eq!(s.get(1896).unwrap().deviation, Ratio::new(7, 4));
    }

    #[test]
    fn year_range_parsing() {
        assert_eq!("1686:1970".parse::<YearRange>().unwrap(), YearRange::new(1686, 1970).unwrap());
        assert!("1970:1686".parse::<YearRange>().is_err());
        assert!("1970".parse::<YearRange>().is_err());
        assert!(YearRange::new(1900, 1899).is_err());
        assert_eq!(YearRange::new(1900, 1900).unwrap().len(), 1);
    }

    #[test]
    fn get_outside_range() {
        let s = Spectrum::from_counts(1900, &[1i64, 2]);
        assert!(s.get(1899).is_none());
        assert!(s.get(1902).is_none());
        assert!(Spectrum::<i64>::default().get(1900).is_none());
    }
}
