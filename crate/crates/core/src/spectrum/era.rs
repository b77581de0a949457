use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ClusterSelection, SpectrumError, YearRange};
use crate::reference::ClusterTable;

/// Minimum NCR for clusters whose effective year falls in `year_range`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraThresholdRule {
    pub year_range: YearRange,
    pub min_ncr: u64,
}

impl EraThresholdRule {
    pub fn new(start: i32, end: i32, min_ncr: u64) -> Result<Self, SpectrumError> {
        Ok(EraThresholdRule {
            year_range: YearRange::new(start, end)?,
            min_ncr,
        })
    }
}

impl fmt::Display for EraThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.year_range, self.min_ncr)
    }
}

/// `START:END=MIN`, the command-line form.
impl std::str::FromStr for EraThresholdRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (range, min) = s.split_once('=').ok_or_else(|| format!("expected START:END=MIN, got `{s}`"))?;
        Ok(EraThresholdRule {
            year_range: range.parse()?,
            min_ncr: min.trim().parse().map_err(|_| format!("bad minimum `{min}`"))?,
        })
    }
}

pub fn check_disjoint(rules: &[EraThresholdRule]) -> Result<(), SpectrumError> {
    for (i, a) in rules.iter().enumerate() {
        for b in &rules[i + 1..] {
            if a.year_range.overlaps(&b.year_range) {
                return Err(SpectrumError::OverlappingRules(*a, *b));
            }
        }
    }
    Ok(())
}

/// Keeps the clusters whose effective year lies in some rule's range and
/// whose NCR (`counts`, by cluster position) reaches that rule's minimum.
/// Clusters outside every range are dropped.
pub fn apply_era_thresholds(
    table: &ClusterTable,
    counts: &[u64],
    rules: &[EraThresholdRule],
) -> Result<ClusterSelection, SpectrumError> {
    check_disjoint(rules)?;
    Ok(ClusterSelection::from_fn(table, |pos| {
        let Some(year) = table.clusters()[pos].effective_rpy else {
            return false;
        };
        rules
            .iter()
            .find(|r| r.year_range.contains(year))
            .is_some_and(|r| counts[pos] >= r.min_ncr)
    }))
}
