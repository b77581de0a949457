use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SpectrumError;
use crate::ingest::ReferenceView;
use crate::reference::{ClusterId, ClusterTable};

/// How several markers combine: `Or` keeps records citing any marker, `And`
/// only records citing all of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerMode {
    #[default]
    Or,
    And,
}

impl std::str::FromStr for MarkerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(MarkerMode::Or),
            "and" => Ok(MarkerMode::And),
            other => Err(format!("marker mode must be `or` or `and`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerSelection {
    pub cluster_ids: Vec<ClusterId>,
    #[serde(default)]
    pub mode: MarkerMode,
}

impl MarkerSelection {
    pub fn is_empty(&self) -> bool {
        self.cluster_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoReduction {
    /// Retained records with all their references.
    pub view: ReferenceView,
    /// Marker ids after resolving retired ids, deduplicated and sorted.
    pub markers: Vec<ClusterId>,
    /// Markers that no record in the input view cites.
    pub markers_without_citers: Vec<ClusterId>,
}

/// Restricts `view` to the citing records that cite the marker clusters
/// (through any variant). Records are kept whole and no NCR minimum is
/// applied, so markers stay in the reduced view.
pub fn rpys_co(
    view: &ReferenceView,
    table: &ClusterTable,
    markers: &[ClusterId],
    mode: MarkerMode,
) -> Result<CoReduction, SpectrumError> {
    if markers.is_empty() {
        return Err(SpectrumError::NoMarkers);
    }
    let mut resolved = BTreeSet::new();
    for id in markers {
        resolved.insert(table.resolve(id)?);
    }
    let resolved: Vec<ClusterId> = resolved.into_iter().collect();
    let positions: Vec<usize> = resolved
        .iter()
        .map(|id| table.position(id).expect("resolved id is live"))
        .collect();

    let mut cited = vec![false; positions.len()];
    let reduced = view.retain_records(|record| {
        let mut hits = vec![false; positions.len()];
        for r in &record.refs {
            if let Some(pos) = table.position_of_ref(*r) {
                if let Some(k) = positions.iter().position(|p| *p == pos) {
                    hits[k] = true;
                }
            }
        }
        for (c, h) in cited.iter_mut().zip(&hits) {
            *c |= *h;
        }
        match mode {
            MarkerMode::Or => hits.iter().any(|h| *h),
            MarkerMode::And => hits.iter().all(|h| *h),
        }
    });
    let markers_without_citers = resolved
        .iter()
        .zip(&cited)
        .filter(|(_, c)| !**c)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(CoReduction {
        view: reduced,
        markers: resolved,
        markers_without_citers,
    })
}
