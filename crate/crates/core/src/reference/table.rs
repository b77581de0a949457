use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cluster::{cluster_references, choose_canonical, ClusterConfig};
use super::{NormalizerError, ParsedReference};
use crate::ingest::{year_in_bounds, RefId, ReferenceIndex, ReferenceView};

/// Content-derived cluster identifier: `c` followed by twelve hex digits of
/// a SHA-256 over the sorted variant strings. The same variants always get
/// the same id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(String);

impl ClusterId {
    pub fn new(id: impl Into<String>) -> Self {
        ClusterId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn for_variants<'a>(raw: impl Iterator<Item = &'a str>) -> Self {
        let mut hasher = Sha256::new();
        for text in raw {
            hasher.update(text.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let mut id = String::with_capacity(13);
        id.push('c');
        for byte in &digest[..6] {
            id.push_str(&format!("{byte:02x}"));
        }
        ClusterId(id)
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClusterId {
    fn from(s: &str) -> Self {
        ClusterId(s.to_string())
    }
}

/// A set of variants treated as one cited work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceCluster {
    pub id: ClusterId,
    pub canonical: RefId,
    /// Ascending, which is ascending raw text.
    pub variants: Vec<RefId>,
    /// The canonical year unless an analyst corrected it.
    pub effective_rpy: Option<i32>,
    pub year_corrected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Retired {
    Merged(ClusterId),
    Split(Vec<ClusterId>),
}

/// Outcome of a merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeOutcome {
    pub cluster_id: ClusterId,
    /// True when every id resolved to the same live cluster.
    pub noop: bool,
}

const NO_CLUSTER: u32 = u32::MAX;

/// The live cluster set over a reference index: the algorithmic clustering
/// plus any manual merges, splits and year corrections applied since.
#[derive(Debug, Clone)]
pub struct ClusterTable {
    index: Arc<ReferenceIndex>,
    /// Sorted by id.
    clusters: Vec<ReferenceCluster>,
    /// Dense map from `RefId` to position in `clusters`.
    by_ref: Vec<u32>,
    /// Citing records per reference at clustering time; drives the choice of
    /// canonical variant.
    incidences: Vec<u64>,
    retired: BTreeMap<ClusterId, Retired>,
}

impl ClusterTable {
    /// Clusters every reference present in `view`.
    pub fn build<F>(index: Arc<ReferenceIndex>, view: &ReferenceView, config: &ClusterConfig<F>) -> Self
    where
        F: Float + Send + Sync,
    {
        let present = view.distinct_references();
        let mut incidences = vec![0u64; index.references().len()];
        for (id, n) in &present {
            incidences[id.index()] = *n;
        }
        let refs: Vec<ParsedReference> = present.iter().map(|(id, _)| index.get(*id).clone()).collect();
        let counts: Vec<u64> = present.iter().map(|(_, n)| *n).collect();
        let groups = cluster_references(&refs, &counts, config);
        drop(refs);

        let clusters: Vec<ReferenceCluster> = groups
            .into_par_iter()
            .map(|g| {
                let variants: Vec<RefId> = g.members.iter().map(|&m| present[m].0).collect();
                make_cluster(&index, variants, present[g.canonical].0)
            })
            .collect();
        let mut table = ClusterTable {
            by_ref: vec![NO_CLUSTER; index.references().len()],
            index,
            clusters,
            incidences,
            retired: BTreeMap::new(),
        };
        table.reindex();
        table
    }

    fn reindex(&mut self) {
        self.clusters.par_sort_unstable_by(|a, b| a.id.cmp(&b.id));
        self.by_ref.fill(NO_CLUSTER);
        for (pos, cluster) in self.clusters.iter().enumerate() {
            for v in &cluster.variants {
                self.by_ref[v.index()] = pos as u32;
            }
        }
    }

    pub fn index(&self) -> &Arc<ReferenceIndex> {
        &self.index
    }

    pub fn clusters(&self) -> &[ReferenceCluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Position of the cluster holding `reference`, if it was clustered.
    pub fn position_of_ref(&self, reference: RefId) -> Option<usize> {
        match self.by_ref.get(reference.index()) {
            Some(&pos) if pos != NO_CLUSTER => Some(pos as usize),
            _ => None,
        }
    }

    pub fn position(&self, id: &ClusterId) -> Option<usize> {
        self.clusters.binary_search_by(|c| c.id.cmp(id)).ok()
    }

    pub fn get(&self, id: &ClusterId) -> Option<&ReferenceCluster> {
        self.position(id).map(|p| &self.clusters[p])
    }

    pub fn canonical(&self, cluster: &ReferenceCluster) -> &ParsedReference {
        self.index.get(cluster.canonical)
    }

    /// Resolves a live id, or a retired one through the merges that retired
    /// it. Ids retired by a split are ambiguous.
    pub fn resolve(&self, id: &ClusterId) -> Result<ClusterId, NormalizerError> {
        let mut current = id.clone();
        for _ in 0..=self.retired.len() {
            if self.position(&current).is_some() {
                return Ok(current);
            }
            match self.retired.get(&current) {
                Some(Retired::Merged(next)) => current = next.clone(),
                Some(Retired::Split(parts)) => {
                    return Err(NormalizerError::SplitCluster {
                        id: id.clone(),
                        parts: parts.clone(),
                    })
                }
                None => break,
            }
        }
        Err(NormalizerError::UnknownCluster(id.clone()))
    }

    /// Distinct citing records per cluster over `view`, by cluster position.
    pub fn count_citations(&self, view: &ReferenceView) -> Vec<u64> {
        let n = self.clusters.len();
        view.records()
            .par_iter()
            .fold(
                || (vec![0u64; n], Vec::new()),
                |(mut counts, mut scratch): (Vec<u64>, Vec<usize>), record| {
                    scratch.clear();
                    scratch.extend(record.refs.iter().filter_map(|r| self.position_of_ref(*r)));
                    scratch.sort_unstable();
                    scratch.dedup();
                    for &pos in &scratch {
                        counts[pos] += 1;
                    }
                    (counts, scratch)
                },
            )
            .map(|(counts, _)| counts)
            .reduce(
                || vec![0u64; n],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    }

    /// Sum over clusters of the reference-level incidence counts. Unchanged by
    /// merges and splits.
    pub fn total_variant_incidences(&self) -> u64 {
        self.clusters
            .iter()
            .flat_map(|c| c.variants.iter())
            .map(|v| self.incidences[v.index()])
            .sum()
    }

    fn insert_cluster(&mut self, cluster: ReferenceCluster) {
        self.retired.remove(&cluster.id);
        self.clusters.push(cluster);
    }

    /// Unions the variants of `ids` into one cluster with a freshly chosen
    /// canonical variant. Year corrections of the merged clusters are dropped.
    pub fn merge(&mut self, ids: &[ClusterId]) -> Result<MergeOutcome, NormalizerError> {
        if ids.is_empty() {
            return Err(NormalizerError::EmptyMerge);
        }
        let mut live = BTreeSet::new();
        for id in ids {
            live.insert(self.resolve(id)?);
        }
        if live.len() == 1 {
            return Ok(MergeOutcome {
                cluster_id: live.into_iter().next().unwrap(),
                noop: true,
            });
        }
        let mut variants = Vec::new();
        let mut removed = Vec::new();
        self.clusters.retain(|c| {
            if live.contains(&c.id) {
                variants.extend_from_slice(&c.variants);
                removed.push(c.id.clone());
                false
            } else {
                true
            }
        });
        variants.sort_unstable();
        let members: Vec<usize> = variants.iter().map(|v| v.index()).collect();
        let canonical = RefId(choose_canonical(&members, self.index.references(), &self.incidences) as u32);
        let merged = make_cluster(&self.index, variants, canonical);
        let new_id = merged.id.clone();
        for old in removed {
            self.retired.insert(old, Retired::Merged(new_id.clone()));
        }
        self.insert_cluster(merged);
        self.reindex();
        Ok(MergeOutcome {
            cluster_id: new_id,
            noop: false,
        })
    }

    /// Splits a cluster along a partition of its variants, given by raw text.
    /// A one-block partition leaves the cluster (and any year correction)
    /// unchanged.
    pub fn split(&mut self, id: &ClusterId, partition: &[Vec<String>]) -> Result<Vec<ClusterId>, NormalizerError> {
        let live = self.resolve(id)?;
        let pos = self.position(&live).expect("resolved id is live");
        let cluster = &self.clusters[pos];

        let mut seen = BTreeSet::new();
        let mut blocks: Vec<Vec<RefId>> = Vec::with_capacity(partition.len());
        for block in partition {
            if block.is_empty() {
                return Err(NormalizerError::InvalidPartition(format!("empty block in split of {live}")));
            }
            let mut ids = Vec::with_capacity(block.len());
            for raw in block {
                let rid = self
                    .index
                    .find(raw)
                    .filter(|r| cluster.variants.binary_search(r).is_ok())
                    .ok_or_else(|| NormalizerError::InvalidPartition(format!("`{raw}` is not a variant of {live}")))?;
                if !seen.insert(rid) {
                    return Err(NormalizerError::InvalidPartition(format!("`{raw}` appears twice")));
                }
                ids.push(rid);
            }
            ids.sort_unstable();
            blocks.push(ids);
        }
        if seen.len() != cluster.variants.len() {
            return Err(NormalizerError::InvalidPartition(format!(
                "partition covers {} of {} variants of {live}",
                seen.len(),
                cluster.variants.len()
            )));
        }
        if blocks.len() == 1 {
            return Ok(vec![live]);
        }

        self.clusters.remove(pos);
        let mut new_ids = Vec::with_capacity(blocks.len());
        for variants in blocks {
            let members: Vec<usize> = variants.iter().map(|v| v.index()).collect();
            let canonical = RefId(choose_canonical(&members, self.index.references(), &self.incidences) as u32);
            let part = make_cluster(&self.index, variants, canonical);
            new_ids.push(part.id.clone());
            self.insert_cluster(part);
        }
        self.retired.insert(live, Retired::Split(new_ids.clone()));
        self.reindex();
        Ok(new_ids)
    }

    /// Sets the year used for spectroscopy; variant years are untouched.
    pub fn correct_year(&mut self, id: &ClusterId, corrected_year: i32) -> Result<&ReferenceCluster, NormalizerError> {
        if !year_in_bounds(corrected_year) {
            return Err(NormalizerError::YearOutOfRange(corrected_year));
        }
        let live = self.resolve(id)?;
        let pos = self.position(&live).expect("resolved id is live");
        let cluster = &mut self.clusters[pos];
        cluster.effective_rpy = Some(corrected_year);
        cluster.year_corrected = true;
        Ok(&self.clusters[pos])
    }
}

fn make_cluster(index: &ReferenceIndex, variants: Vec<RefId>, canonical: RefId) -> ReferenceCluster {
    debug_assert!(variants.windows(2).all(|w| w[0] < w[1]));
    let id = ClusterId::for_variants(variants.iter().map(|v| index.get(*v).raw_text.as_str()));
    ReferenceCluster {
        id,
        effective_rpy: index.get(canonical).rpy,
        canonical,
        variants,
        year_corrected: false,
    }
}
