//! Algorithmic variant clustering: year blocking, pairwise linking and
//! transitive closure.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};

use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::similarity::{similarity, SimilarityWeights};
use super::ParsedReference;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig<F> {
    /// Minimum similarity for two references to be linked, in `(0, 1]`.
    pub threshold: F,
    pub year_tolerance: u32,
    /// Refuse links between references whose volume or start page differ
    /// when both sides carry the field.
    pub require_vol_page_match: bool,
    pub weights: SimilarityWeights<F>,
}

impl<F: Float> Default for ClusterConfig<F> {
    fn default() -> Self {
        ClusterConfig {
            threshold: F::from(0.8).expect("threshold representable"),
            year_tolerance: 0,
            require_vol_page_match: true,
            weights: SimilarityWeights::default(),
        }
    }
}

impl<F: Float> ClusterConfig<F> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > F::zero() && self.threshold <= F::one()) {
            return Err("clustering threshold must lie in (0, 1]".into());
        }
        let w = &self.weights;
        if [w.author, w.source, w.volume, w.start_page].iter().any(|x| x.partial_cmp(&F::zero()).is_none_or(|o| o.is_lt())) {
            return Err("similarity weights must be non-negative".into());
        }
        Ok(())
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// One output cluster: indices into the input slice, ordered by raw text,
/// and the index of the canonical member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantGroup {
    pub members: Vec<usize>,
    pub canonical: usize,
}

/// Picks the member with the most citing incidences, ties to the smallest
/// raw text.
pub fn choose_canonical(members: &[usize], refs: &[ParsedReference], incidences: &[u64]) -> usize {
    *members
        .iter()
        .min_by(|&&a, &&b| {
            incidences[b]
                .cmp(&incidences[a])
                .then_with(|| refs[a].raw_text.cmp(&refs[b].raw_text))
        })
        .expect("non-empty cluster")
}

fn vol_page_compatible(a: &ParsedReference, b: &ParsedReference) -> bool {
    let conflict_vol = matches!((a.volume, b.volume), (Some(x), Some(y)) if x != y);
    let conflict_page = matches!((&a.start_page, &b.start_page), (Some(x), Some(y)) if x != y);
    !conflict_vol && !conflict_page
}

fn has_comparable_field(r: &ParsedReference) -> bool {
    !r.author_norm.is_empty() || r.source_norm.is_some() || r.volume.is_some() || r.start_page.is_some()
}

/// Upper bound of the weighted score from string lengths alone, used to skip
/// edit-distance computation for pairs that cannot reach the threshold.
fn score_upper_bound<F: Float>(a: &ParsedReference, b: &ParsedReference, w: &SimilarityWeights<F>) -> F {
    fn len_bound<F: Float>(x: &str, y: &str) -> F {
        let (lx, ly) = (x.chars().count(), y.chars().count());
        let max = lx.max(ly);
        if max == 0 {
            return F::one();
        }
        F::one() - F::from(lx.abs_diff(ly)).unwrap() / F::from(max).unwrap()
    }
    let mut total = F::zero();
    let mut weight = F::zero();
    if !a.author_norm.is_empty() && !b.author_norm.is_empty() {
        total = total + w.author * len_bound::<F>(&a.author_norm, &b.author_norm);
        weight = weight + w.author;
    }
    if let (Some(x), Some(y)) = (&a.source_norm, &b.source_norm) {
        total = total + w.source * len_bound::<F>(x, y);
        weight = weight + w.source;
    }
    if let (Some(x), Some(y)) = (a.volume, b.volume) {
        total = total + w.volume * if x == y { F::one() } else { F::zero() };
        weight = weight + w.volume;
    }
    if let (Some(x), Some(y)) = (&a.start_page, &b.start_page) {
        total = total + w.start_page * if x == y { F::one() } else { F::zero() };
        weight = weight + w.start_page;
    }
    if weight > F::zero() {
        total / weight
    } else {
        F::one()
    }
}

/// Whether two references are linked under `config`.
pub fn linked<F: Float>(a: &ParsedReference, b: &ParsedReference, config: &ClusterConfig<F>) -> bool {
    if config.require_vol_page_match && !vol_page_compatible(a, b) {
        return false;
    }
    let doi_match = matches!((&a.doi_norm, &b.doi_norm), (Some(x), Some(y)) if x == y);
    if !doi_match {
        if let (Some(x), Some(y)) = (a.rpy, b.rpy) {
            if x.abs_diff(y) > config.year_tolerance {
                return false;
            }
        }
        let slack = F::from(1e-9).unwrap();
        if score_upper_bound(a, b, &config.weights) + slack < config.threshold {
            return false;
        }
    }
    similarity(a, b, &config.weights, config.year_tolerance) >= config.threshold
}

/// Clusters references into groups of variants.
///
/// Candidates are blocked by year (exact, or within `year_tolerance`);
/// references without a year form their own block, and references sharing a
/// DOI are compared regardless of block. Linked pairs are merged
/// transitively. The result depends only on the multiset of inputs, not on
/// their order: groups come out ordered by their smallest raw text.
///
/// `incidences[i]` is the number of citing records of `refs[i]`, used to pick
/// the canonical member.
pub fn cluster_references<F>(refs: &[ParsedReference], incidences: &[u64], config: &ClusterConfig<F>) -> Vec<VariantGroup>
where
    F: Float + Send + Sync,
{
    assert_eq!(refs.len(), incidences.len(), "one incidence count per reference");
    let n = refs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| refs[a].raw_text.cmp(&refs[b].raw_text).then(a.cmp(&b)));

    let mut uf = UnionFind::new(n);

    // Exact field duplicates are always linked; compare one representative each.
    let mut reps: Vec<usize> = Vec::new();
    let mut by_fields: HashMap<FieldKey<'_>, usize> = HashMap::new();
    for &i in &order {
        let r = &refs[i];
        if !has_comparable_field(r) {
            reps.push(i);
            continue;
        }
        match by_fields.entry(field_key(r)) {
            Entry::Occupied(rep) => {
                uf.union(*rep.get(), i);
            }
            Entry::Vacant(slot) => {
                slot.insert(i);
                reps.push(i);
            }
        }
    }

    let mut blocks: BTreeMap<Option<i32>, Vec<usize>> = BTreeMap::new();
    for &i in &reps {
        blocks.entry(refs[i].rpy).or_default().push(i);
    }
    let block_keys: Vec<Option<i32>> = blocks.keys().copied().collect();
    let tolerance = config.year_tolerance as i64;

    let mut edges: Vec<(usize, usize)> = block_keys
        .par_iter()
        .flat_map_iter(|key| {
            let own = &blocks[key];
            let mut out = Vec::new();
            for (x, &i) in own.iter().enumerate() {
                for &j in &own[x + 1..] {
                    if linked(&refs[i], &refs[j], config) {
                        out.push((i, j));
                    }
                }
            }
            if let Some(year) = key {
                for dy in 1..=tolerance {
                    let other_year = *year as i64 + dy;
                    let Ok(other_year) = i32::try_from(other_year) else { break };
                    if let Some(other) = blocks.get(&Some(other_year)) {
                        for &i in own {
                            for &j in other {
                                if linked(&refs[i], &refs[j], config) {
                                    out.push((i, j));
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut by_doi: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &reps {
        if let Some(doi) = &refs[i].doi_norm {
            by_doi.entry(doi.as_str()).or_default().push(i);
        }
    }
    for members in by_doi.values() {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if refs[i].rpy != refs[j].rpy && linked(&refs[i], &refs[j], config) {
                    edges.push((i, j));
                }
            }
        }
    }

    for (i, j) in edges {
        uf.union(i, j);
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }
    let mut out: Vec<VariantGroup> = groups
        .into_values()
        .map(|members| {
            let canonical = choose_canonical(&members, refs, incidences);
            VariantGroup { members, canonical }
        })
        .collect();
    out.sort_by(|a, b| refs[a.members[0]].raw_text.cmp(&refs[b.members[0]].raw_text).then(a.members[0].cmp(&b.members[0])));
    out
}

type FieldKey<'a> = (&'a str, Option<i32>, Option<&'a str>, Option<u32>, Option<&'a str>, Option<&'a str>);

fn field_key(r: &ParsedReference) -> FieldKey<'_> {
    (
        &r.author_norm,
        r.rpy,
        r.source_norm.as_deref(),
        r.volume,
        r.start_page.as_deref(),
        r.doi_norm.as_deref(),
    )
}
