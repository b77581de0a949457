use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Corpus, DocumentTypeFilter};
use crate::reference::{parse_cited_reference, ParsedReference};

/// Index of a distinct raw reference string inside a [`ReferenceIndex`].
///
/// Ids follow the lexicographic order of the raw strings, so they depend
/// only on the set of strings and not on corpus order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RefId(pub u32);

impl RefId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Every distinct raw reference of a corpus, parsed once, plus each
/// record's reference list expressed as ids.
#[derive(Debug, Clone, Default)]
pub struct ReferenceIndex {
    refs: Vec<ParsedReference>,
    record_refs: Vec<Vec<RefId>>,
}

impl ReferenceIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut distinct: Vec<&str> = corpus
            .records()
            .iter()
            .flat_map(|r| r.cited_raw.iter().map(String::as_str))
            .collect();
        distinct.par_sort_unstable();
        distinct.dedup();

        let ids: HashMap<&str, RefId> = distinct
            .iter()
            .enumerate()
            .map(|(i, raw)| (*raw, RefId(i as u32)))
            .collect();
        let refs: Vec<ParsedReference> = distinct.par_iter().map(|raw| parse_cited_reference(raw)).collect();
        let record_refs = corpus
            .records()
            .par_iter()
            .map(|record| record.cited_raw.iter().map(|raw| ids[raw.as_str()]).collect())
            .collect();
        ReferenceIndex { refs, record_refs }
    }

    pub fn references(&self) -> &[ParsedReference] {
        &self.refs
    }

    pub fn get(&self, id: RefId) -> &ParsedReference {
        &self.refs[id.index()]
    }

    pub fn num_records(&self) -> usize {
        self.record_refs.len()
    }

    pub fn record_refs(&self, record: usize) -> &[RefId] {
        &self.record_refs[record]
    }

    /// Binary search by raw text.
    pub fn find(&self, raw: &str) -> Option<RefId> {
        self.refs
            .binary_search_by(|r| r.raw_text.as_str().cmp(raw))
            .ok()
            .map(|i| RefId(i as u32))
    }
}

/// One citing record as seen through a view: its index in the corpus and
/// the reference instances that survived filtering, in cited order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewRecord {
    pub record: u32,
    pub refs: Vec<RefId>,
}

/// A filtered selection of citing records and reference instances.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferenceView {
    records: Vec<ViewRecord>,
}

impl ReferenceView {
    pub fn full(index: &ReferenceIndex) -> Self {
        ReferenceView {
            records: (0..index.num_records())
                .map(|i| ViewRecord {
                    record: i as u32,
                    refs: index.record_refs(i).to_vec(),
                })
                .collect(),
        }
    }

    /// All records whose document type passes `filter`.
    pub fn with_document_types(corpus: &Corpus, index: &ReferenceIndex, filter: &DocumentTypeFilter) -> Self {
        ReferenceView {
            records: corpus
                .records()
                .iter()
                .enumerate()
                .filter(|(_, r)| filter.accepts(&r.document_type))
                .map(|(i, _)| ViewRecord {
                    record: i as u32,
                    refs: index.record_refs(i).to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_records(records: Vec<ViewRecord>) -> Self {
        ReferenceView { records }
    }

    pub fn records(&self) -> &[ViewRecord] {
        &self.records
    }

    pub fn num_records(&self) -> usize {
        self.records.len()
    }

    pub fn num_instances(&self) -> usize {
        self.records.iter().map(|r| r.refs.len()).sum()
    }

    /// Distinct references present in the view, ascending, with the number
    /// of distinct records citing each.
    pub fn distinct_references(&self) -> Vec<(RefId, u64)> {
        let mut pairs: Vec<(RefId, u32)> = self
            .records
            .par_iter()
            .flat_map_iter(|r| {
                let mut refs = r.refs.clone();
                refs.sort_unstable();
                refs.dedup();
                refs.into_iter().map(move |id| (id, r.record))
            })
            .collect();
        pairs.par_sort_unstable();
        let mut out: Vec<(RefId, u64)> = Vec::new();
        for (id, _) in pairs {
            match out.last_mut() {
                Some((last, n)) if *last == id => *n += 1,
                _ => out.push((id, 1)),
            }
        }
        out
    }

    pub fn retain_records(&self, mut keep: impl FnMut(&ViewRecord) -> bool) -> Self {
        ReferenceView {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}

/// Keeps the reference instances whose parsed year is strictly earlier than
/// `cutoff_year`. Instances without a year are dropped; records are kept
/// even when none of their references survive.
pub fn apply_rpy_cutoff(view: &ReferenceView, index: &ReferenceIndex, cutoff_year: i32) -> ReferenceView {
    ReferenceView {
        records: view
            .records
            .par_iter()
            .map(|r| ViewRecord {
                record: r.record,
                refs: r
                    .refs
                    .iter()
                    .copied()
                    .filter(|id| matches!(index.get(*id).rpy, Some(y) if y < cutoff_year))
                    .collect(),
            })
            .collect(),
    }
}

/// Reference counts before and after the publication-year cutoff.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_citing_records: u64,
    pub num_reference_instances: u64,
    pub num_reference_instances_below_cutoff: u64,
    /// Instances whose reference string yields no year.
    pub num_reference_instances_without_rpy: u64,
    pub num_distinct_references: u64,
    pub min_rpy: Option<i32>,
    pub max_rpy: Option<i32>,
}

pub fn corpus_stats(corpus: &Corpus, index: &ReferenceIndex, cutoff_year: i32) -> CorpusStats {
    let mut stats = CorpusStats {
        num_citing_records: corpus.len() as u64,
        num_distinct_references: index.references().len() as u64,
        ..Default::default()
    };
    for record in 0..index.num_records() {
        for id in index.record_refs(record) {
            stats.num_reference_instances += 1;
            match index.get(*id).rpy {
                Some(year) => {
                    if year < cutoff_year {
                        stats.num_reference_instances_below_cutoff += 1;
                    }
                    stats.min_rpy = Some(stats.min_rpy.map_or(year, |m| m.min(year)));
                    stats.max_rpy = Some(stats.max_rpy.map_or(year, |m| m.max(year)));
                }
                None => stats.num_reference_instances_without_rpy += 1,
            }
        }
    }
    stats
}
