//! Cited-reference parsing, variant clustering and manual overrides.

mod cluster;
mod ledger;
mod parse;
mod similarity;
mod table;

use thiserror::Error;

pub use self::cluster::{choose_canonical, cluster_references, linked, ClusterConfig, UnionFind, VariantGroup};
pub use self::ledger::{format_timestamp, LedgerEntry, LedgerOp, OverrideLedger};
pub use self::parse::{normalize_text, parse_cited_reference, ParsedReference};
pub use self::similarity::{edit_similarity, similarity, SimilarityWeights};
pub use self::table::{ClusterId, ClusterTable, MergeOutcome, ReferenceCluster};

#[derive(Debug, Error)]
pub enum NormalizerError {
    #[error("unknown cluster id {0}")]
    UnknownCluster(ClusterId),
    #[error("cluster {id} was split into {parts:?}; address one of the parts")]
    SplitCluster { id: ClusterId, parts: Vec<ClusterId> },
    #[error("merge needs at least one cluster id")]
    EmptyMerge,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("year {0} outside [1000, 2100]")]
    YearOutOfRange(i32),
    #[error("ledger entry {entry} no longer applies: {source}")]
    Replay {
        entry: usize,
        #[source]
        source: Box<NormalizerError>,
    },
    #[error("ledger line {line}: {message}")]
    LedgerFormat { line: usize, message: String },
}
