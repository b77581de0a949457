//! The standard processing chain: type filter, year cutoff, clustering,
//! ledger replay, optional co-citation reduction, era thresholds, spectrum
//! and peaks.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    apply_era_thresholds, detect_peaks, peak_reports, rpys_co, spectrum_from_cluster_counts, ClusterSelection,
    EraThresholdRule, MarkerSelection, PeakParams, PeakReport, Spectrum, SpectrumError, YearRange,
};
use crate::ingest::{apply_rpy_cutoff, Corpus, DocumentTypeFilter, Fingerprint, ReferenceIndex, ReferenceView};
use crate::reference::{ClusterConfig, ClusterId, ClusterTable, OverrideLedger};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// References must be strictly earlier than this year. `None` keeps all
    /// dated references.
    pub cutoff_year: Option<i32>,
    pub document_types: DocumentTypeFilter,
    pub clustering: ClusterConfig<f64>,
    /// `None` skips era filtering; `Some(vec![])` keeps nothing.
    pub era_rules: Option<Vec<EraThresholdRule>>,
    /// Spectrum range; defaults to the span of the retained clusters.
    pub year_range: Option<YearRange>,
    pub peaks: PeakParams<i64>,
    /// Clusters listed per peak.
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cutoff_year: Some(1971),
            document_types: DocumentTypeFilter::default(),
            clustering: ClusterConfig::default(),
            era_rules: None,
            year_range: None,
            peaks: PeakParams::default(),
            top_k: 5,
        }
    }
}

/// Intermediate counts reported by each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub citing_records: u64,
    pub records_after_type_filter: u64,
    pub reference_instances: u64,
    pub instances_below_cutoff: u64,
    pub instances_without_rpy: u64,
    pub distinct_references: u64,
    pub clusters_algorithmic: u64,
    pub ledger_entries: u64,
    pub clusters_after_ledger: u64,
    /// Present when a marker selection reduced the corpus.
    pub records_after_co: Option<u64>,
    pub clusters_retained: u64,
    pub spectrum_years: u64,
    pub peaks: u64,
}

/// A corpus with its parsed reference index. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Analysis {
    corpus: Arc<Corpus>,
    index: Arc<ReferenceIndex>,
    fingerprint: Fingerprint,
}

/// The output of the standard pipeline for one cluster table.
#[derive(Debug, Clone)]
pub struct Derived {
    /// The view the numbers were computed from (reduced when markers apply).
    pub view: ReferenceView,
    /// NCR per cluster position over `view`.
    pub counts: Vec<u64>,
    pub selection: ClusterSelection,
    pub spectrum: Spectrum<i64>,
    pub peaks: Vec<PeakReport>,
    pub markers: Vec<ClusterId>,
    pub markers_without_citers: Vec<ClusterId>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub stages: StageCounts,
    pub table: ClusterTable,
    pub derived: Derived,
}

impl Analysis {
    pub fn new(corpus: Corpus) -> Self {
        let index = Arc::new(ReferenceIndex::build(&corpus));
        let fingerprint = corpus.fingerprint();
        Analysis {
            corpus: Arc::new(corpus),
            index,
            fingerprint,
        }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn index(&self) -> &Arc<ReferenceIndex> {
        &self.index
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// Document-type filter and year cutoff.
    pub fn base_view(&self, config: &PipelineConfig) -> ReferenceView {
        let typed = ReferenceView::with_document_types(&self.corpus, &self.index, &config.document_types);
        apply_rpy_cutoff(&typed, &self.index, config.cutoff_year.unwrap_or(i32::MAX))
    }

    /// Algorithmic clustering of the references in `view`.
    pub fn cluster(&self, view: &ReferenceView, config: &PipelineConfig) -> ClusterTable {
        ClusterTable::build(self.index.clone(), view, &config.clustering)
    }

    /// Everything downstream of the cluster table.
    pub fn derive(
        &self,
        base: &ReferenceView,
        table: &ClusterTable,
        config: &PipelineConfig,
        markers: &MarkerSelection,
    ) -> Result<Derived, SpectrumError> {
        let (view, resolved, without) = if markers.is_empty() {
            (base.clone(), Vec::new(), Vec::new())
        } else {
            let red = rpys_co(base, table, &markers.cluster_ids, markers.mode)?;
            (red.view, red.markers, red.markers_without_citers)
        };
        let counts = table.count_citations(&view);
        let selection = match (&config.era_rules, markers.is_empty()) {
            (Some(rules), true) => apply_era_thresholds(table, &counts, rules)?,
            _ => ClusterSelection::from_fn(table, |pos| counts[pos] > 0),
        };
        let range = config.year_range.or_else(|| {
            let years = selection.positions().filter_map(|p| table.clusters()[p].effective_rpy);
            let (lo, hi) = years.fold((i32::MAX, i32::MIN), |(lo, hi), y| (lo.min(y), hi.max(y)));
            YearRange::new(lo, hi).ok()
        });
        let spectrum = match range {
            Some(range) => spectrum_from_cluster_counts(table, &counts, &selection, range),
            None => Spectrum::default(),
        };
        let peaks = detect_peaks(&spectrum, &config.peaks);
        let peaks = peak_reports(&peaks, table, &counts, &selection, config.top_k);
        Ok(Derived {
            view,
            counts,
            selection,
            spectrum,
            peaks,
            markers: resolved,
            markers_without_citers: without,
        })
    }
}

/// Runs every stage in order and reports the intermediate counts.
pub fn run_standard_pipeline(
    analysis: &Analysis,
    config: &PipelineConfig,
    ledger: &OverrideLedger,
    markers: &MarkerSelection,
) -> Result<PipelineOutput, SpectrumError> {
    config
        .clustering
        .validate()
        .map_err(SpectrumError::InvalidConfig)?;
    let typed = ReferenceView::with_document_types(analysis.corpus(), analysis.index(), &config.document_types);
    let base = analysis.base_view(config);
    let mut table = analysis.cluster(&base, config);
    let clusters_algorithmic = table.len() as u64;
    ledger.replay(&mut table)?;
    let derived = analysis.derive(&base, &table, config, markers)?;

    let instances_without_rpy = typed
        .records()
        .iter()
        .flat_map(|r| r.refs.iter())
        .filter(|id| analysis.index().get(**id).rpy.is_none())
        .count() as u64;
    let stages = StageCounts {
        citing_records: analysis.corpus().len() as u64,
        records_after_type_filter: typed.num_records() as u64,
        reference_instances: typed.num_instances() as u64,
        instances_below_cutoff: base.num_instances() as u64,
        instances_without_rpy,
        distinct_references: base.distinct_references().len() as u64,
        clusters_algorithmic,
        ledger_entries: ledger.len() as u64,
        clusters_after_ledger: table.len() as u64,
        records_after_co: (!markers.is_empty()).then_some(derived.view.num_records() as u64),
        clusters_retained: derived.selection.len() as u64,
        spectrum_years: derived.spectrum.points().len() as u64,
        peaks: derived.peaks.len() as u64,
    };
    Ok(PipelineOutput { stages, table, derived })
}

/// One line of the cluster table export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster_id: ClusterId,
    pub rpy: Option<i32>,
    pub ncr: u64,
    pub author: String,
    pub source: Option<String>,
    pub volume: Option<u32>,
    pub page: Option<String>,
    pub doi: Option<String>,
    pub n_variants: usize,
    pub canonical_raw: String,
}

/// Selected clusters ordered by year (undated last), NCR descending, then
/// canonical raw text.
pub fn cluster_rows(table: &ClusterTable, counts: &[u64], selection: &ClusterSelection) -> Vec<ClusterRow> {
    let mut rows: Vec<ClusterRow> = selection
        .positions()
        .map(|pos| {
            let cluster = &table.clusters()[pos];
            let canonical = table.canonical(cluster);
            ClusterRow {
                cluster_id: cluster.id.clone(),
                rpy: cluster.effective_rpy,
                ncr: counts[pos],
                author: canonical.author_norm.clone(),
                source: canonical.source_norm.clone(),
                volume: canonical.volume,
                page: canonical.start_page.clone(),
                doi: canonical.doi_norm.clone(),
                n_variants: cluster.variants.len(),
                canonical_raw: canonical.raw_text.clone(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let year = match (a.rpy, b.rpy) {
            (Some(x), Some(y)) => x.cmp(&y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        year.then(b.ncr.cmp(&a.ncr))
            .then_with(|| a.canonical_raw.cmp(&b.canonical_raw))
            .then_with(|| a.cluster_id.cmp(&b.cluster_id))
    });
    rows
}
