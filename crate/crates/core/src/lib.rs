//! Reference publication year spectroscopy over citation corpora.
//!
//! [`ingest`] reads field-tagged exports and CSV corpora, [`reference`]
//! parses and clusters cited-reference variants and keeps the override
//! ledger, [`spectrum`] computes spectra, era thresholds, peaks and
//! co-citation reductions, [`session`] persists analyses and [`export`]
//! writes the CSV outputs.
//!
//! The numeric core is generic; the aliases below fix the types the rest of
//! the toolkit uses.

pub mod export;
pub mod ingest;
pub mod reference;
pub mod session;
pub mod spectrum;

/// Similarity scores and thresholds.
pub type Score = f64;
/// Citation counts and deviations.
pub type Count = i64;

pub type Spectrum = spectrum::Spectrum<Count>;
pub type SpectrumPoint = spectrum::SpectrumPoint<Count>;
pub type Peak = spectrum::Peak<Count>;
pub type PeakParams = spectrum::PeakParams<Count>;
pub type ClusterConfig = reference::ClusterConfig<Score>;
pub type SimilarityWeights = reference::SimilarityWeights<Score>;
