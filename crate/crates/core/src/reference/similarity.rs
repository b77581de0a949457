use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::ParsedReference;

/// Relative weights of the compared fields. Only fields present on both
/// references take part; their weights are renormalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights<F> {
    pub author: F,
    pub source: F,
    pub volume: F,
    pub start_page: F,
}

impl<F: Float> Default for SimilarityWeights<F> {
    fn default() -> Self {
        let w = |x: f64| F::from(x).expect("weight representable");
        SimilarityWeights {
            author: w(0.4),
            source: w(0.3),
            volume: w(0.15),
            start_page: w(0.15),
        }
    }
}

/// `1 - levenshtein / max(len)` over chars; two empty strings score one.
pub fn edit_similarity<F: Float>(a: &str, b: &str) -> F {
    F::from(strsim::normalized_levenshtein(a, b)).expect("score representable")
}

fn present(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

/// Similarity of two parsed references in `[0, 1]`.
///
/// Rules in precedence order: equal DOIs score 1; years further apart than
/// `year_tolerance` score 0; otherwise the weighted mean of edit similarity
/// on author and source plus exact matches on volume and start page. When no
/// field is comparable the score is 1 for identical raw text, else 0.
pub fn similarity<F: Float>(
    a: &ParsedReference,
    b: &ParsedReference,
    weights: &SimilarityWeights<F>,
    year_tolerance: u32,
) -> F {
    if let (Some(x), Some(y)) = (&a.doi_norm, &b.doi_norm) {
        if x == y {
            return F::one();
        }
    }
    if let (Some(x), Some(y)) = (a.rpy, b.rpy) {
        if x.abs_diff(y) > year_tolerance {
            return F::zero();
        }
    }

    let mut total = F::zero();
    let mut weight = F::zero();
    let mut add = |w: F, score: F| {
        total = total + w * score;
        weight = weight + w;
    };
    if let (Some(x), Some(y)) = (present(&a.author_norm), present(&b.author_norm)) {
        add(weights.author, edit_similarity(x, y));
    }
    if let (Some(x), Some(y)) = (&a.source_norm, &b.source_norm) {
        add(weights.source, edit_similarity(x, y));
    }
    if let (Some(x), Some(y)) = (a.volume, b.volume) {
        add(weights.volume, if x == y { F::one() } else { F::zero() });
    }
    if let (Some(x), Some(y)) = (&a.start_page, &b.start_page) {
        add(weights.start_page, if x == y { F::one() } else { F::zero() });
    }

    if weight > F::zero() {
        (total / weight).min(F::one()).max(F::zero())
    } else if a.raw_text == b.raw_text {
        F::one()
    } else {
        F::zero()
    }
}
