use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::ingest::year_in_bounds;

/// Structured fields of one cited-reference string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedReference {
    pub raw_text: String,
    /// Uppercased first-author token, diacritics folded. May be empty.
    pub author_norm: String,
    pub rpy: Option<i32>,
    pub source_norm: Option<String>,
    pub volume: Option<u32>,
    pub start_page: Option<String>,
    pub doi_norm: Option<String>,
}

fn fold(text: &str) -> impl Iterator<Item = char> + '_ {
    text.nfkd().filter(|c| !is_combining_mark(*c))
}

/// Uppercase, fold diacritics, replace punctuation with spaces and collapse
/// whitespace. Idempotent.
pub fn normalize_text(text: &str) -> String {
    let upper: String = fold(text).flat_map(char::to_uppercase).collect();
    let mut out = String::with_capacity(upper.len());
    let mut pending_space = false;
    for c in fold(&upper) {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

fn is_year(segment: &str) -> bool {
    segment.len() == 4 && segment.bytes().all(|b| b.is_ascii_digit())
}

fn volume_tag(segment: &str) -> Option<u32> {
    let digits = segment.strip_prefix('V')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn page_tag(segment: &str) -> Option<&str> {
    let token = segment.strip_prefix('P')?;
    (!token.is_empty() && token.chars().all(|c| c.is_ascii_alphanumeric())).then_some(token)
}

fn doi_tag(segment: &str) -> Option<String> {
    let body = if let Some(rest) = segment.strip_prefix("DOI ") {
        rest
    } else if segment.starts_with("10.") {
        segment
    } else {
        return None;
    };
    let body = body.trim().trim_start_matches('[').trim_end_matches(']').trim();
    (!body.is_empty()).then(|| body.to_lowercase())
}

/// A page tag directly after the year is only taken as a page when it has a
/// digit; `PNAS` or `PHYSIOL` there is a source title.
fn is_tagged(segment: &str, right_after_year: bool) -> bool {
    volume_tag(segment).is_some()
        || doi_tag(segment).is_some()
        || match page_tag(segment) {
            Some(token) => !right_after_year || token.bytes().any(|b| b.is_ascii_digit()),
            None => false,
        }
}

/// Splits a reference on commas and assigns segments to fields:
///
/// * segment 1 is the author (unless it is itself a year),
/// * the first four-digit segment is the year,
/// * the first untagged segment after the year is the source,
/// * `V<digits>` is the volume, `P<alnum>` the start page, `DOI <x>` or
///   `10.<x>` the DOI. The first match of each tag wins.
///
/// Never fails; unrecognized segments are ignored.
pub fn parse_cited_reference(raw: &str) -> ParsedReference {
    let segments: Vec<&str> = raw.split(',').map(str::trim).collect();
    let mut parsed = ParsedReference {
        raw_text: raw.to_string(),
        author_norm: String::new(),
        rpy: None,
        source_norm: None,
        volume: None,
        start_page: None,
        doi_norm: None,
    };

    let mut rest_start = 1;
    let mut year_pos = None;
    match segments.first() {
        Some(first) if is_year(first) => {
            year_pos = Some(0);
        }
        Some(first) => parsed.author_norm = normalize_text(first),
        None => {}
    }
    if year_pos.is_none() {
        year_pos = segments.iter().skip(1).position(|s| is_year(s)).map(|p| p + 1);
    }
    if let Some(pos) = year_pos {
        parsed.rpy = segments[pos].parse().ok().filter(|y| year_in_bounds(*y));
        rest_start = rest_start.max(pos + 1);
        parsed.source_norm = segments[pos + 1..]
            .iter()
            .enumerate()
            .find(|(i, s)| !s.is_empty() && !is_tagged(s, *i == 0))
            .map(|(_, s)| normalize_text(s))
            .filter(|s| !s.is_empty());
    }

    for (i, segment) in segments.iter().enumerate().skip(1) {
        if Some(i) == year_pos {
            continue;
        }
        let right_after_year = year_pos.is_some_and(|p| i == p + 1);
        if parsed.volume.is_none() {
            if let Some(v) = volume_tag(segment) {
                parsed.volume = Some(v);
                continue;
            }
        }
        if parsed.doi_norm.is_none() {
            if let Some(doi) = doi_tag(segment) {
                parsed.doi_norm = Some(doi);
                continue;
            }
        }
        if parsed.start_page.is_none() && i >= rest_start {
            if let Some(token) = page_tag(segment) {
                if !right_after_year || token.bytes().any(|b| b.is_ascii_digit()) {
                    parsed.start_page = Some(token.to_ascii_uppercase());
                }
            }
        }
    }
    parsed
}
