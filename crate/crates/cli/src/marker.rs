//! Addressing clusters from the command line: by id, or with an
//! `AUTHOR/RPY/SOURCE-PREFIX` matcher.

use std::collections::BTreeSet;

use refspect_core::reference::{normalize_text, ClusterId, ClusterTable, ParsedReference};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matcher {
    author: String,
    year: Option<i32>,
    source_prefix: String,
}

impl Matcher {
    pub fn parse(spec: &str) -> Result<Matcher, String> {
        let mut parts = spec.splitn(3, '/');
        let author = normalize_text(parts.next().unwrap_or(""));
        let year = match parts.next().map(str::trim) {
            None | Some("") => None,
            Some(y) => Some(y.parse().map_err(|_| format!("`{y}` is not a year in matcher `{spec}`"))?),
        };
        let source_prefix = normalize_text(parts.next().unwrap_or(""));
        if author.is_empty() && year.is_none() && source_prefix.is_empty() {
            return Err(format!("matcher `{spec}` is empty"));
        }
        Ok(Matcher {
            author,
            year,
            source_prefix,
        })
    }

    fn matches_variant(&self, r: &ParsedReference) -> bool {
        let author_ok = self.author.is_empty()
            || r.author_norm == self.author
            || r.author_norm
                .strip_prefix(&self.author)
                .is_some_and(|rest| rest.starts_with(' '));
        let source_ok = self.source_prefix.is_empty()
            || r.source_norm.as_deref().is_some_and(|s| s.starts_with(&self.source_prefix));
        author_ok && source_ok
    }

    /// Positions of the clusters with a matching variant and year.
    pub fn find(&self, table: &ClusterTable) -> Vec<usize> {
        let mut hits = BTreeSet::new();
        for (pos, cluster) in table.clusters().iter().enumerate() {
            if self.year.is_some() && cluster.effective_rpy != self.year {
                continue;
            }
            if cluster.variants.iter().any(|v| self.matches_variant(table.index().get(*v))) {
                hits.insert(pos);
            }
        }
        hits.into_iter().collect()
    }
}

/// Resolves `spec` to one live cluster. Specs containing `/` are matchers;
/// anything else is a cluster id. Several matches are listed and rejected.
pub fn resolve(table: &ClusterTable, spec: &str) -> Result<ClusterId, String> {
    if !spec.contains('/') {
        return table.resolve(&ClusterId::from(spec)).map_err(|e| e.to_string());
    }
    let hits = Matcher::parse(spec)?.find(table);
    match hits.as_slice() {
        [] => Err(format!("no cluster matches `{spec}`")),
        [pos] => Ok(table.clusters()[*pos].id.clone()),
        many => {
            let mut msg = format!("`{spec}` matches {} clusters; pass one of these ids:", many.len());
            for pos in many {
                let c = &table.clusters()[*pos];
                let year = c.effective_rpy.map(|y| y.to_string()).unwrap_or_else(|| "-".into());
                msg.push_str(&format!("\n  {}  {}  {}", c.id, year, table.canonical(c).raw_text));
            }
            Err(msg)
        }
    }
}
