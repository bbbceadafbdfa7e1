//! The simulated black-box search engine.
//!
//! Conjunctive matching over an inverted index with a hard per-request result
//! cap: an item is returned for a rewrite iff its category equals the core,
//! every `attr` equals the item's attribute, every `range` contains the
//! item's numeric value, no `neg` value matches, and every `soft` token is
//! among the item's **visible tags** — free text is invisible here, which is
//! exactly the rigidity the expander exists to work around.
//!
//! Ranking is (matched-constraint count desc, item id asc). Under conjunctive
//! semantics every matched item satisfies all constraints, so the count is
//! constant across matches and the effective order is ascending id — kept
//! explicit so pagination and oracle tests are bit-exact.

use crate::catalog::{Catalog, Item};
use crate::error::{BnrError, Result};
use crate::querylang::{Constraint, RewriteSpec};
use std::collections::{BTreeMap, HashMap};

/// Immutable inverted index over a catalog.
#[derive(Debug, Clone)]
pub struct Index {
    category: BTreeMap<String, Vec<u64>>,
    attribute: BTreeMap<(String, String), Vec<u64>>,
    tag: BTreeMap<String, Vec<u64>>,
    numeric: BTreeMap<String, HashMap<u64, f64>>,
    num_items: usize,
}

/// One paged engine call.
#[derive(Debug, Clone)]
pub struct SearchRequest {
    pub rewrite: RewriteSpec,
    /// Result-slot cap K for this request.
    pub limit: usize,
    /// Offset into the ranked match list (page × K).
    pub offset: usize,
}

/// What the engine returns: at most `limit` ids plus the pre-truncation
/// match count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub item_ids: Vec<u64>,
    pub total_matches: usize,
}

/// Default per-request result cap.
pub const DEFAULT_LIMIT: usize = 20;

/// Builds the inverted index. Fails on duplicate item ids.
pub fn build_index(catalog: &Catalog) -> Result<Index> {
    let mut index = Index {
        category: BTreeMap::new(),
        attribute: BTreeMap::new(),
        tag: BTreeMap::new(),
        numeric: BTreeMap::new(),
        num_items: catalog.items.len(),
    };
    let mut seen = std::collections::BTreeSet::new();
    for item in &catalog.items {
        if !seen.insert(item.id) {
            return Err(BnrError::data(format!("duplicate item id {} in catalog", item.id)));
        }
        index.category.entry(item.category.clone()).or_default().push(item.id);
        for (k, v) in &item.attributes {
            index.attribute.entry((k.clone(), v.clone())).or_default().push(item.id);
        }
        for t in &item.tags {
            index.tag.entry(t.clone()).or_default().push(item.id);
        }
        for (k, v) in &item.numeric {
            index.numeric.entry(k.clone()).or_default().insert(item.id, *v);
        }
    }
    for posting in index
        .category
        .values_mut()
        .chain(index.attribute.values_mut())
        .chain(index.tag.values_mut())
    {
        posting.sort_unstable();
        posting.dedup();
    }
    Ok(index)
}

impl Index {
    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Total items indexed under each category (test/report convenience).
    pub fn category_counts(&self) -> impl Iterator<Item = (&str, usize)> {
        self.category.iter().map(|(k, v)| (k.as_str(), v.len()))
    }

    /// Executes one paged conjunctive search.
    ///
    /// An unknown category or attribute value yields an empty result, not an
    /// error — a black-box engine doesn't distinguish "no such value" from
    /// "no stock".
    pub fn search(&self, request: &SearchRequest) -> Result<SearchResult> {
        if request.limit == 0 {
            return Err(BnrError::config("search limit must be ≥ 1"));
        }
        let mut matched: Vec<u64> = match self.category.get(request.rewrite.core()) {
            Some(posting) => posting.clone(),
            None => Vec::new(),
        };
        for constraint in request.rewrite.constraints() {
            if matched.is_empty() {
                break;
            }
            match constraint {
                Constraint::Attr { key, value } => {
                    match self.attribute.get(&(key.clone(), value.clone())) {
                        Some(posting) => intersect_sorted(&mut matched, posting),
                        None => matched.clear(),
                    }
                }
                Constraint::Soft { token } => match self.tag.get(token) {
                    Some(posting) => intersect_sorted(&mut matched, posting),
                    None => matched.clear(),
                },
                Constraint::Neg { key, value } => {
                    if let Some(posting) = self.attribute.get(&(key.clone(), value.clone())) {
                        subtract_sorted(&mut matched, posting);
                    }
                }
                Constraint::Range { key, lo, hi } => match self.numeric.get(key) {
                    Some(column) => matched.retain(|id| {
                        column.get(id).is_some_and(|v| *lo <= *v && *v <= *hi)
                    }),
                    None => matched.clear(),
                },
            }
        }
        // All survivors match every constraint, so the matched-constraint
        // count ties and ascending id decides. `matched` is already sorted:
        // postings are sorted and both set operations preserve order.
        let total_matches = matched.len();
        let start = request.offset.min(total_matches);
        let end = request.offset.saturating_add(request.limit).min(total_matches);
        Ok(SearchResult { item_ids: matched[start..end].to_vec(), total_matches })
    }
}

/// The engine's matching predicate on a single item — the same semantics the
/// index implements, in direct form. Soft tokens check **visible tags only**.
pub fn matches(item: &Item, rewrite: &RewriteSpec) -> bool {
    if item.category != rewrite.core() {
        return false;
    }
    rewrite.constraints().iter().all(|c| match c {
        Constraint::Attr { key, value } => item.attributes.get(key) == Some(value),
        Constraint::Range { key, lo, hi } => {
            item.numeric.get(key).is_some_and(|v| *lo <= *v && *v <= *hi)
        }
        Constraint::Neg { key, value } => item.attributes.get(key) != Some(value),
        Constraint::Soft { token } => item.tags.iter().any(|t| t == token),
    })
}

/// In-place intersection of a sorted id list with a sorted posting.
fn intersect_sorted(acc: &mut Vec<u64>, posting: &[u64]) {
    let mut idx = 0usize;
    acc.retain(|&id| {
        while idx < posting.len() && posting[idx] < id {
            idx += 1;
        }
        idx < posting.len() && posting[idx] == id
    });
}

/// In-place removal of a sorted posting from a sorted id list.
fn subtract_sorted(acc: &mut Vec<u64>, posting: &[u64]) {
    let mut idx = 0usize;
    acc.retain(|&id| {
        while idx < posting.len() && posting[idx] < id {
            idx += 1;
        }
        !(idx < posting.len() && posting[idx] == id)
    });
}
