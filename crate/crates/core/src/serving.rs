//! The online pipeline: broaden, refine, budget allocation, adaptive
//! pagination, and session reports.
//!
//! Broaden fans the query out into a rewrite set and merges every rewrite's
//! page-0 results into a deduplicated candidate pool (first occurrence wins,
//! provenance recorded). Refine filters the pool through the relevance
//! verifier against the *original* query. When the verified page comes up
//! short, adaptive pagination re-fetches deeper pages under per-rewrite
//! quotas earned by page-0 contribution. The engine stays a black box: the
//! only calls made are `Index::search`.

use crate::catalog::{Catalog, Item};
use crate::engine::{Index, SearchRequest};
use crate::error::{BnrError, Result};
use crate::expander::{Expander, RewriteSet};
use crate::querylang::ParsedQuery;
use crate::rewards::{RewardMode, RewardReport, DEFAULT_LRR_THRESHOLD};
use crate::verifier::{batch_verify, Judgment, Label, UserContext, VerifierConfig};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Merged retrieval results of one rewrite set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidatePool {
    pub n_rewrites: usize,
    /// Every fetched (item id, source rewrite index), duplicates included,
    /// in fetch order — I′_b.
    pub pre_dedup: Vec<(u64, usize)>,
    /// Unique item ids in first-occurrence order — I_b.
    pub dedup: Vec<u64>,
    /// Verifier-accepted subset of `dedup`, order preserved — I_r.
    pub refined: Vec<u64>,
}

impl CandidatePool {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for &id in &self.dedup {
            if !seen.insert(id) {
                return Err(BnrError::data(format!("duplicate item {id} in dedup pool")));
            }
        }
        if self.dedup.len() > self.pre_dedup.len() {
            return Err(BnrError::data("dedup pool larger than pre-dedup pool".to_string()));
        }
        for &(id, source) in &self.pre_dedup {
            if source >= self.n_rewrites {
                return Err(BnrError::data(format!(
                    "provenance index {source} out of range for {} rewrites",
                    self.n_rewrites
                )));
            }
            if !seen.contains(&id) {
                return Err(BnrError::data(format!("pre-dedup item {id} missing from dedup pool")));
            }
        }
        if !self.refined.iter().all(|id| seen.contains(id)) {
            return Err(BnrError::data("refined pool contains items outside dedup".to_string()));
        }
        Ok(())
    }

    /// First-occurrence provenance: which rewrite surfaced each dedup item
    /// first.
    pub fn first_source(&self) -> HashMap<u64, usize> {
        let mut first = HashMap::with_capacity(self.dedup.len());
        for &(id, source) in &self.pre_dedup {
            first.entry(id).or_insert(source);
        }
        first
    }

    fn absorb(&mut self, source: usize, item_ids: &[u64], seen: &mut HashMap<u64, ()>) -> Vec<u64> {
        let mut fresh = Vec::new();
        for &id in item_ids {
            self.pre_dedup.push((id, source));
            if seen.insert(id, ()).is_none() {
                self.dedup.push(id);
                fresh.push(id);
            }
        }
        fresh
    }
}

/// Serving parameters for one pipeline instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Rewrites per query.
    pub n_rewrites: usize,
    /// Per-rewrite page limit K.
    pub per_rewrite_limit: usize,
    /// Displayed page size.
    pub page_size: usize,
    /// Minimum verified fill before the page ships without refetching,
    /// as a fraction of `page_size`.
    pub fill_ratio: f64,
    /// Extra fetch rounds allowed beyond page 0.
    pub max_refetch: usize,
    /// Laplace smoothing for budget allocation.
    pub smoothing_alpha: f64,
    pub reward_mode: RewardMode,
    pub verifier: VerifierConfig,
    /// Verification batch size.
    pub batch_size: usize,
    /// A session counts as low-result when |I_r| falls below this.
    pub lrr_threshold: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_rewrites: 4,
            per_rewrite_limit: crate::engine::DEFAULT_LIMIT,
            page_size: 20,
            fill_ratio: 0.5,
            max_refetch: 2,
            smoothing_alpha: 1.0,
            reward_mode: RewardMode::Hybrid,
            verifier: VerifierConfig::default(),
            batch_size: 20,
            lrr_threshold: DEFAULT_LRR_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rewrites == 0 {
            return Err(BnrError::config("n_rewrites must be ≥ 1"));
        }
        if self.per_rewrite_limit == 0 {
            return Err(BnrError::config("per_rewrite_limit must be ≥ 1"));
        }
        if self.page_size == 0 || self.page_size > self.n_rewrites * self.per_rewrite_limit {
            return Err(BnrError::config(format!(
                "page_size {} must be in 1..=n_rewrites·K = {}",
                self.page_size,
                self.n_rewrites * self.per_rewrite_limit
            )));
        }
        if !(self.fill_ratio > 0.0 && self.fill_ratio <= 1.0) {
            return Err(BnrError::config(format!("fill_ratio {} must be in (0, 1]", self.fill_ratio)));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(BnrError::config(format!(
                "smoothing_alpha {} must be positive and finite",
                self.smoothing_alpha
            )));
        }
        if self.batch_size == 0 {
            return Err(BnrError::config("batch_size must be ≥ 1"));
        }
        if self.lrr_threshold == 0 {
            return Err(BnrError::config("lrr_threshold must be ≥ 1"));
        }
        self.verifier.validate()
    }
}

/// Borrowed id → item index over a catalog, built once and shared across
/// refine calls.
pub struct ItemLookup<'a> {
    map: HashMap<u64, &'a Item>,
}

impl<'a> ItemLookup<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        ItemLookup { map: catalog.items.iter().map(|it| (it.id, it)).collect() }
    }

    pub fn get(&self, id: u64) -> Result<&'a Item> {
        self.map
            .get(&id)
            .copied()
            .ok_or_else(|| BnrError::data(format!("item {id} not present in catalog")))
    }
}

/// Fetches page `offset..offset+limit` of each rewrite and merges the
/// results into a pool (duplicates recorded, dedup first-occurrence).
fn fetch_round(
    pool: &mut CandidatePool,
    seen: &mut HashMap<u64, ()>,
    rewrites: &RewriteSet,
    index: &Index,
    limits: &[usize],
    offsets: &mut [usize],
    totals: &mut [usize],
) -> Result<Vec<u64>> {
    let mut fresh = Vec::new();
    for (i, rewrite) in rewrites.rewrites().iter().enumerate() {
        if limits[i] == 0 || (totals[i] != usize::MAX && offsets[i] >= totals[i]) {
            continue;
        }
        let result = index.search(&SearchRequest {
            rewrite: rewrite.clone(),
            limit: limits[i],
            offset: offsets[i],
        })?;
        totals[i] = result.total_matches;
        offsets[i] += result.item_ids.len();
        fresh.extend(pool.absorb(i, &result.item_ids, seen));
    }
    Ok(fresh)
}

/// Broaden: expand the query and merge every rewrite's page-0 results.
/// Returns the rewrite set alongside the pool so downstream stages can
/// re-fetch deeper pages from the same rewrites.
pub fn broaden(
    q: &ParsedQuery,
    expander: &Expander,
    index: &Index,
    cfg: &PipelineConfig,
) -> Result<(RewriteSet, CandidatePool)> {
    cfg.validate()?;
    let rewrites = expander.expand(q)?;
    let mut pool = CandidatePool { n_rewrites: rewrites.len(), ..CandidatePool::default() };
    let mut seen = HashMap::new();
    let limits = vec![cfg.per_rewrite_limit; rewrites.len()];
    let mut offsets = vec![0usize; rewrites.len()];
    let mut totals = vec![usize::MAX; rewrites.len()];
    fetch_round(&mut pool, &mut seen, &rewrites, index, &limits, &mut offsets, &mut totals)?;
    Ok((rewrites, pool))
}

/// Refine: verify every pooled item against the original query and keep the
/// accepted ones, order preserved. Returns the judgments of all pooled items
/// in dedup order.
pub fn refine(
    pool: &mut CandidatePool,
    q: &ParsedQuery,
    u: &UserContext,
    lookup: &ItemLookup<'_>,
    verifier: &VerifierConfig,
    batch_size: usize,
) -> Result<Vec<Judgment>> {
    let items: Vec<&Item> = pool.dedup.iter().map(|&id| lookup.get(id)).collect::<Result<_>>()?;
    let judgments = batch_verify(q, &items, u, verifier, batch_size)?;
    pool.refined = pool
        .dedup
        .iter()
        .zip(&judgments)
        .filter(|(_, j)| j.label == Label::Relevant)
        .map(|(&id, _)| id)
        .collect();
    Ok(judgments)
}

/// Largest-remainder apportionment of `budget` over smoothed contribution
/// weights, with a floor of one unit each.
fn apportion(contributions: &[usize], budget: usize, alpha: f64) -> Result<Vec<usize>> {
    let n = contributions.len();
    if n == 0 {
        return Err(BnrError::config("cannot apportion a budget over zero rewrites"));
    }
    if budget < n {
        return Err(BnrError::config(format!("budget {budget} cannot give {n} rewrites one unit each")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(BnrError::config(format!("smoothing alpha {alpha} must be positive and finite")));
    }
    let weights: Vec<f64> = contributions.iter().map(|&c| c as f64 + alpha).collect();
    let total: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| budget as f64 * w / total).collect();
    let mut quotas: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let leftover = budget - quotas.iter().sum::<usize>();
    // Award the leftover units by descending fractional remainder; ties go
    // to the lower index so the result is deterministic.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(leftover) {
        quotas[i] += 1;
    }
    // Floor correction: lift zero quotas by taking from the largest.
    while let Some(z) = quotas.iter().position(|&q| q == 0) {
        let donor = (0..n).max_by_key(|&i| (quotas[i], std::cmp::Reverse(i))).unwrap();
        quotas[donor] -= 1;
        quotas[z] += 1;
    }
    debug_assert_eq!(quotas.iter().sum::<usize>(), budget);
    Ok(quotas)
}

/// Allocates a re-fetch budget over rewrites in proportion to smoothed
/// page-0 contributions. A rewrite's contribution is the number of refined
/// items it surfaced first.
pub fn allocate_budget(pool: &CandidatePool, total_budget: usize, alpha: f64) -> Result<Vec<usize>> {
    let first = pool.first_source();
    let mut contributions = vec![0usize; pool.n_rewrites];
    for id in &pool.refined {
        if let Some(&source) = first.get(id) {
            contributions[source] += 1;
        }
    }
    apportion(&contributions, total_budget, alpha)
}

/// One served page: the verified items shown to the user plus everything
/// needed to audit how they were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageResult {
    /// Verified-relevant item ids in pool first-occurrence order, at most
    /// `page_size` of them.
    pub displayed: Vec<u64>,
    /// Judgments for every fetched (deduplicated) item, pool order.
    pub judgments: Vec<Judgment>,
    pub reward: RewardReport,
    /// Extra fetch rounds performed beyond page 0.
    pub refetch_count: usize,
}

/// Serves one page with adaptive re-fetching.
///
/// Page 0 is fetched at the uniform per-rewrite limit and refined. While the
/// verified fill stays below `fill_ratio·page_size`, at least one rewrite
/// has unexhausted matches, and fewer than `max_refetch` extra rounds have
/// run, the pipeline fetches one more round under contribution-proportional
/// quotas (allocated once, after page 0) and verifies only the newly seen
/// items.
pub fn adaptive_page(
    q: &ParsedQuery,
    u: &UserContext,
    rewrites: &RewriteSet,
    index: &Index,
    lookup: &ItemLookup<'_>,
    cfg: &PipelineConfig,
) -> Result<PageResult> {
    cfg.validate()?;
    let n = rewrites.len();
    let mut pool = CandidatePool { n_rewrites: n, ..CandidatePool::default() };
    let mut seen = HashMap::new();
    let mut offsets = vec![0usize; n];
    let mut totals = vec![usize::MAX; n];

    // Page 0: uniform limits.
    let page0_limits = vec![cfg.per_rewrite_limit; n];
    fetch_round(&mut pool, &mut seen, rewrites, index, &page0_limits, &mut offsets, &mut totals)?;
    let mut judged: HashMap<u64, Judgment> = HashMap::new();
    let verify_new = |fresh: &[u64], judged: &mut HashMap<u64, Judgment>| -> Result<()> {
        let items: Vec<&Item> = fresh.iter().map(|&id| lookup.get(id)).collect::<Result<_>>()?;
        for judgment in batch_verify(q, &items, u, &cfg.verifier, cfg.batch_size)? {
            judged.insert(judgment.item_id, judgment);
        }
        Ok(())
    };
    verify_new(&pool.dedup.clone(), &mut judged)?;
    let refresh_refined = |pool: &mut CandidatePool, judged: &HashMap<u64, Judgment>| {
        pool.refined = pool
            .dedup
            .iter()
            .copied()
            .filter(|id| judged.get(id).map(|j| j.label == Label::Relevant).unwrap_or(false))
            .collect();
    };
    refresh_refined(&mut pool, &judged);

    // Quotas are allocated once, from page-0 contributions, and held for
    // every re-fetch round.
    let mut quotas: Option<Vec<usize>> = None;
    let mut refetch_count = 0usize;
    let fill_target = cfg.fill_ratio * cfg.page_size as f64;
    loop {
        let displayed_len = pool.refined.len().min(cfg.page_size);
        let any_unexhausted = (0..n).any(|i| offsets[i] < totals[i]);
        if (displayed_len as f64) >= fill_target
            || !any_unexhausted
            || refetch_count >= cfg.max_refetch
        {
            break;
        }
        if quotas.is_none() {
            quotas = Some(allocate_budget(&pool, n * cfg.per_rewrite_limit, cfg.smoothing_alpha)?);
        }
        let limits = quotas.as_ref().unwrap();
        let fresh = fetch_round(&mut pool, &mut seen, rewrites, index, limits, &mut offsets, &mut totals)?;
        verify_new(&fresh, &mut judged)?;
        refresh_refined(&mut pool, &judged);
        refetch_count += 1;
    }

    let mut displayed = pool.refined.clone();
    displayed.truncate(cfg.page_size);
    let judgments =
        pool.dedup.iter().map(|id| judged.get(id).expect("every pooled item judged").clone()).collect();
    Ok(PageResult { displayed, judgments, reward: RewardReport::compute(&pool), refetch_count })
}

/// Everything the pipeline did for one query, serializable for evaluation
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionReport {
    pub query: String,
    pub rewrites: Vec<String>,
    pub pre_dedup_count: usize,
    pub dedup_count: usize,
    pub refined_count: usize,
    pub reward: RewardReport,
    /// Total fetch rounds (1 for page 0, plus refetches).
    pub pages_fetched: usize,
    pub displayed: Vec<u64>,
    pub judgments: Vec<Judgment>,
    /// True when the session's refined count fell below the configured
    /// threshold.
    pub low_result: bool,
}

/// Runs the full pipeline for one query: broaden → refine → adaptive page 0.
pub fn run_session(
    q: &ParsedQuery,
    u: &UserContext,
    expander: &Expander,
    index: &Index,
    catalog: &Catalog,
    cfg: &PipelineConfig,
) -> Result<SessionReport> {
    cfg.validate().map_err(|e| BnrError::config(format!("configure stage: {e}")))?;
    let rewrites =
        expander.expand(q).map_err(|e| BnrError::data(format!("broaden stage: {e}")))?;
    let lookup = ItemLookup::new(catalog);
    let page = adaptive_page(q, u, &rewrites, index, &lookup, cfg)
        .map_err(|e| BnrError::data(format!("serve stage: {e}")))?;
    let refined_count = page.reward.refined_count;
    Ok(SessionReport {
        query: q.serialize(),
        rewrites: rewrites.rewrites().iter().map(|r| r.serialize()).collect(),
        pre_dedup_count: page.reward.pre_dedup_count,
        dedup_count: page.reward.dedup_count,
        refined_count,
        low_result: refined_count < cfg.lrr_threshold,
        pages_fetched: 1 + page.refetch_count,
        displayed: page.displayed.clone(),
        judgments: page.judgments.clone(),
        reward: page.reward,
    })
}

/// Scores one rewrite set's page-0 broaden→refine pass — the reward signal
/// used by training rollouts. No adaptive refetching: rewards reflect what
/// the rewrites surface on the first page alone.
pub fn evaluate_rewrite_set(
    q: &ParsedQuery,
    u: &UserContext,
    rewrites: &RewriteSet,
    index: &Index,
    lookup: &ItemLookup<'_>,
    verifier: &VerifierConfig,
    per_rewrite_limit: usize,
    batch_size: usize,
) -> Result<RewardReport> {
    let mut pool = CandidatePool { n_rewrites: rewrites.len(), ..CandidatePool::default() };
    let mut seen = HashMap::new();
    let limits = vec![per_rewrite_limit; rewrites.len()];
    let mut offsets = vec![0usize; rewrites.len()];
    let mut totals = vec![usize::MAX; rewrites.len()];
    fetch_round(&mut pool, &mut seen, rewrites, index, &limits, &mut offsets, &mut totals)?;
    refine(&mut pool, q, u, lookup, verifier, batch_size)?;
    Ok(RewardReport::compute(&pool))
}
