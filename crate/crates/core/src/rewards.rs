//! Set-level reward metrics for rewrite sets and candidate pools.
//!
//! Per-rewrite metrics score each rewrite's returned page against the
//! verifier's judgments of the *original* query: the relevance ratio P_rel
//! (precision of the page) and the independent-contribution rate P_ic (share
//! of its relevant items no other rewrite returned). Their harmonic mean,
//! averaged over the set, is the hybrid reward — high only for rewrite sets
//! that are simultaneously precise and mutually diverse.
//!
//! Pool-level metrics score the merged session: global reward (precision of
//! the deduplicated union) and effective reward (the same numerator over the
//! pre-deduplication total, which penalizes redundant fetching).

use crate::serving::CandidatePool;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Default low-result threshold: half a default result page.
pub const DEFAULT_LRR_THRESHOLD: usize = 10;

/// One rewrite's page-0 outcome, judged against the original query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerRewriteOutcome {
    pub rewrite_index: usize,
    /// Returned item ids, engine order preserved.
    pub returned: Vec<u64>,
    /// Verifier-accepted subset of `returned`.
    pub relevant: BTreeSet<u64>,
    /// Relevant items no *other* rewrite returned (filled by
    /// [`independent_contribution`]).
    pub exclusive_relevant: BTreeSet<u64>,
}

impl PerRewriteOutcome {
    pub fn new(rewrite_index: usize, returned: Vec<u64>, relevant: BTreeSet<u64>) -> Self {
        PerRewriteOutcome { rewrite_index, returned, relevant, exclusive_relevant: BTreeSet::new() }
    }
}

/// Per-rewrite metric triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerRewriteMetrics {
    pub p_rel: f64,
    pub p_ic: f64,
    pub harmonic: f64,
}

/// All reward metrics of one broaden→refine pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardReport {
    pub per_rewrite: Vec<PerRewriteMetrics>,
    pub hybrid: f64,
    pub global: f64,
    pub effective: f64,
    /// |I′_b|: total fetched across rewrites, duplicates included.
    pub pre_dedup_count: usize,
    /// |I_b|: deduplicated pool size.
    pub dedup_count: usize,
    /// |I_r|: verified-relevant pool size.
    pub refined_count: usize,
}

/// Precision of one rewrite's page: |relevant| / |returned|, 0 for an empty
/// page.
pub fn relevance_ratio(outcome: &PerRewriteOutcome) -> f64 {
    if outcome.returned.is_empty() {
        0.0
    } else {
        outcome.relevant.len() as f64 / outcome.returned.len() as f64
    }
}

/// The exclusive-relevant set of each outcome: relevant items that appear in
/// no other rewrite's returned list.
fn exclusive_sets(outcomes: &[PerRewriteOutcome]) -> Vec<BTreeSet<u64>> {
    let returned_sets: Vec<BTreeSet<u64>> =
        outcomes.iter().map(|o| o.returned.iter().copied().collect()).collect();
    outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            o.relevant
                .iter()
                .copied()
                .filter(|x| {
                    returned_sets.iter().enumerate().all(|(j, set)| j == i || !set.contains(x))
                })
                .collect()
        })
        .collect()
}

fn ic_ratio(outcome: &PerRewriteOutcome, exclusive: &BTreeSet<u64>) -> f64 {
    if outcome.relevant.is_empty() {
        0.0
    } else {
        exclusive.len() as f64 / outcome.relevant.len() as f64
    }
}

/// Fills each outcome's exclusive-relevant set and returns the per-rewrite
/// independent-contribution rates: |exclusive| / |relevant|, 0 when a rewrite
/// has no relevant items.
pub fn independent_contribution(outcomes: &mut [PerRewriteOutcome]) -> Vec<f64> {
    let exclusives = exclusive_sets(outcomes);
    let rates: Vec<f64> =
        outcomes.iter().zip(&exclusives).map(|(o, e)| ic_ratio(o, e)).collect();
    for (o, e) in outcomes.iter_mut().zip(exclusives) {
        o.exclusive_relevant = e;
    }
    rates
}

fn harmonic_term(p_rel: f64, p_ic: f64) -> f64 {
    if p_rel + p_ic == 0.0 {
        0.0
    } else {
        2.0 * p_rel * p_ic / (p_rel + p_ic)
    }
}

/// Mean over rewrites of the harmonic mean of P_rel and P_ic. A term is 0
/// when both rates are 0, so rewrites that return nothing useful — or merely
/// duplicate another rewrite's results — earn nothing.
pub fn hybrid_reward(outcomes: &[PerRewriteOutcome]) -> f64 {
    assert!(!outcomes.is_empty(), "hybrid reward needs at least one rewrite");
    let exclusives = exclusive_sets(outcomes);
    let total: f64 = outcomes
        .iter()
        .zip(&exclusives)
        .map(|(o, e)| harmonic_term(relevance_ratio(o), ic_ratio(o, e)))
        .sum();
    total / outcomes.len() as f64
}

/// Precision of the deduplicated pool: |refined| / |dedup|, 0 when empty.
pub fn global_reward(pool: &CandidatePool) -> f64 {
    if pool.dedup.is_empty() {
        0.0
    } else {
        pool.refined.len() as f64 / pool.dedup.len() as f64
    }
}

/// Relevant yield per fetched item: |refined| / |pre_dedup|, 0 when empty.
/// Equals the global reward when rewrites are fully disjoint and drops below
/// it in proportion to duplication.
pub fn effective_reward(pool: &CandidatePool) -> f64 {
    if pool.pre_dedup.is_empty() {
        0.0
    } else {
        pool.refined.len() as f64 / pool.pre_dedup.len() as f64
    }
}

/// Fraction of sessions whose refined count falls below `threshold`.
pub fn low_result_rate(refined_counts: &[usize], threshold: usize) -> f64 {
    assert!(threshold >= 1, "low-result threshold must be ≥ 1");
    if refined_counts.is_empty() {
        return 0.0;
    }
    let low = refined_counts.iter().filter(|&&c| c < threshold).count();
    low as f64 / refined_counts.len() as f64
}

/// Reconstructs per-rewrite outcomes from a refined pool. A rewrite's
/// returned list is its provenance-tagged slice of the pre-dedup pool; its
/// relevant subset is intersection with the refined set (judgments are
/// item-level, so duplicates inherit the dedup item's label).
pub fn outcomes_from_pool(pool: &CandidatePool) -> Vec<PerRewriteOutcome> {
    let refined: BTreeSet<u64> = pool.refined.iter().copied().collect();
    let mut outcomes: Vec<PerRewriteOutcome> = (0..pool.n_rewrites)
        .map(|i| PerRewriteOutcome::new(i, Vec::new(), BTreeSet::new()))
        .collect();
    for &(item, source) in &pool.pre_dedup {
        outcomes[source].returned.push(item);
        if refined.contains(&item) {
            outcomes[source].relevant.insert(item);
        }
    }
    outcomes
}

impl RewardReport {
    /// Computes the full metric set of a refined pool.
    pub fn compute(pool: &CandidatePool) -> RewardReport {
        let mut outcomes = outcomes_from_pool(pool);
        let p_ic = independent_contribution(&mut outcomes);
        let per_rewrite: Vec<PerRewriteMetrics> = outcomes
            .iter()
            .zip(&p_ic)
            .map(|(o, &ic)| {
                let p_rel = relevance_ratio(o);
                PerRewriteMetrics { p_rel, p_ic: ic, harmonic: harmonic_term(p_rel, ic) }
            })
            .collect();
        RewardReport {
            hybrid: hybrid_reward(&outcomes),
            global: global_reward(pool),
            effective: effective_reward(pool),
            pre_dedup_count: pool.pre_dedup.len(),
            dedup_count: pool.dedup.len(),
            refined_count: pool.refined.len(),
            per_rewrite,
        }
    }

    /// Reward value selected by name, as configured for training.
    pub fn value(&self, mode: RewardMode) -> f64 {
        match mode {
            RewardMode::Hybrid => self.hybrid,
            RewardMode::Global => self.global,
            RewardMode::Effective => self.effective,
        }
    }
}

/// Which scalar a training run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    #[default]
    Hybrid,
    Global,
    Effective,
}

impl std::str::FromStr for RewardMode {
    type Err = crate::BnrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hybrid" => Ok(RewardMode::Hybrid),
            "global" => Ok(RewardMode::Global),
            "effective" => Ok(RewardMode::Effective),
            other => Err(crate::BnrError::config(format!(
                "unknown reward mode {other:?} (expected hybrid, global, or effective)"
            ))),
        }
    }
}
