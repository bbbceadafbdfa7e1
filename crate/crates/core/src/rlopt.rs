//! Policy optimization of the factorized rewrite policy.
//!
//! Training rolls the policy out in groups: for one query, G rewrite sets
//! are sampled, each is pushed through broaden→refine, and the configured
//! set-level reward scores it. Rewards are standardized within the group
//! (no value network), and the policy ascends a clipped importance-ratio
//! surrogate with an exact Bernoulli KL anchor to the reference policy.
//!
//! Three objectives share that skeleton and differ in where the importance
//! ratio and baseline live:
//!
//! * GRPO — token-level ratios, group baseline, KL added once;
//! * GSPO — one sequence-level ratio per rollout (geometric mean of the
//!   token ratios), group baseline, KL added once;
//! * REINFORCE++ — token-level ratios, batch-wide standardization instead
//!   of a group baseline, KL folded into every token's term.
//!
//! Everything is closed-form: the Bernoulli factorization makes the exact
//! gradients small enough to hand-derive, and the tests hold them to a
//! finite-difference oracle.

use crate::catalog::{Catalog, QueryRecord};
use crate::engine::Index;
use crate::error::{BnrError, Result};
use crate::expander::{
    policy_log_prob, policy_sample, rewrite_sets_equivalent, sigmoid, softplus, PolicyParams,
    RewriteSet, TokenRecord, DEFAULT_TEMPERATURE,
};
use crate::querylang::{parse, ParsedQuery};
use crate::rewards::RewardMode;
use crate::serving::{evaluate_rewrite_set, ItemLookup};
use crate::verifier::{UserContext, VerifierConfig};
use crate::seeding;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default group size (rollouts per query).
pub const DEFAULT_GROUP_SIZE: usize = 8;
/// Default surrogate clip width.
pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;
/// Default KL coefficient.
pub const DEFAULT_KL_BETA: f64 = 0.01;
/// Default advantage clip bound.
pub const DEFAULT_ADVANTAGE_CLIP: f64 = 2.0;

/// Which surrogate the training loop ascends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Grpo,
    Gspo,
    Reinforcepp,
}

impl std::str::FromStr for Algorithm {
    type Err = BnrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grpo" => Ok(Algorithm::Grpo),
            "gspo" => Ok(Algorithm::Gspo),
            "reinforcepp" => Ok(Algorithm::Reinforcepp),
            other => Err(BnrError::config(format!(
                "unknown algorithm {other:?} (expected grpo, gspo, or reinforcepp)"
            ))),
        }
    }
}

/// One sampled rewrite set with its recorded decisions and reward. The
/// per-token log-probs inside `record` are the OLD policy's — the policy
/// that generated the sample — and anchor every importance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub record: TokenRecord,
    pub rewrite_set: RewriteSet,
    pub reward: f64,
}

/// G rollouts of one query plus their standardized advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub query: ParsedQuery,
    pub rollouts: Vec<Rollout>,
    /// Per-rollout standardized, clipped advantages; empty until
    /// [`compute_advantages`] runs, and empty again if the group is
    /// degenerate.
    pub advantages: Vec<f64>,
    /// True when the group's rewards had (near-)zero variance.
    pub degenerate: bool,
}

impl Group {
    /// Mean raw reward over the group's rollouts.
    pub fn mean_reward(&self) -> f64 {
        if self.rollouts.is_empty() {
            return 0.0;
        }
        self.rollouts.iter().map(|r| r.reward).sum::<f64>() / self.rollouts.len() as f64
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub reward_mode: RewardMode,
    /// Rollouts per query group (G).
    pub group_size: usize,
    /// Surrogate clip width ε.
    pub clip_epsilon: f64,
    /// KL coefficient β.
    pub kl_beta: f64,
    /// Advantages are clipped to ±this after standardization.
    pub advantage_clip: f64,
    /// Keep only groups whose mean raw reward lies strictly inside
    /// (difficulty_lo, difficulty_hi).
    pub difficulty_lo: f64,
    pub difficulty_hi: f64,
    /// Drop a group when any rewrite set is replicated by at least this
    /// many of its rollouts; None means "the group size".
    pub equivalence_cap: Option<usize>,
    pub learning_rate: f64,
    pub steps: usize,
    /// Queries sampled per training step.
    pub rollout_batch: usize,
    pub seed: u64,
    /// Rewrites per sampled set (policy rows).
    pub n_slots: usize,
    pub temperature: f64,
    /// Write a parameter checkpoint every this many steps (0 disables).
    pub save_interval: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::Grpo,
            reward_mode: RewardMode::Hybrid,
            group_size: DEFAULT_GROUP_SIZE,
            clip_epsilon: DEFAULT_CLIP_EPSILON,
            kl_beta: DEFAULT_KL_BETA,
            advantage_clip: DEFAULT_ADVANTAGE_CLIP,
            difficulty_lo: 0.1,
            difficulty_hi: 0.9,
            equivalence_cap: None,
            learning_rate: 1e-2,
            steps: 200,
            rollout_batch: 64,
            seed: 0,
            n_slots: 4,
            temperature: DEFAULT_TEMPERATURE,
            save_interval: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(BnrError::config(format!("clip_epsilon {} must be in (0, 1)", self.clip_epsilon)));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return Err(BnrError::config(format!("kl_beta {} must be ≥ 0", self.kl_beta)));
        }
        if !(self.advantage_clip > 0.0) {
            return Err(BnrError::config("advantage_clip must be positive"));
        }
        if !(0.0 <= self.difficulty_lo && self.difficulty_lo < self.difficulty_hi && self.difficulty_hi <= 1.0)
        {
            return Err(BnrError::config(format!(
                "difficulty interval [{}, {}] must satisfy 0 ≤ lo < hi ≤ 1",
                self.difficulty_lo, self.difficulty_hi
            )));
        }
        if self.group_size < 2 {
            return Err(BnrError::config("group_size must be ≥ 2"));
        }
        if self.effective_equivalence_cap() < 2 {
            return Err(BnrError::config("equivalence_cap must be ≥ 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BnrError::config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if self.rollout_batch == 0 {
            return Err(BnrError::config("rollout_batch must be ≥ 1"));
        }
        if self.n_slots == 0 {
            return Err(BnrError::config("n_slots must be ≥ 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(BnrError::config(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }

    /// The replication threshold γ; defaults to the group size.
    pub fn effective_equivalence_cap(&self) -> usize {
        self.equivalence_cap.unwrap_or(self.group_size)
    }
}

/// Everything a training run needs besides the optimizer settings: the
/// immutable index, the item lookup for verification, and the query pool.
pub struct TrainEnv<'a> {
    pub index: &'a Index,
    pub lookup: ItemLookup<'a>,
    pub queries: Vec<ParsedQuery>,
    pub user: UserContext,
    /// Reward-side verifier; the oracle by default so optimization quality
    /// is not confounded with judgment noise.
    pub verifier: VerifierConfig,
    /// Items fetched per rewrite when scoring a rollout.
    pub per_rewrite_limit: usize,
    pub verify_batch: usize,
}

impl<'a> TrainEnv<'a> {
    pub fn new(index: &'a Index, catalog: &'a Catalog, benchmark: &[QueryRecord]) -> Result<Self> {
        if benchmark.is_empty() {
            return Err(BnrError::config("training needs a non-empty benchmark"));
        }
        let queries = benchmark
            .iter()
            .enumerate()
            .map(|(i, record)| {
                parse(&record.query_text)
                    .map_err(|e| BnrError::data(format!("benchmark query {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainEnv {
            index,
            lookup: ItemLookup::new(catalog),
            queries,
            user: UserContext::default(),
            verifier: VerifierConfig::default(),
            per_rewrite_limit: crate::engine::DEFAULT_LIMIT,
            verify_batch: 20,
        })
    }

    /// Widest constraint list over the query pool — the policy's column
    /// count.
    pub fn max_constraints(&self) -> usize {
        self.queries.iter().map(|q| q.constraints().len()).max().unwrap_or(0)
    }
}

/// Samples G rollouts of one query under the current policy and scores each
/// rewrite set with a broaden→refine pass.
pub fn rollout_group(
    env: &TrainEnv<'_>,
    q: &ParsedQuery,
    params: &PolicyParams,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<Group> {
    cfg.validate()?;
    let mut rollouts = Vec::with_capacity(cfg.group_size);
    for i in 0..cfg.group_size {
        let (rewrite_set, record) =
            policy_sample(params, q, seeding::derive(seed, "rollout", i as u64))?;
        let report = evaluate_rewrite_set(
            q,
            &env.user,
            &rewrite_set,
            env.index,
            &env.lookup,
            &env.verifier,
            env.per_rewrite_limit,
            env.verify_batch,
        )?;
        rollouts.push(Rollout { record, rewrite_set, reward: report.value(cfg.reward_mode) });
    }
    Ok(Group { query: q.clone(), rollouts, advantages: Vec::new(), degenerate: false })
}

/// Standardizes the group's rewards into advantages: Â = (R − mean)/std
/// with the population std, clipped to ±`clip_bound`. Groups whose std falls
/// below 1e-8 are marked degenerate and carry no advantages.
pub fn compute_advantages(group: &mut Group, clip_bound: f64) {
    let g = group.rollouts.len();
    debug_assert!(g >= 2, "advantage standardization needs at least two rollouts");
    let mean = group.mean_reward();
    let variance =
        group.rollouts.iter().map(|r| (r.reward - mean).powi(2)).sum::<f64>() / g as f64;
    let std = variance.sqrt();
    if std < 1e-8 {
        group.degenerate = true;
        group.advantages.clear();
        return;
    }
    group.degenerate = false;
    group.advantages = group
        .rollouts
        .iter()
        .map(|r| ((r.reward - mean) / std).clamp(-clip_bound, clip_bound))
        .collect();
}

/// Keeps groups whose mean raw reward lies strictly inside (lo, hi):
/// saturated-easy and hopeless queries both carry no learning signal.
pub fn difficulty_filter(groups: Vec<Group>, lo: f64, hi: f64) -> Vec<Group> {
    groups
        .into_iter()
        .filter(|g| {
            let m = g.mean_reward();
            m > lo && m < hi
        })
        .collect()
}

/// Drops groups in which any single rewrite set is replicated by ≥ `gamma`
/// of the rollouts (equivalence judged rewrite-wise on canonical forms) —
/// a collapsed group cannot express a preference between its members.
pub fn equivalence_filter(groups: Vec<Group>, gamma: usize) -> Vec<Group> {
    groups
        .into_iter()
        .filter(|group| {
            !group.rollouts.iter().any(|a| {
                group
                    .rollouts
                    .iter()
                    .filter(|b| rewrite_sets_equivalent(&a.rewrite_set, &b.rewrite_set))
                    .count()
                    >= gamma
            })
        })
        .collect()
}

/// The clipped surrogate for one ratio/advantage pair:
/// min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â).
pub fn surrogate_term(rho: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    (rho * advantage).min(clipped * advantage)
}

/// Whether the surrogate's gradient flows through ρ at this point (the min
/// has not switched to the constant clipped branch).
fn surrogate_active(rho: f64, advantage: f64, epsilon: f64) -> bool {
    if advantage >= 0.0 {
        rho <= 1.0 + epsilon
    } else {
        rho >= 1.0 - epsilon
    }
}

type Grad = Vec<Vec<f64>>;

fn zeros_like(params: &PolicyParams) -> Grad {
    vec![vec![0.0; params.m_constraints]; params.n_slots]
}

/// Exact KL between two Bernoulli distributions given the logits (already
/// divided by temperature) of p and r.
fn bernoulli_kl(x_p: f64, x_r: f64) -> f64 {
    let p = sigmoid(x_p);
    p * (softplus(-x_r) - softplus(-x_p)) + (1.0 - p) * (softplus(x_r) - softplus(x_p))
}

/// d KL / d θ for one cell, where x_p = θ/T and x_r = θ_ref/T.
fn bernoulli_kl_grad(x_p: f64, x_r: f64, temperature: f64) -> f64 {
    let p = sigmoid(x_p);
    (x_p - x_r) * p * (1.0 - p) / temperature
}

/// Mean per-decision KL between the current policy and its frozen reference,
/// with its gradient. Zero exactly when θ = θ_ref; non-negative always.
pub fn policy_kl(params: &PolicyParams) -> (f64, Grad) {
    let t = params.temperature;
    let cells = (params.n_slots * params.m_constraints) as f64;
    let mut grad = zeros_like(params);
    let mut total = 0.0;
    for s in 0..params.n_slots {
        for j in 0..params.m_constraints {
            let x_p = params.logits[s][j] / t;
            let x_r = params.reference[s][j] / t;
            total += bernoulli_kl(x_p, x_r);
            grad[s][j] = bernoulli_kl_grad(x_p, x_r, t) / cells;
        }
    }
    (total / cells, grad)
}

fn check_objective_inputs(
    params: &PolicyParams,
    old: &PolicyParams,
    groups: &[Group],
) -> Result<()> {
    params.validate()?;
    old.validate()?;
    if params.n_slots != old.n_slots
        || params.m_constraints != old.m_constraints
        || params.temperature != old.temperature
    {
        return Err(BnrError::config("current and old policies must share shape and temperature"));
    }
    if groups.is_empty() {
        return Err(BnrError::config("objective needs at least one group"));
    }
    for (gi, group) in groups.iter().enumerate() {
        if group.degenerate {
            return Err(BnrError::config(format!("group {gi} is degenerate; filter it out first")));
        }
        if group.advantages.len() != group.rollouts.len() {
            return Err(BnrError::config(format!(
                "group {gi} has {} advantages for {} rollouts",
                group.advantages.len(),
                group.rollouts.len()
            )));
        }
    }
    Ok(())
}

fn ensure_finite(value: f64, grad: &Grad, what: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(BnrError::numeric(format!("{what}: objective value is not finite")));
    }
    for (s, row) in grad.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            if !g.is_finite() {
                return Err(BnrError::numeric(format!("{what}: gradient[{s}][{j}] is not finite")));
            }
        }
    }
    Ok(())
}

/// GRPO: token-level clipped importance ratios against the group baseline,
/// plus a KL anchor to the reference policy.
///
/// L = mean_groups (1/G) Σ_i (1/|o_i|) Σ_t min(ρ_t·Â_i, clip(ρ_t)·Â_i)
///     − β·KL(π_θ ‖ π_ref)
pub fn grpo_objective(
    params: &PolicyParams,
    old: &PolicyParams,
    groups: &[Group],
    cfg: &OptimizerConfig,
) -> Result<(f64, Grad)> {
    check_objective_inputs(params, old, groups)?;
    let t = params.temperature;
    let mut grad = zeros_like(params);
    let mut total = 0.0;
    for group in groups {
        let g = group.rollouts.len() as f64;
        let mut group_term = 0.0;
        for (rollout, &adv) in group.rollouts.iter().zip(&group.advantages) {
            let record = &rollout.record;
            if record.is_empty() {
                continue;
            }
            let new_lp = policy_log_prob(params, record)?;
            let inv_len = 1.0 / record.len() as f64;
            for (idx, (&lp_new, &lp_old)) in new_lp.iter().zip(&record.log_probs).enumerate() {
                let rho = (lp_new - lp_old).exp();
                group_term += inv_len * surrogate_term(rho, adv, cfg.clip_epsilon);
                if surrogate_active(rho, adv, cfg.clip_epsilon) {
                    let s = idx / record.n_constraints;
                    let j = idx % record.n_constraints;
                    let p = sigmoid(params.logits[s][j] / t);
                    let d = if record.decisions[idx] { 1.0 } else { 0.0 };
                    grad[s][j] +=
                        adv * rho * (d - p) / t * inv_len / (g * groups.len() as f64);
                }
            }
        }
        total += group_term / g;
    }
    let mut value = total / groups.len() as f64;
    if cfg.kl_beta > 0.0 {
        let (kl, kl_grad) = policy_kl(params);
        value -= cfg.kl_beta * kl;
        for s in 0..params.n_slots {
            for j in 0..params.m_constraints {
                grad[s][j] -= cfg.kl_beta * kl_grad[s][j];
            }
        }
    }
    ensure_finite(value, &grad, "grpo")?;
    Ok((value, grad))
}

/// GSPO: one sequence-level ratio per rollout — the geometric mean of its
/// token ratios — clipped once per sequence. Baseline and KL as in GRPO.
pub fn gspo_objective(
    params: &PolicyParams,
    old: &PolicyParams,
    groups: &[Group],
    cfg: &OptimizerConfig,
) -> Result<(f64, Grad)> {
    check_objective_inputs(params, old, groups)?;
    let t = params.temperature;
    let mut grad = zeros_like(params);
    let mut total = 0.0;
    for group in groups {
        let g = group.rollouts.len() as f64;
        let mut group_term = 0.0;
        for (rollout, &adv) in group.rollouts.iter().zip(&group.advantages) {
            let record = &rollout.record;
            if record.is_empty() {
                continue;
            }
            let new_lp = policy_log_prob(params, record)?;
            let inv_len = 1.0 / record.len() as f64;
            let mean_log_ratio: f64 = new_lp
                .iter()
                .zip(&record.log_probs)
                .map(|(&n, &o)| n - o)
                .sum::<f64>()
                * inv_len;
            let seq_ratio = mean_log_ratio.exp();
            group_term += surrogate_term(seq_ratio, adv, cfg.clip_epsilon);
            if surrogate_active(seq_ratio, adv, cfg.clip_epsilon) {
                // d s_i/dθ_{s,j} = s_i · (1/|o_i|) · d lp_{s,j}/dθ_{s,j}.
                for idx in 0..record.len() {
                    let s = idx / record.n_constraints;
                    let j = idx % record.n_constraints;
                    let p = sigmoid(params.logits[s][j] / t);
                    let d = if record.decisions[idx] { 1.0 } else { 0.0 };
                    grad[s][j] += adv * seq_ratio * inv_len * (d - p) / t
                        / (g * groups.len() as f64);
                }
            }
        }
        total += group_term / g;
    }
    let mut value = total / groups.len() as f64;
    if cfg.kl_beta > 0.0 {
        let (kl, kl_grad) = policy_kl(params);
        value -= cfg.kl_beta * kl;
        for s in 0..params.n_slots {
            for j in 0..params.m_constraints {
                grad[s][j] -= cfg.kl_beta * kl_grad[s][j];
            }
        }
    }
    ensure_finite(value, &grad, "gspo")?;
    Ok((value, grad))
}

/// REINFORCE++: token-level clipped ratios with advantages standardized
/// across the whole batch of rollouts (no per-group baseline) and the KL
/// penalty folded into each token's term. A zero-variance batch produces a
/// zero update.
pub fn reinforcepp_objective(
    params: &PolicyParams,
    old: &PolicyParams,
    groups: &[Group],
    cfg: &OptimizerConfig,
) -> Result<(f64, Grad)> {
    check_objective_inputs(params, old, groups)?;
    let t = params.temperature;
    let rewards: Vec<f64> =
        groups.iter().flat_map(|g| g.rollouts.iter().map(|r| r.reward)).collect();
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-8 {
        return Ok((0.0, zeros_like(params)));
    }
    let mut grad = zeros_like(params);
    let mut total = 0.0;
    for group in groups {
        for rollout in &group.rollouts {
            let record = &rollout.record;
            if record.is_empty() {
                continue;
            }
            let adv = ((rollout.reward - mean) / std).clamp(-cfg.advantage_clip, cfg.advantage_clip);
            let new_lp = policy_log_prob(params, record)?;
            let inv_len = 1.0 / record.len() as f64;
            for (idx, (&lp_new, &lp_old)) in new_lp.iter().zip(&record.log_probs).enumerate() {
                let s = idx / record.n_constraints;
                let j = idx % record.n_constraints;
                let x_p = params.logits[s][j] / t;
                let x_r = params.reference[s][j] / t;
                let rho = (lp_new - lp_old).exp();
                let mut term = surrogate_term(rho, adv, cfg.clip_epsilon);
                let p = sigmoid(x_p);
                let d = if record.decisions[idx] { 1.0 } else { 0.0 };
                if surrogate_active(rho, adv, cfg.clip_epsilon) {
                    grad[s][j] += adv * rho * (d - p) / t * inv_len / n;
                }
                if cfg.kl_beta > 0.0 {
                    term -= cfg.kl_beta * bernoulli_kl(x_p, x_r);
                    grad[s][j] -=
                        cfg.kl_beta * bernoulli_kl_grad(x_p, x_r, t) * inv_len / n;
                }
                total += inv_len * term;
            }
        }
    }
    let value = total / n;
    ensure_finite(value, &grad, "reinforcepp")?;
    Ok((value, grad))
}

fn objective(
    algorithm: Algorithm,
    params: &PolicyParams,
    old: &PolicyParams,
    groups: &[Group],
    cfg: &OptimizerConfig,
) -> Result<(f64, Grad)> {
    match algorithm {
        Algorithm::Grpo => grpo_objective(params, old, groups, cfg),
        Algorithm::Gspo => gspo_objective(params, old, groups, cfg),
        Algorithm::Reinforcepp => reinforcepp_objective(params, old, groups, cfg),
    }
}

/// One reward-curve row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvePoint {
    pub step: usize,
    /// Mean raw reward over every rollout sampled this step, before any
    /// filtering.
    pub mean_reward: f64,
    /// Groups that survived all filters and contributed to the update.
    pub kept_groups: usize,
}

/// Renders a curve as CSV with a header row.
pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,mean_reward,kept_groups\n");
    for point in curve {
        out.push_str(&format!("{},{},{}\n", point.step, point.mean_reward, point.kept_groups));
    }
    out
}

/// Writes a curve CSV, creating parent directories.
pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

/// A finished (or aborted) training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub curve: Vec<CurvePoint>,
}

/// Trains the policy: each step samples a batch of queries, rolls out a
/// group per query, filters (equivalence → degeneracy → difficulty), and
/// ascends the configured objective once. Single update per batch means the
/// objective is evaluated on-policy (θ = θ_old); the clip machinery exists
/// for the general contract and is exercised directly in tests.
///
/// Fully deterministic for a fixed (env, cfg). If a parameter turns
/// non-finite the run aborts, saving the last good parameters (and curve so
/// far) to `checkpoint_dir` when one is given.
pub fn train(
    env: &TrainEnv<'_>,
    cfg: &OptimizerConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let m = env.max_constraints();
    if m == 0 {
        return Err(BnrError::config("benchmark queries carry no constraints to rewrite"));
    }
    let mut params = PolicyParams::zeros(cfg.n_slots, m, cfg.temperature);
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut pick = seeding::rng(cfg.seed, "train-batch", step as u64);
        let mut groups = Vec::with_capacity(cfg.rollout_batch);
        for b in 0..cfg.rollout_batch {
            let qi = pick.random_range(0..env.queries.len());
            let group_seed =
                seeding::derive(cfg.seed, "train-group", (step * cfg.rollout_batch + b) as u64);
            groups.push(rollout_group(env, &env.queries[qi], &params, cfg, group_seed)?);
        }
        let sampled_rollouts: usize = groups.iter().map(|g| g.rollouts.len()).sum();
        let mean_reward = groups.iter().map(|g| g.mean_reward() * g.rollouts.len() as f64).sum::<f64>()
            / sampled_rollouts as f64;

        let mut survivors = equivalence_filter(groups, cfg.effective_equivalence_cap());
        for group in &mut survivors {
            compute_advantages(group, cfg.advantage_clip);
        }
        survivors.retain(|g| !g.degenerate);
        let survivors = difficulty_filter(survivors, cfg.difficulty_lo, cfg.difficulty_hi);
        let kept = survivors.len();

        if kept > 0 {
            let old = params.clone();
            let (_, grad) = objective(cfg.algorithm, &params, &old, &survivors, cfg)?;
            for s in 0..params.n_slots {
                for j in 0..params.m_constraints {
                    params.logits[s][j] += cfg.learning_rate * grad[s][j];
                }
            }
            if params.logits.iter().flatten().any(|v| !v.is_finite()) {
                if let Some(dir) = checkpoint_dir {
                    old.save(&dir.join("params_last_good.json"))?;
                    write_curve(&dir.join("curve_partial.csv"), &curve)?;
                }
                return Err(BnrError::numeric(format!(
                    "training diverged at step {}; last good parameters saved",
                    step + 1
                )));
            }
        }
        curve.push(CurvePoint { step: step + 1, mean_reward, kept_groups: kept });
        if cfg.save_interval > 0 && (step + 1) % cfg.save_interval == 0 {
            if let Some(dir) = checkpoint_dir {
                params.save(&dir.join(format!("params_step_{:04}.json", step + 1)))?;
            }
        }
    }
    Ok(TrainOutcome { params, curve })
}
