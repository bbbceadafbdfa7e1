//! Rewrite generation.
//!
//! Three expanders share one output type ([`RewriteSet`]):
//!
//! * identity — the query itself, unchanged;
//! * enumerative — the leading slice of the deterministic power-set
//!   enumeration of the query's constraints;
//! * policy — a factorized Bernoulli model: an `n_slots × m_constraints`
//!   logit matrix θ where slot `s` includes constraint `j` with probability
//!   σ(θ[s][j]/temperature). Every inclusion decision is a recorded binary
//!   token with an exact log-probability, which is what makes ratio-based
//!   policy-gradient updates implementable in closed form.

use crate::error::{BnrError, Result};
use crate::querylang::{ParsedQuery, RewriteSpec};
use crate::seeding;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default number of rewrites per set.
pub const DEFAULT_N_REWRITES: usize = 4;
/// Default power-set enumeration cap (exhaustive up to 12 constraints).
pub const DEFAULT_ENUM_CAP: usize = 4096;
/// Default sampling temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.99;

/// An ordered set of rewrites with the per-rewrite sample log-probability
/// under the generating policy (0 for deterministic expanders).
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteSet {
    rewrites: Vec<RewriteSpec>,
    log_probs: Vec<f64>,
}

impl RewriteSet {
    /// Builds a set; every deterministic expander passes log-prob 0 per
    /// rewrite.
    pub fn new(rewrites: Vec<RewriteSpec>, log_probs: Vec<f64>) -> Result<Self> {
        if rewrites.is_empty() {
            return Err(BnrError::config("a rewrite set needs at least one rewrite"));
        }
        if rewrites.len() != log_probs.len() {
            return Err(BnrError::config(format!(
                "{} rewrites but {} log-probs",
                rewrites.len(),
                log_probs.len()
            )));
        }
        let core = rewrites[0].core().to_string();
        if rewrites.iter().any(|r| r.core() != core) {
            return Err(BnrError::config("rewrites in one set must share the query core"));
        }
        Ok(RewriteSet { rewrites, log_probs })
    }

    pub fn rewrites(&self) -> &[RewriteSpec] {
        &self.rewrites
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.rewrites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewrites.is_empty()
    }
}

/// Enumerates rewrite candidates over the power set of the query's
/// constraints.
///
/// With `2^|A| ≤ cap` the enumeration is exhaustive; otherwise a seeded
/// sample of `cap` distinct subsets is drawn, always containing the full
/// constraint set and the core-only rewrite. Either way candidates are
/// ordered by (subset size desc, serialization asc), so the identity rewrite
/// comes first and the core-only rewrite last.
pub fn enumerate_candidates(q: &ParsedQuery, cap: usize) -> Result<Vec<RewriteSpec>> {
    if cap == 0 {
        return Err(BnrError::config("enumeration cap must be ≥ 1"));
    }
    let a = q.constraints();
    let exhaustive = a.len() < usize::BITS as usize && (1usize << a.len()) <= cap.max(2);
    let subset = |mask_bit: &dyn Fn(usize) -> bool| -> Result<RewriteSpec> {
        let chosen: Vec<_> =
            a.iter().enumerate().filter(|(j, _)| mask_bit(*j)).map(|(_, c)| c.clone()).collect();
        RewriteSpec::new(q.core(), chosen)
    };

    let mut candidates: Vec<RewriteSpec> = Vec::new();
    if exhaustive {
        for mask in 0..(1u64 << a.len()) {
            candidates.push(subset(&|j| mask >> j & 1 == 1)?);
        }
    } else {
        // Seeded sample: full set, empty set, then distinct random subsets.
        let mut seen = std::collections::BTreeSet::new();
        let mut rng = seeding::rng(seeding::fnv1a64(q.serialize().as_bytes()), "enumerate", cap as u64);
        let mut push = |spec: RewriteSpec, out: &mut Vec<RewriteSpec>| {
            if seen.insert(spec.serialize()) {
                out.push(spec);
            }
        };
        push(subset(&|_| true)?, &mut candidates);
        push(subset(&|_| false)?, &mut candidates);
        let mut attempts = 0usize;
        while candidates.len() < cap && attempts < cap.saturating_mul(64) {
            attempts += 1;
            let bits: Vec<bool> = (0..a.len()).map(|_| rng.random::<bool>()).collect();
            push(subset(&|j| bits[j])?, &mut candidates);
        }
    }
    candidates.sort_by(|x, y| {
        y.constraints()
            .len()
            .cmp(&x.constraints().len())
            .then_with(|| x.serialize().cmp(&y.serialize()))
    });
    Ok(candidates)
}

/// Deterministic expander: the first `n` candidates of the enumeration
/// ordering (fewer when the power set is smaller than `n`).
pub fn expand_enumerative(q: &ParsedQuery, n: usize) -> Result<RewriteSet> {
    if n == 0 {
        return Err(BnrError::config("rewrite count must be ≥ 1"));
    }
    let mut candidates = enumerate_candidates(q, DEFAULT_ENUM_CAP)?;
    candidates.truncate(n);
    let log_probs = vec![0.0; candidates.len()];
    RewriteSet::new(candidates, log_probs)
}

/// Logistic function.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1 + e^x).
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln σ(x) = −softplus(−x).
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// The trainable factorized policy: logits, temperature, and a frozen
/// reference copy of the initial logits (the KL anchor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub n_slots: usize,
    pub m_constraints: usize,
    pub temperature: f64,
    /// θ, shape n_slots × m_constraints.
    pub logits: Vec<Vec<f64>>,
    /// θ_ref, same shape; frozen at initialization.
    pub reference: Vec<Vec<f64>>,
}

impl PolicyParams {
    /// Fresh all-zero policy: every decision starts at probability 1/2.
    pub fn zeros(n_slots: usize, m_constraints: usize, temperature: f64) -> Self {
        let logits = vec![vec![0.0; m_constraints]; n_slots];
        PolicyParams {
            n_slots,
            m_constraints,
            temperature,
            logits: logits.clone(),
            reference: logits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 || self.m_constraints == 0 {
            return Err(BnrError::config("policy shape must be at least 1×1"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(BnrError::config(format!("temperature {} must be positive", self.temperature)));
        }
        for matrix in [&self.logits, &self.reference] {
            if matrix.len() != self.n_slots
                || matrix.iter().any(|row| row.len() != self.m_constraints)
            {
                return Err(BnrError::config("logit matrix shape does not match declared shape"));
            }
            if matrix.iter().flatten().any(|v| !v.is_finite()) {
                return Err(BnrError::numeric("non-finite policy logit".to_string()));
            }
        }
        Ok(())
    }

    /// Inclusion probability for slot `s`, constraint column `j`.
    pub fn prob(&self, s: usize, j: usize) -> f64 {
        sigmoid(self.logits[s][j] / self.temperature)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let params: PolicyParams = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        params.validate()?;
        Ok(params)
    }
}

/// The recorded binary decisions of one sampled rewrite set, with per-token
/// log-probabilities under the generating parameters. Token order is
/// row-major: slot 0's constraints first, then slot 1's, …
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecord {
    pub n_slots: usize,
    /// Active constraint columns = |A| of the source query.
    pub n_constraints: usize,
    pub decisions: Vec<bool>,
    pub log_probs: Vec<f64>,
}

impl TokenRecord {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Sequence log-probability: Σ per-token log-probs.
    pub fn total_log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }
}

/// Samples a rewrite set from the policy.
///
/// Each of the `n_slots` rewrites includes constraint `j` independently with
/// probability σ(θ[s][j]/T). Queries with fewer constraints than
/// `m_constraints` leave the excess columns inert (no tokens recorded for
/// them); queries with more constraints than columns don't fit the policy and
/// are a contract error.
pub fn policy_sample(
    params: &PolicyParams,
    q: &ParsedQuery,
    seed: u64,
) -> Result<(RewriteSet, TokenRecord)> {
    params.validate()?;
    let a = q.constraints();
    if a.len() > params.m_constraints {
        return Err(BnrError::config(format!(
            "query has {} constraints but the policy has {} columns",
            a.len(),
            params.m_constraints
        )));
    }
    let mut rng = seeding::rng(seed, "policy-sample", 0);
    let mut decisions = Vec::with_capacity(params.n_slots * a.len());
    let mut log_probs = Vec::with_capacity(decisions.capacity());
    let mut rewrites = Vec::with_capacity(params.n_slots);
    let mut set_log_probs = Vec::with_capacity(params.n_slots);
    for s in 0..params.n_slots {
        let mut chosen = Vec::new();
        let mut slot_lp = 0.0;
        for (j, constraint) in a.iter().enumerate() {
            let x = params.logits[s][j] / params.temperature;
            let include = rng.random::<f64>() < sigmoid(x);
            // ln p = ln σ(x) when included, ln(1−σ(x)) = ln σ(−x) otherwise.
            let lp = if include { log_sigmoid(x) } else { log_sigmoid(-x) };
            decisions.push(include);
            log_probs.push(lp);
            slot_lp += lp;
            if include {
                chosen.push(constraint.clone());
            }
        }
        rewrites.push(RewriteSpec::new(q.core(), chosen)?);
        set_log_probs.push(slot_lp);
    }
    let record = TokenRecord {
        n_slots: params.n_slots,
        n_constraints: a.len(),
        decisions,
        log_probs,
    };
    Ok((RewriteSet::new(rewrites, set_log_probs)?, record))
}

/// Recomputes the per-token log-probabilities of a recorded rollout under
/// arbitrary parameters (the old/new/reference evaluations of ratio methods).
/// Evaluated at the generating parameters this reproduces the stored
/// log-probs bit-exactly.
pub fn policy_log_prob(params: &PolicyParams, record: &TokenRecord) -> Result<Vec<f64>> {
    if record.n_slots != params.n_slots || record.n_constraints > params.m_constraints {
        return Err(BnrError::config(format!(
            "token record shape {}×{} does not fit policy {}×{}",
            record.n_slots, record.n_constraints, params.n_slots, params.m_constraints
        )));
    }
    if record.decisions.len() != record.n_slots * record.n_constraints {
        return Err(BnrError::config(format!(
            "token record has {} decisions for shape {}×{}",
            record.decisions.len(),
            record.n_slots,
            record.n_constraints
        )));
    }
    let mut out = Vec::with_capacity(record.decisions.len());
    for s in 0..record.n_slots {
        for j in 0..record.n_constraints {
            let x = params.logits[s][j] / params.temperature;
            let d = record.decisions[s * record.n_constraints + j];
            out.push(if d { log_sigmoid(x) } else { log_sigmoid(-x) });
        }
    }
    Ok(out)
}

/// A configured expander, as selected in pipeline/evaluation configs.
#[derive(Debug, Clone)]
pub enum Expander {
    /// The query itself as the single rewrite.
    Identity,
    /// First `n` power-set candidates.
    Enumerative { n: usize },
    /// Policy samples with per-query derived seeds.
    Policy { params: PolicyParams, seed: u64 },
}

impl Expander {
    /// Produces the rewrite set for a query. Policy expansion derives its
    /// sampling seed from (seed, query), so distinct queries draw
    /// independent samples while the whole run stays reproducible.
    pub fn expand(&self, q: &ParsedQuery) -> Result<RewriteSet> {
        match self {
            Expander::Identity => RewriteSet::new(vec![q.to_rewrite()], vec![0.0]),
            Expander::Enumerative { n } => expand_enumerative(q, *n),
            Expander::Policy { params, seed } => {
                let derived = seeding::derive(*seed, "expand-query", seeding::fnv1a64(q.serialize().as_bytes()));
                Ok(policy_sample(params, q, derived)?.0)
            }
        }
    }
}

/// True when two rewrite sets are slot-wise equivalent under the canonical
/// query equivalence.
pub fn rewrite_sets_equivalent(a: &RewriteSet, b: &RewriteSet) -> bool {
    a.len() == b.len()
        && a.rewrites()
            .iter()
            .zip(b.rewrites())
            .all(|(x, y)| x.serialize() == y.serialize())
}
