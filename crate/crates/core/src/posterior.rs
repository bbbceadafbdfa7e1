//! Posterior-knowledge dataset construction.
//!
//! For each benchmark query, candidate rewrites are scored *after the fact*:
//! run each candidate against the engine, verify the returned items against
//! the original query, and keep the candidates whose results were densest in
//! relevant items. The winning rewrites become supervised targets — the
//! posterior knowledge (what actually worked) is distilled into pairs that a
//! downstream generator could imitate. This module emits that dataset; no
//! model training happens here.

use crate::catalog::QueryRecord;
use crate::engine::{Index, SearchRequest};
use crate::error::{BnrError, Result};
use crate::expander::enumerate_candidates;
use crate::querylang::{parse, ParsedQuery, RewriteSpec};
use crate::serving::ItemLookup;
use crate::verifier::{verify, Label, UserContext, VerifierConfig};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Default number of rewrites kept per query.
pub const DEFAULT_TOP_K: usize = 4;

/// One candidate with its posterior relevance density.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRewrite {
    pub rewrite: RewriteSpec,
    /// Fraction of the candidate's returned items that the verifier accepts
    /// for the original query; 0 when nothing is returned.
    pub score: f64,
    pub returned_count: usize,
}

/// One emitted supervision record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftRecord {
    pub query: String,
    pub rewrites: Vec<String>,
    pub scores: Vec<f64>,
    /// The k selected rewrites joined by " || " — the generation target.
    pub target: String,
}

/// Scoring/selection parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PosteriorConfig {
    /// Rewrites kept per query.
    pub top_k: usize,
    /// Items fetched per candidate when scoring.
    pub per_candidate_limit: usize,
    /// Power-set enumeration cap.
    pub enum_cap: usize,
    pub verifier: VerifierConfig,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        PosteriorConfig {
            top_k: DEFAULT_TOP_K,
            per_candidate_limit: crate::engine::DEFAULT_LIMIT,
            enum_cap: crate::expander::DEFAULT_ENUM_CAP,
            verifier: VerifierConfig::default(),
        }
    }
}

impl PosteriorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(BnrError::config("top_k must be ≥ 1"));
        }
        if self.per_candidate_limit == 0 {
            return Err(BnrError::config("per_candidate_limit must be ≥ 1"));
        }
        if self.enum_cap == 0 {
            return Err(BnrError::config("enum_cap must be ≥ 1"));
        }
        self.verifier.validate()
    }
}

/// Scores every candidate by running it against the engine and verifying the
/// returned page against the ORIGINAL query. A candidate that relaxes the
/// query can surface items the original query's verifier rejects; those
/// items dilute its score.
pub fn score_candidates(
    q: &ParsedQuery,
    candidates: &[RewriteSpec],
    index: &Index,
    lookup: &ItemLookup<'_>,
    u: &UserContext,
    verifier_cfg: &VerifierConfig,
    per_candidate_limit: usize,
) -> Result<Vec<ScoredRewrite>> {
    if candidates.is_empty() {
        return Err(BnrError::config("no candidates to score"));
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let result = index.search(&SearchRequest {
            rewrite: candidate.clone(),
            limit: per_candidate_limit,
            offset: 0,
        })?;
        let returned_count = result.item_ids.len();
        let score = if returned_count == 0 {
            0.0
        } else {
            let mut relevant = 0usize;
            for &id in &result.item_ids {
                if verify(q, lookup.get(id)?, u, verifier_cfg).label == Label::Relevant {
                    relevant += 1;
                }
            }
            relevant as f64 / returned_count as f64
        };
        scored.push(ScoredRewrite { rewrite: candidate.clone(), score, returned_count });
    }
    Ok(scored)
}

/// Picks the top `k` scored rewrites: sort by (score desc, returned_count
/// desc, canonical string asc), drop candidates equivalent to an earlier
/// pick, take `k`.
pub fn select_topk(scored: &[ScoredRewrite], k: usize) -> Result<Vec<ScoredRewrite>> {
    if k == 0 {
        return Err(BnrError::config("top-k selection needs k ≥ 1"));
    }
    let mut order: Vec<&ScoredRewrite> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(b.returned_count.cmp(&a.returned_count))
            .then_with(|| a.rewrite.serialize().cmp(&b.rewrite.serialize()))
    });
    let mut selected: Vec<ScoredRewrite> = Vec::with_capacity(k);
    let mut seen = std::collections::BTreeSet::new();
    for candidate in order {
        if selected.len() == k {
            break;
        }
        // Canonical serialization equality is exactly query equivalence.
        if seen.insert(candidate.rewrite.serialize()) {
            selected.push(candidate.clone());
        }
    }
    Ok(selected)
}

/// Builds one supervision record for a query: enumerate candidates, score
/// them posterior, keep the top k.
pub fn build_record(
    q: &ParsedQuery,
    index: &Index,
    lookup: &ItemLookup<'_>,
    u: &UserContext,
    cfg: &PosteriorConfig,
) -> Result<SftRecord> {
    let candidates = enumerate_candidates(q, cfg.enum_cap)?;
    let scored =
        score_candidates(q, &candidates, index, lookup, u, &cfg.verifier, cfg.per_candidate_limit)?;
    let selected = select_topk(&scored, cfg.top_k)?;
    let rewrites: Vec<String> = selected.iter().map(|s| s.rewrite.serialize()).collect();
    Ok(SftRecord {
        query: q.serialize(),
        target: rewrites.join(" || "),
        scores: selected.iter().map(|s| s.score).collect(),
        rewrites,
    })
}

/// Runs the full pipeline over a benchmark and writes one JSONL record per
/// query, in benchmark order.
pub fn build_sft_dataset(
    benchmark: &[QueryRecord],
    index: &Index,
    lookup: &ItemLookup<'_>,
    u: &UserContext,
    cfg: &PosteriorConfig,
    out_path: &Path,
) -> Result<Vec<SftRecord>> {
    cfg.validate()?;
    if benchmark.is_empty() {
        return Err(BnrError::config("benchmark is empty"));
    }
    let mut records = Vec::with_capacity(benchmark.len());
    for (i, entry) in benchmark.iter().enumerate() {
        let q = parse(&entry.query_text)
            .map_err(|e| BnrError::data(format!("benchmark query {i}: {e}")))?;
        records.push(build_record(&q, index, lookup, u, cfg)?);
    }
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| BnrError::data(format!("creating parent of {}: {e}", out_path.display())))?;
    }
    let file = std::fs::File::create(out_path)
        .map_err(|e| BnrError::data(format!("creating {}: {e}", out_path.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    for (i, record) in records.iter().enumerate() {
        serde_json::to_writer(&mut writer, record)
            .map_err(|e| BnrError::data(format!("serializing record for query {i}: {e}")))?;
        writer
            .write_all(b"\n")
            .map_err(|e| BnrError::data(format!("writing record for query {i}: {e}")))?;
    }
    writer.flush().map_err(|e| BnrError::data(format!("flushing {}: {e}", out_path.display())))?;
    Ok(records)
}

/// Reads a JSONL dataset back, validating record shape.
pub fn read_sft_dataset(path: &Path) -> Result<Vec<SftRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SftRecord = serde_json::from_str(line)
            .map_err(|e| BnrError::data(format!("{} line {}: {e}", path.display(), lineno + 1)))?;
        if record.rewrites.len() != record.scores.len() {
            return Err(BnrError::data(format!(
                "{} line {}: {} rewrites but {} scores",
                path.display(),
                lineno + 1,
                record.rewrites.len(),
                record.scores.len()
            )));
        }
        records.push(record);
    }
    Ok(records)
}
