//! End-to-end acceptance suite.
//!
//! Each test checks one shipped guarantee against an independent oracle or a
//! measured margin and prints a single `ACCEPTANCE <nn> PASS — …` line with
//! the numbers it verified. A failing assertion therefore means the
//! corresponding guarantee is broken, not that a tolerance needs loosening.
//!
//! Fixtures are seeded and shared: the 10k-item reference catalog and the
//! benchmarks derived from it are built once per test binary. The seeds below
//! are committed — the directional margins (07, 08) are measured on exactly
//! these seeds.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Instant;

use bnr_core::catalog::{
    build_query_benchmark, generate_catalog, reference_schema, Catalog, CatalogSpec, Item,
    QueryRecord,
};
use bnr_core::engine::{build_index, Index, SearchRequest, SearchResult};
use bnr_core::expander::{
    enumerate_candidates, policy_log_prob, policy_sample, Expander, PolicyParams, RewriteSet,
};
use bnr_core::querylang::{parse, Constraint, ParsedQuery, RewriteSpec};
use bnr_core::rewards::{RewardMode, RewardReport};
use bnr_core::rlopt::{
    compute_advantages, grpo_objective, gspo_objective, reinforcepp_objective, train, Algorithm,
    Group, OptimizerConfig, Rollout, TrainEnv,
};
use bnr_core::serving::{
    allocate_budget, broaden, evaluate_rewrite_set, run_session, CandidatePool, ItemLookup,
    PipelineConfig,
};
use bnr_core::verifier::{
    batch_verify, batch_verify_instrumented, verify, Label, UserContext, VerifierConfig,
    VerifierMode,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Committed fixture seeds. The margin tests (07, 08) are calibrated on these
// exact values; changing them requires re-measuring the margins.
const CATALOG_SEED: u64 = 17;
const BENCH_L3_SEED: u64 = 23;
const BENCH_L2_SEED: u64 = 29;
const BENCH_L1_SEED: u64 = 31;
const TRAIN_CATALOG_SEED: u64 = 41;
const TRAIN_BENCH_SEED: u64 = 43;
const TRAIN_OPT_SEED: u64 = 7;

fn reference_catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(|| {
        generate_catalog(&CatalogSpec {
            num_items: 10_000,
            schema: reference_schema(),
            seed: CATALOG_SEED,
        })
        .expect("reference catalog generates")
    })
}

fn reference_index() -> &'static Index {
    static INDEX: OnceLock<Index> = OnceLock::new();
    INDEX.get_or_init(|| build_index(reference_catalog()).expect("reference index builds"))
}

/// The committed 200-query over-constrained benchmark the directional test
/// runs on.
fn bench_l3() -> &'static Vec<QueryRecord> {
    static BENCH: OnceLock<Vec<QueryRecord>> = OnceLock::new();
    BENCH.get_or_init(|| {
        build_query_benchmark(reference_catalog(), 200, 3, BENCH_L3_SEED)
            .expect("level-3 benchmark builds")
    })
}

fn parse_bench(records: &[QueryRecord]) -> Vec<ParsedQuery> {
    records.iter().map(|r| parse(&r.query_text).expect("benchmark query parses")).collect()
}

// ---------------------------------------------------------------------------
// 01 — engine vs brute-force scan
// ---------------------------------------------------------------------------

/// Independent predicate: a straight re-statement of the engine's documented
/// matching semantics, evaluated by linear scan instead of posting lists.
fn scan_matches(item: &Item, rewrite: &RewriteSpec) -> bool {
    if item.category != rewrite.core() {
        return false;
    }
    rewrite.constraints().iter().all(|c| match c {
        Constraint::Attr { key, value } => item.attributes.get(key).map_or(false, |v| v == value),
        Constraint::Range { key, lo, hi } => {
            item.numeric.get(key).map_or(false, |v| *lo <= *v && *v <= *hi)
        }
        Constraint::Neg { key, value } => item.attributes.get(key).map_or(true, |v| v != value),
        Constraint::Soft { token } => item.tags.iter().any(|t| t == token),
    })
}

/// Linear-scan search: filter, rank ascending by item id, page.
fn scan_search(catalog: &Catalog, rewrite: &RewriteSpec, limit: usize, offset: usize) -> SearchResult {
    let mut ids: Vec<u64> =
        catalog.items.iter().filter(|it| scan_matches(it, rewrite)).map(|it| it.id).collect();
    ids.sort_unstable();
    let total_matches = ids.len();
    let start = offset.min(total_matches);
    let end = offset.saturating_add(limit).min(total_matches);
    SearchResult { item_ids: ids[start..end].to_vec(), total_matches }
}

/// Draws one random engine-compatible rewrite from the schema: mostly valid
/// vocabulary, with a deliberate share of unknown categories, unknown
/// attribute values, and never-tagged soft tokens.
fn random_rewrite(schema: &bnr_core::catalog::CatalogSchema, rng: &mut ChaCha8Rng) -> RewriteSpec {
    loop {
        let cat = if rng.random::<f64>() < 0.92 {
            schema.categories[rng.random_range(0..schema.categories.len())].clone()
        } else {
            // Unknown category: still needs a syntactically valid core.
            let donor = schema.categories[rng.random_range(0..schema.categories.len())].clone();
            bnr_core::catalog::CategorySchema { name: "phantomcat".into(), ..donor }
        };
        let mut constraints = Vec::new();
        for _ in 0..rng.random_range(0..=4u32) {
            match rng.random_range(0..4u32) {
                0 => {
                    let attr = &cat.attributes[rng.random_range(0..cat.attributes.len())];
                    let value = if rng.random::<f64>() < 0.85 {
                        attr.values[rng.random_range(0..attr.values.len())].clone()
                    } else {
                        "notavalue".to_string()
                    };
                    constraints.push(Constraint::Attr { key: attr.key.clone(), value });
                }
                1 if !cat.numeric.is_empty() => {
                    let spec = &cat.numeric[rng.random_range(0..cat.numeric.len())];
                    let width = spec.hi - spec.lo;
                    let mut a = spec.lo + rng.random::<f64>() * width * 1.2 - width * 0.1;
                    let mut b = spec.lo + rng.random::<f64>() * width * 1.2 - width * 0.1;
                    if a > b {
                        std::mem::swap(&mut a, &mut b);
                    }
                    constraints.push(Constraint::Range { key: spec.key.clone(), lo: a, hi: b });
                }
                2 => {
                    let attr = &cat.attributes[rng.random_range(0..cat.attributes.len())];
                    let value = attr.values[rng.random_range(0..attr.values.len())].clone();
                    constraints.push(Constraint::Neg { key: attr.key.clone(), value });
                }
                _ => {
                    let token = if rng.random::<f64>() < 0.8 {
                        cat.soft_vocab[rng.random_range(0..cat.soft_vocab.len())].clone()
                    } else {
                        "zzz-untagged-token".to_string()
                    };
                    constraints.push(Constraint::Soft { token });
                }
            }
        }
        if let Ok(spec) = RewriteSpec::new(&cat.name, constraints) {
            return spec;
        }
        // Duplicate constraints and similar rejections: redraw.
    }
}

#[test]
fn a01_search_matches_brute_force_scan() {
    let started = Instant::now();
    let catalog = reference_catalog();
    let index = reference_index();
    let mut rng = ChaCha8Rng::seed_from_u64(71);

    let mut searches = 0usize;
    for i in 0..1_000 {
        let rewrite = random_rewrite(&catalog.schema, &mut rng);
        let mut pages = vec![(20usize, 0usize), (20, 20)];
        if i % 10 == 0 {
            pages.push((7, 3));
        }
        for (limit, offset) in pages {
            let got = index
                .search(&SearchRequest { rewrite: rewrite.clone(), limit, offset })
                .expect("engine search succeeds");
            let want = scan_search(catalog, &rewrite, limit, offset);
            assert_eq!(
                got, want,
                "engine and linear scan disagree on {:?} (limit {limit}, offset {offset})",
                rewrite.serialize()
            );
            searches += 1;
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "oracle comparison took {elapsed:?}, budget is 30 s");
    println!(
        "ACCEPTANCE 01 PASS — engine output bit-equal to brute-force scan on 1000 seeded \
         rewrites ({searches} paged searches, 10k items) in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 02 — posterior top-k vs independent re-scoring
// ---------------------------------------------------------------------------

#[test]
fn a02_posterior_selection_matches_independent_rescoring() {
    let started = Instant::now();
    let catalog = reference_catalog();
    let index = reference_index();
    let lookup = ItemLookup::new(catalog);
    let user = UserContext::default();
    let cfg = bnr_core::posterior::PosteriorConfig::default();

    let records = build_query_benchmark(catalog, 120, 2, BENCH_L2_SEED).expect("level-2 benchmark");
    let queries: Vec<ParsedQuery> = parse_bench(&records)
        .into_iter()
        .filter(|q| q.constraints().len() <= 8)
        .take(100)
        .collect();
    assert_eq!(queries.len(), 100, "need 100 queries with at most 8 constraints");

    for q in &queries {
        // Independent re-scoring: fresh searches, fresh verification, own
        // sort and own equivalence dedup.
        let candidates = enumerate_candidates(q, cfg.enum_cap).expect("candidates enumerate");
        let mut oracle: Vec<(String, f64, usize)> = Vec::with_capacity(candidates.len());
        for cand in &candidates {
            let result = index
                .search(&SearchRequest {
                    rewrite: cand.clone(),
                    limit: cfg.per_candidate_limit,
                    offset: 0,
                })
                .expect("candidate search succeeds");
            let returned = result.item_ids.len();
            let mut relevant = 0usize;
            for &id in &result.item_ids {
                let item = lookup.get(id).expect("returned id resolves");
                if verify(q, item, &user, &cfg.verifier).label == Label::Relevant {
                    relevant += 1;
                }
            }
            let score = if returned == 0 { 0.0 } else { relevant as f64 / returned as f64 };
            oracle.push((cand.serialize(), score, returned));
        }
        oracle.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite scores")
                .then(b.2.cmp(&a.2))
                .then_with(|| a.0.cmp(&b.0))
        });
        let mut chosen: Vec<(String, f64, usize)> = Vec::new();
        let mut seen = BTreeSet::new();
        for entry in oracle {
            if chosen.len() == cfg.top_k {
                break;
            }
            if seen.insert(entry.0.clone()) {
                chosen.push(entry);
            }
        }

        // Library path, both the staged API and the one-shot record builder.
        let scored = bnr_core::posterior::score_candidates(
            q,
            &candidates,
            index,
            &lookup,
            &user,
            &cfg.verifier,
            cfg.per_candidate_limit,
        )
        .expect("library scoring succeeds");
        let selected =
            bnr_core::posterior::select_topk(&scored, cfg.top_k).expect("selection succeeds");
        assert_eq!(selected.len(), chosen.len(), "selection size differs for {}", q.serialize());
        for (lib, want) in selected.iter().zip(&chosen) {
            assert_eq!(lib.rewrite.serialize(), want.0, "rewrite order differs for {}", q.serialize());
            assert_eq!(lib.score, want.1, "score differs for {}", q.serialize());
            assert_eq!(lib.returned_count, want.2, "returned count differs for {}", q.serialize());
        }

        let record = bnr_core::posterior::build_record(q, index, &lookup, &user, &cfg)
            .expect("record builds");
        let want_rewrites: Vec<String> = chosen.iter().map(|c| c.0.clone()).collect();
        let want_scores: Vec<f64> = chosen.iter().map(|c| c.1).collect();
        assert_eq!(record.query, q.serialize());
        assert_eq!(record.rewrites, want_rewrites);
        assert_eq!(record.scores, want_scores);
        assert_eq!(record.target, want_rewrites.join(" || "));
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "re-scoring took {elapsed:?}, budget is 2 min");
    println!(
        "ACCEPTANCE 02 PASS — posterior top-k selection exactly equals independent re-scoring \
         on 100 benchmark queries in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 03 — reward invariants and hand cases
// ---------------------------------------------------------------------------

/// Builds one random valid pool: 1–5 rewrites, each returning a unique-id page
/// drawn from a small id universe so cross-rewrite duplication is common.
fn random_pool(seed: u64) -> CandidatePool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5usize);
    let mut pool = CandidatePool { n_rewrites: n, ..CandidatePool::default() };
    let mut seen = BTreeSet::new();
    for r in 0..n {
        let count = rng.random_range(0..=10usize);
        let mut mine = BTreeSet::new();
        for _ in 0..count {
            let id = rng.random_range(0..25u64);
            if mine.insert(id) {
                pool.pre_dedup.push((id, r));
                if seen.insert(id) {
                    pool.dedup.push(id);
                }
            }
        }
    }
    for &id in &pool.dedup {
        if rng.random::<f64>() < 0.55 {
            pool.refined.push(id);
        }
    }
    pool.validate().expect("generated pool is structurally valid");
    pool
}

/// Hand pool: rewrite A returns {1,2,3}, B returns {3,4}, accepted {2,3,4}.
fn hand_pool_ic() -> CandidatePool {
    CandidatePool {
        n_rewrites: 2,
        pre_dedup: vec![(1, 0), (2, 0), (3, 0), (3, 1), (4, 1)],
        dedup: vec![1, 2, 3, 4],
        refined: vec![2, 3, 4],
    }
}

#[test]
fn a03_reward_metrics_hold_invariants_and_hand_cases() {
    let mut zero_refined = 0usize;
    let mut duplicate_free = 0usize;
    let mut strict_cases = 0usize;

    for trial in 0..1_000u64 {
        let pool = random_pool(3_000 + trial);
        let report = RewardReport::compute(&pool);

        for metrics in &report.per_rewrite {
            for v in [metrics.p_rel, metrics.p_ic, metrics.harmonic] {
                assert!((0.0..=1.0).contains(&v), "per-rewrite metric {v} outside [0,1]");
            }
        }
        for v in [report.hybrid, report.global, report.effective] {
            assert!((0.0..=1.0).contains(&v), "set metric {v} outside [0,1]");
        }

        // Yield-per-fetch never exceeds pool precision; equality exactly when
        // no rewrite duplicated another's items (given anything was accepted —
        // an empty refined set zeroes both sides regardless of duplication).
        assert!(report.effective <= report.global, "effective exceeded global");
        if pool.dedup.len() == pool.pre_dedup.len() {
            assert_eq!(report.effective, report.global, "disjoint pool must score equally");
            duplicate_free += 1;
        } else if pool.refined.is_empty() {
            assert_eq!(report.effective, 0.0);
            assert_eq!(report.global, 0.0);
            zero_refined += 1;
        } else {
            assert!(
                report.effective < report.global,
                "duplicated pool with accepted items must score strictly lower"
            );
            strict_cases += 1;
        }

        if !pool.pre_dedup.is_empty() {
            let ratio = pool.dedup.len() as f64 / pool.pre_dedup.len() as f64;
            assert!(
                (report.effective - report.global * ratio).abs() <= 1e-12,
                "identity violated: {} vs {}",
                report.effective,
                report.global * ratio
            );
        }
    }
    assert!(zero_refined > 0 && duplicate_free > 0 && strict_cases > 0, "all regimes exercised");

    // Hand case: exclusive-contribution rates 1/2 and 1/2.
    let report = RewardReport::compute(&hand_pool_ic());
    assert_eq!(report.per_rewrite[0].p_ic, 0.5);
    assert_eq!(report.per_rewrite[1].p_ic, 0.5);
    assert_eq!(report.per_rewrite[0].p_rel, 2.0 / 3.0);
    assert_eq!(report.per_rewrite[1].p_rel, 1.0);

    // Fully disjoint, all accepted → every contribution rate is 1.
    let disjoint = CandidatePool {
        n_rewrites: 2,
        pre_dedup: vec![(1, 0), (2, 0), (7, 1), (8, 1)],
        dedup: vec![1, 2, 7, 8],
        refined: vec![1, 2, 7, 8],
    };
    let report = RewardReport::compute(&disjoint);
    assert!(report.per_rewrite.iter().all(|m| m.p_ic == 1.0));
    assert_eq!(report.effective, report.global);

    // Identical result lists → every contribution rate is 0.
    let identical = CandidatePool {
        n_rewrites: 2,
        pre_dedup: vec![(1, 0), (2, 0), (1, 1), (2, 1)],
        dedup: vec![1, 2],
        refined: vec![1, 2],
    };
    let report = RewardReport::compute(&identical);
    assert!(report.per_rewrite.iter().all(|m| m.p_ic == 0.0));
    assert_eq!(report.hybrid, 0.0);

    // Harmonic hand case: precision 0.6, exclusive rate 0.3 → harmonic 0.4.
    // Rewrite A returns ids 0..50 with ids 0..30 accepted; rewrite B re-returns
    // ids 9..30, so A keeps 9 exclusive accepted items: 9/30 = 0.3.
    let mut pre_dedup: Vec<(u64, usize)> = (0..50).map(|id| (id, 0)).collect();
    pre_dedup.extend((9..30).map(|id| (id, 1)));
    let hr_pool = CandidatePool {
        n_rewrites: 2,
        pre_dedup,
        dedup: (0..50).collect(),
        refined: (0..30).collect(),
    };
    hr_pool.validate().expect("hand pool valid");
    let report = RewardReport::compute(&hr_pool);
    assert_eq!(report.per_rewrite[0].p_rel, 0.6);
    assert_eq!(report.per_rewrite[0].p_ic, 0.3);
    assert_eq!(report.per_rewrite[0].harmonic, 2.0 * (0.6 * 0.3) / (0.6 + 0.3));
    assert!((report.per_rewrite[0].harmonic - 0.4).abs() < 1e-12);

    println!(
        "ACCEPTANCE 03 PASS — 1000 random pools hold all reward invariants \
         ({duplicate_free} duplicate-free, {strict_cases} strictly penalized, \
         {zero_refined} zero-accept) and hand-computed cases match"
    );
}

// ---------------------------------------------------------------------------
// 04 — analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

struct FdCase {
    params: PolicyParams,
    old: PolicyParams,
    groups: Vec<Group>,
    cfg: OptimizerConfig,
}

/// Builds one random 2×3 policy pair plus sampled groups. Returns None when
/// any importance ratio sits within 1e-3 of a clip boundary (the surrogate
/// is non-differentiable exactly there, so finite differences are invalid)
/// or a group degenerates.
fn fd_case(seed: u64, algorithm: Algorithm) -> Option<FdCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = parse("cat:c | attr:a=x | soft:alpha | soft:beta").expect("probe query parses");

    let mut old = PolicyParams::zeros(2, 3, 0.9);
    for row in &mut old.logits {
        for v in row.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    let mut params = old.clone();
    for row in &mut params.logits {
        for v in row.iter_mut() {
            *v += rng.random_range(-0.35..0.35);
        }
    }

    let mut groups = Vec::new();
    for g in 0..2u64 {
        let mut rollouts = Vec::new();
        for i in 0..4u64 {
            let (rewrite_set, record) =
                policy_sample(&old, &q, seed.wrapping_mul(97).wrapping_add(g * 10 + i))
                    .expect("policy sample succeeds");
            rollouts.push(Rollout { record, rewrite_set, reward: rng.random::<f64>() });
        }
        let mut group =
            Group { query: q.clone(), rollouts, advantages: Vec::new(), degenerate: false };
        compute_advantages(&mut group, 2.0);
        if group.degenerate {
            return None;
        }
        groups.push(group);
    }

    let cfg = OptimizerConfig { algorithm, kl_beta: 0.05, ..OptimizerConfig::default() };

    // Kink guard: token-level and sequence-level ratios both stay clear of
    // the clip boundaries.
    let eps = cfg.clip_epsilon;
    for group in &groups {
        for rollout in &group.rollouts {
            let new_lp = policy_log_prob(&params, &rollout.record).expect("log-probs evaluate");
            let old_lp = &rollout.record.log_probs;
            let mut mean_delta = 0.0;
            for (n, o) in new_lp.iter().zip(old_lp) {
                let rho = (n - o).exp();
                if (rho - (1.0 + eps)).abs() < 1e-3 || (rho - (1.0 - eps)).abs() < 1e-3 {
                    return None;
                }
                mean_delta += n - o;
            }
            mean_delta /= new_lp.len() as f64;
            let seq_rho = mean_delta.exp();
            if (seq_rho - (1.0 + eps)).abs() < 1e-3 || (seq_rho - (1.0 - eps)).abs() < 1e-3 {
                return None;
            }
        }
    }
    Some(FdCase { params, old, groups, cfg })
}

fn objective_of(case: &FdCase, params: &PolicyParams) -> f64 {
    let (value, _) = match case.cfg.algorithm {
        Algorithm::Grpo => grpo_objective(params, &case.old, &case.groups, &case.cfg),
        Algorithm::Gspo => gspo_objective(params, &case.old, &case.groups, &case.cfg),
        Algorithm::Reinforcepp => reinforcepp_objective(params, &case.old, &case.groups, &case.cfg),
    }
    .expect("objective evaluates");
    value
}

#[test]
fn a04_objective_gradients_match_finite_differences() {
    const H: f64 = 1e-5;
    let mut worst: f64 = 0.0;

    for algorithm in [Algorithm::Grpo, Algorithm::Gspo, Algorithm::Reinforcepp] {
        let mut checked = 0usize;
        let mut seed = 1u64;
        while checked < 10 {
            assert!(seed < 500, "could not find 10 kink-free configurations for {algorithm:?}");
            let Some(case) = fd_case(seed, algorithm) else {
                seed += 1;
                continue;
            };
            seed += 1;
            checked += 1;

            let (_, grad) = match algorithm {
                Algorithm::Grpo => grpo_objective(&case.params, &case.old, &case.groups, &case.cfg),
                Algorithm::Gspo => gspo_objective(&case.params, &case.old, &case.groups, &case.cfg),
                Algorithm::Reinforcepp => {
                    reinforcepp_objective(&case.params, &case.old, &case.groups, &case.cfg)
                }
            }
            .expect("objective evaluates");

            for s in 0..2 {
                for j in 0..3 {
                    let mut up = case.params.clone();
                    up.logits[s][j] += H;
                    let mut down = case.params.clone();
                    down.logits[s][j] -= H;
                    let fd = (objective_of(&case, &up) - objective_of(&case, &down)) / (2.0 * H);
                    let rel = (grad[s][j] - fd).abs() / fd.abs().max(1e-6);
                    worst = worst.max(rel);
                    assert!(
                        rel < 1e-4,
                        "{algorithm:?} gradient [{s}][{j}] off by {rel} (analytic {}, fd {fd})",
                        grad[s][j]
                    );
                }
            }
        }
    }

    println!(
        "ACCEPTANCE 04 PASS — analytic gradients of all three objectives match central finite \
         differences (h = 1e-5) on 10 random 2×3 policies each; max relative error {worst:.3e}"
    );
}

// ---------------------------------------------------------------------------
// 05 — advantage standardization
// ---------------------------------------------------------------------------

fn group_with_rewards(rewards: &[f64]) -> Group {
    let q = parse("cat:c | attr:a=x | soft:alpha | soft:beta").expect("probe query parses");
    let params = PolicyParams::zeros(2, 3, 0.99);
    let rollouts: Vec<Rollout> = rewards
        .iter()
        .enumerate()
        .map(|(i, &reward)| {
            let (rewrite_set, record) =
                policy_sample(&params, &q, i as u64).expect("policy sample succeeds");
            Rollout { record, rewrite_set, reward }
        })
        .collect();
    Group { query: q, rollouts, advantages: Vec::new(), degenerate: false }
}

#[test]
fn a05_advantages_standardize_exactly() {
    // Hand case: {1,0,0,1} → {1,−1,−1,1} exactly (mean 1/2, deviations ±1/2,
    // population std 1/2 — all exact in binary floating point).
    let mut group = group_with_rewards(&[1.0, 0.0, 0.0, 1.0]);
    compute_advantages(&mut group, 2.0);
    assert!(!group.degenerate);
    assert_eq!(group.advantages, vec![1.0, -1.0, -1.0, 1.0]);

    // Constant rewards carry no learning signal: the group is excluded.
    let mut constant = group_with_rewards(&[0.7; 5]);
    compute_advantages(&mut constant, 2.0);
    assert!(constant.degenerate, "constant-reward group must be excluded");
    assert!(constant.advantages.is_empty());

    // Random groups: standardized to zero mean and unit population std
    // before clipping (measured with the clip bound pushed out of reach).
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut checked = 0usize;
    for _ in 0..200 {
        let size = rng.random_range(2..=9usize);
        let rewards: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();

        let mut unclipped = group_with_rewards(&rewards);
        compute_advantages(&mut unclipped, 1e9);
        if unclipped.degenerate {
            continue;
        }
        checked += 1;
        let n = unclipped.advantages.len() as f64;
        let mean = unclipped.advantages.iter().sum::<f64>() / n;
        let var = unclipped.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9, "pre-clip mean {mean} too far from 0");
        assert!((var.sqrt() - 1.0).abs() < 1e-6, "pre-clip std {} too far from 1", var.sqrt());

        let mut clipped = group_with_rewards(&rewards);
        compute_advantages(&mut clipped, 2.0);
        assert!(clipped.advantages.iter().all(|a| a.abs() <= 2.0), "advantage escaped the clip");
    }
    assert!(checked >= 190, "only {checked} of 200 random groups were non-degenerate");

    println!(
        "ACCEPTANCE 05 PASS — {checked} random groups standardized to |mean| < 1e-9 and \
         |std − 1| < 1e-6 pre-clipping; rewards {{1,0,0,1}} map to {{1,−1,−1,1}} exactly; \
         constant groups excluded"
    );
}

// ---------------------------------------------------------------------------
// 06 — broaden/refine vs set oracle, oracle-verifier precision
// ---------------------------------------------------------------------------

#[test]
fn a06_broaden_refine_matches_set_oracle_with_perfect_precision() {
    let catalog = reference_catalog();
    let index = reference_index();
    let lookup = ItemLookup::new(catalog);
    let user = UserContext::default();
    let cfg = PipelineConfig::default();
    let expander = Expander::Enumerative { n: 4 };

    let mut queries = parse_bench(bench_l3());
    let light = build_query_benchmark(catalog, 300, 1, BENCH_L1_SEED).expect("level-1 benchmark");
    queries.extend(parse_bench(&light));
    assert_eq!(queries.len(), 500);

    let mut displayed_total = 0usize;
    let mut sessions_with_display = 0usize;
    for q in &queries {
        // Dedup/union oracle: replay every rewrite's first page by hand and
        // build the expected provenance list, first-occurrence dedup, and
        // union set.
        let (rewrites, pool) = broaden(q, &expander, index, &cfg).expect("broaden succeeds");
        let mut want_pre: Vec<(u64, usize)> = Vec::new();
        let mut want_dedup: Vec<u64> = Vec::new();
        let mut seen = BTreeSet::new();
        for (ri, rewrite) in rewrites.rewrites().iter().enumerate() {
            let result = index
                .search(&SearchRequest {
                    rewrite: rewrite.clone(),
                    limit: cfg.per_rewrite_limit,
                    offset: 0,
                })
                .expect("rewrite search succeeds");
            for id in result.item_ids {
                want_pre.push((id, ri));
                if seen.insert(id) {
                    want_dedup.push(id);
                }
            }
        }
        assert_eq!(pool.pre_dedup, want_pre, "provenance differs for {}", q.serialize());
        assert_eq!(pool.dedup, want_dedup, "dedup order differs for {}", q.serialize());
        let union: BTreeSet<u64> = want_pre.iter().map(|&(id, _)| id).collect();
        assert_eq!(
            pool.dedup.iter().copied().collect::<BTreeSet<_>>(),
            union,
            "dedup set is not the union of rewrite pages for {}",
            q.serialize()
        );

        // Oracle-verifier precision: every displayed item re-verifies as
        // relevant, so displayed precision is exactly 1.0 on every session.
        let report =
            run_session(q, &user, &expander, index, catalog, &cfg).expect("session succeeds");
        assert!(report.displayed.len() <= cfg.page_size);
        assert!(report.displayed.len() <= report.refined_count);
        let mut relevant = 0usize;
        for &id in &report.displayed {
            let item = lookup.get(id).expect("displayed id resolves");
            if verify(q, item, &user, &cfg.verifier).label == Label::Relevant {
                relevant += 1;
            }
        }
        assert_eq!(
            relevant,
            report.displayed.len(),
            "a displayed item failed re-verification for {}",
            q.serialize()
        );
        if !report.displayed.is_empty() {
            sessions_with_display += 1;
            assert_eq!(relevant as f64 / report.displayed.len() as f64, 1.0);
        }
        displayed_total += report.displayed.len();
    }

    println!(
        "ACCEPTANCE 06 PASS — 500 sessions match the dedup/union set oracle; displayed-item \
         precision 1.0 on every session ({sessions_with_display} non-empty pages, \
         {displayed_total} items re-verified)"
    );
}

// ---------------------------------------------------------------------------
// 07 — directional low/zero-result reduction
// ---------------------------------------------------------------------------

#[test]
fn a07_enumerative_pipeline_cuts_low_and_zero_result_rates() {
    let started = Instant::now();
    let catalog = reference_catalog();
    let index = reference_index();
    let user = UserContext::default();
    let cfg = PipelineConfig::default();
    let queries = parse_bench(bench_l3());

    let run = |expander: &Expander| -> (f64, usize) {
        let mut low = 0usize;
        let mut zero = 0usize;
        for q in &queries {
            let report =
                run_session(q, &user, expander, index, catalog, &cfg).expect("session succeeds");
            if report.low_result {
                low += 1;
            }
            if report.refined_count == 0 {
                zero += 1;
            }
        }
        (low as f64 / queries.len() as f64, zero)
    };

    let (lrr_identity, zero_identity) = run(&Expander::Identity);
    let (lrr_enum, zero_enum) = run(&Expander::Enumerative { n: 4 });

    let lrr_gap = lrr_identity - lrr_enum;
    assert!(
        lrr_gap >= 0.10,
        "low-result rate gap {lrr_gap:.4} below 10 points \
         (identity {lrr_identity:.4}, enumerative {lrr_enum:.4})"
    );
    assert!(zero_identity > 0, "baseline produced no zero-result sessions to reduce");
    assert!(
        zero_enum * 2 <= zero_identity,
        "zero-result count only fell from {zero_identity} to {zero_enum}, needs ≥ 50%"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "directional run took {elapsed:?}, budget is 2 min");
    println!(
        "ACCEPTANCE 07 PASS — low-result rate {:.1}% → {:.1}% (gap {:.1} points ≥ 10) and \
         zero-result queries {} → {} (−{:.0}% ≥ 50%) on the committed 200-query benchmark \
         in {elapsed:?}",
        lrr_identity * 100.0,
        lrr_enum * 100.0,
        lrr_gap * 100.0,
        zero_identity,
        zero_enum,
        (1.0 - zero_enum as f64 / zero_identity as f64) * 100.0,
    );
}

// ---------------------------------------------------------------------------
// 08 — training lifts the effective reward
// ---------------------------------------------------------------------------

/// Mean page-0 effective reward of a sampled policy over the benchmark,
/// averaging a few fixed-seed samples per query.
fn mean_policy_effective(
    params: &PolicyParams,
    queries: &[ParsedQuery],
    index: &Index,
    lookup: &ItemLookup<'_>,
    user: &UserContext,
    verifier: &VerifierConfig,
) -> f64 {
    const SAMPLES: u64 = 4;
    let mut total = 0.0;
    for (qi, q) in queries.iter().enumerate() {
        for e in 0..SAMPLES {
            let seed = 0xE0u64 + (qi as u64) * 7919 + e;
            let (rewrite_set, _) = policy_sample(params, q, seed).expect("policy sample succeeds");
            let report = evaluate_rewrite_set(q, user, &rewrite_set, index, lookup, verifier, 20, 20)
                .expect("rollout evaluation succeeds");
            total += report.value(RewardMode::Effective);
        }
    }
    total / (queries.len() as f64 * SAMPLES as f64)
}

#[test]
fn a08_training_lifts_effective_reward_over_baselines() {
    let started = Instant::now();
    let catalog = generate_catalog(&CatalogSpec {
        num_items: 1_500,
        schema: reference_schema(),
        seed: TRAIN_CATALOG_SEED,
    })
    .expect("training catalog generates");
    let index = build_index(&catalog).expect("training index builds");
    let benchmark =
        build_query_benchmark(&catalog, 80, 3, TRAIN_BENCH_SEED).expect("training benchmark");
    let env = TrainEnv::new(&index, &catalog, &benchmark).expect("training environment builds");
    let queries = env.queries.clone();
    let lookup = ItemLookup::new(&catalog);

    // The objective averages each token's term over its group and the batch,
    // so per-cell gradients are on the order of 1e-3; this step size moves
    // logits far enough to polarize the useful columns within 200 steps.
    let cfg = OptimizerConfig {
        algorithm: Algorithm::Gspo,
        reward_mode: RewardMode::Effective,
        steps: 200,
        rollout_batch: 32,
        learning_rate: 5.0,
        seed: TRAIN_OPT_SEED,
        ..OptimizerConfig::default()
    };
    let outcome = train(&env, &cfg, None).expect("training completes");

    // Identity baseline: the query itself as the single rewrite.
    let mut identity_total = 0.0;
    for q in &queries {
        let rewrites = RewriteSet::new(vec![q.to_rewrite()], vec![0.0]).expect("identity set");
        let report =
            evaluate_rewrite_set(q, &env.user, &rewrites, &index, &lookup, &env.verifier, 20, 20)
                .expect("identity evaluation succeeds");
        identity_total += report.value(RewardMode::Effective);
    }
    let identity_mean = identity_total / queries.len() as f64;

    let zero_params =
        PolicyParams::zeros(cfg.n_slots, env.max_constraints(), cfg.temperature);
    let initial_mean =
        mean_policy_effective(&zero_params, &queries, &index, &lookup, &env.user, &env.verifier);
    let final_mean =
        mean_policy_effective(&outcome.params, &queries, &index, &lookup, &env.user, &env.verifier);

    assert!(
        final_mean > identity_mean && final_mean - identity_mean >= 0.03,
        "trained policy {final_mean:.4} does not beat identity {identity_mean:.4} by 0.03"
    );
    assert!(
        final_mean > initial_mean && final_mean - initial_mean >= 0.03,
        "trained policy {final_mean:.4} does not beat initial policy {initial_mean:.4} by 0.03"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600, "training run took {elapsed:?}, budget is 10 min");
    println!(
        "ACCEPTANCE 08 PASS — 200 training steps lift mean effective reward to {final_mean:.4} \
         vs initial {initial_mean:.4} (+{:.4}) and identity {identity_mean:.4} (+{:.4}), \
         both ≥ 0.03, in {elapsed:?}",
        final_mean - initial_mean,
        final_mean - identity_mean,
    );
}

// ---------------------------------------------------------------------------
// 09 — serving contracts
// ---------------------------------------------------------------------------

#[test]
fn a09_serving_contracts_hold() {
    let catalog = reference_catalog();
    let index = reference_index();
    let lookup = ItemLookup::new(catalog);
    let user = UserContext::default();
    let cfg = PipelineConfig::default();
    let expander = Expander::Enumerative { n: 4 };

    // (a) Judgments are invariant across batch sizes — exercised with the
    // noisy verifier, whose flips must depend on (query, item) alone.
    let noisy = VerifierConfig { mode: VerifierMode::Noisy, seed: 5, ..VerifierConfig::default() };
    let queries = parse_bench(&bench_l3()[..30]);
    let mut compared = 0usize;
    let mut largest: Option<(ParsedQuery, Vec<u64>)> = None;
    for q in &queries {
        let (_, pool) = broaden(q, &expander, index, &cfg).expect("broaden succeeds");
        if pool.dedup.is_empty() {
            continue;
        }
        let items: Vec<&Item> =
            pool.dedup.iter().map(|&id| lookup.get(id).expect("id resolves")).collect();
        let j1 = batch_verify(q, &items, &user, &noisy, 1).expect("batch size 1");
        let j7 = batch_verify(q, &items, &user, &noisy, 7).expect("batch size 7");
        let j20 = batch_verify(q, &items, &user, &noisy, 20).expect("batch size 20");
        assert_eq!(j1, j7, "batch sizes 1 and 7 disagree for {}", q.serialize());
        assert_eq!(j1, j20, "batch sizes 1 and 20 disagree for {}", q.serialize());
        compared += items.len();
        if largest.as_ref().map_or(true, |(_, ids)| ids.len() < pool.dedup.len()) {
            largest = Some((q.clone(), pool.dedup.clone()));
        }
    }
    assert!(compared >= 100, "batch-invariance sample too small ({compared} items)");

    // (b) Instrumented batches: same judgments, peak concurrency bounded by
    // the batch size, batches partition the input.
    let (q, ids) = largest.expect("at least one non-empty pool");
    let items: Vec<&Item> = ids.iter().map(|&id| lookup.get(id).expect("id resolves")).collect();
    let reference = batch_verify(&q, &items, &user, &noisy, 1).expect("reference judgments");
    let mut peaks = Vec::new();
    for batch_size in [1usize, 7, 20] {
        let (judgments, stats) = batch_verify_instrumented(&q, &items, &user, &noisy, batch_size)
            .expect("instrumented run succeeds");
        assert_eq!(judgments, reference, "instrumented judgments differ at size {batch_size}");
        assert!(
            stats.peak_in_flight <= batch_size,
            "peak in-flight {} exceeded batch size {batch_size}",
            stats.peak_in_flight
        );
        assert!(stats.batch_sizes.iter().all(|&b| b <= batch_size && b > 0));
        assert_eq!(stats.batch_sizes.iter().sum::<usize>(), items.len());
        peaks.push(stats.peak_in_flight);
    }

    // (c) Budget quotas sum exactly to the budget for arbitrary contribution
    // vectors.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..500 {
        let n = rng.random_range(1..=6usize);
        let mut pool = CandidatePool { n_rewrites: n, ..CandidatePool::default() };
        let mut next_id = 0u64;
        for r in 0..n {
            for _ in 0..rng.random_range(0..=14usize) {
                pool.pre_dedup.push((next_id, r));
                pool.dedup.push(next_id);
                pool.refined.push(next_id);
                next_id += 1;
            }
        }
        pool.validate().expect("contribution pool valid");
        let budget = rng.random_range(n..=n + 240);
        let quotas = allocate_budget(&pool, budget, 1.0).expect("allocation succeeds");
        assert_eq!(quotas.iter().sum::<usize>(), budget, "quotas must sum to the budget");
        assert!(quotas.iter().all(|&q| q >= 1), "every rewrite keeps at least one slot");
    }

    // (d) Adaptive pagination fills the page in a 90%-rejection scenario:
    // only every 10th item carries the required attribute, and the one
    // precise rewrite is engine-blocked (its soft token never appears as a
    // visible tag), so the pipeline must re-fetch deeper pages of the broad
    // rewrite to reach the fill target.
    let schema = bnr_core::catalog::CatalogSchema { categories: vec![], regions: vec![] };
    let items: Vec<Item> = (0..400)
        .map(|id| Item {
            id,
            category: "c".into(),
            title: format!("item {id}"),
            attributes: std::collections::BTreeMap::from([(
                "material".to_string(),
                if id % 10 == 0 { "wool".to_string() } else { "nylon".to_string() },
            )]),
            numeric: std::collections::BTreeMap::from([("price".to_string(), id as f64)]),
            tags: vec!["basic".to_string()],
            region: "any".into(),
            review_text: "soft plush feel".into(),
            ocr_text: String::new(),
        })
        .collect();
    let scenario_catalog = Catalog { schema, items };
    let scenario_index = build_index(&scenario_catalog).expect("scenario index builds");
    let scenario_lookup = ItemLookup::new(&scenario_catalog);
    let q = parse("cat:c | attr:material=wool | soft:plush").expect("scenario query parses");
    let full = q.to_rewrite();
    let core = RewriteSpec::new("c", vec![]).expect("core rewrite");
    let rewrites = RewriteSet::new(vec![full, core], vec![0.0, 0.0]).expect("rewrite set");
    let scenario_cfg = PipelineConfig {
        n_rewrites: 2,
        per_rewrite_limit: 40,
        page_size: 20,
        fill_ratio: 0.5,
        max_refetch: 2,
        ..PipelineConfig::default()
    };
    let page = bnr_core::serving::adaptive_page(
        &q,
        &user,
        &rewrites,
        &scenario_index,
        &scenario_lookup,
        &scenario_cfg,
    )
    .expect("adaptive page succeeds");
    let fill_target = (scenario_cfg.fill_ratio * scenario_cfg.page_size as f64) as usize;
    assert!(page.refetch_count >= 1, "scenario must force at least one re-fetch");
    assert!(
        page.displayed.len() >= fill_target,
        "page fill {} below target {fill_target} after {} re-fetches",
        page.displayed.len(),
        page.refetch_count
    );
    assert!(page.displayed.iter().all(|id| id % 10 == 0), "a rejected item reached the page");

    println!(
        "ACCEPTANCE 09 PASS — {compared} judgments invariant across batch sizes {{1,7,20}} \
         (instrumented peaks {peaks:?} ≤ batch size); 500 quota vectors sum exactly; \
         90%-rejection page filled {}/{fill_target} after {} re-fetch(es)",
        page.displayed.len(),
        page.refetch_count
    );
}

// ---------------------------------------------------------------------------
// 10 — noisy verifier calibration
// ---------------------------------------------------------------------------

#[test]
fn a10_noisy_verifier_calibration_within_tolerance() {
    let catalog = reference_catalog();
    let user = UserContext::default();
    let oracle = VerifierConfig::default();
    let noisy = VerifierConfig { mode: VerifierMode::Noisy, seed: 12, ..VerifierConfig::default() };

    // 20,000 pairs: for every catalog item one constructed-relevant query
    // (its own category, attributes, and a visible tag) and one
    // constructed-irrelevant query (negating an attribute value the item
    // carries). Ground truth is confirmed with the oracle before measuring.
    let mut true_positive = 0usize;
    let mut false_negative = 0usize;
    let mut false_positive = 0usize;
    let mut true_negative = 0usize;
    for item in &catalog.items {
        let mut constraints: Vec<Constraint> = item
            .attributes
            .iter()
            .take(2)
            .map(|(k, v)| Constraint::Attr { key: k.clone(), value: v.clone() })
            .collect();
        if let Some(tag) = item.tags.first() {
            constraints.push(Constraint::Soft { token: tag.clone() });
        }
        let q_relevant =
            ParsedQuery::new(&item.category, constraints).expect("relevant query builds");
        assert_eq!(
            verify(&q_relevant, item, &user, &oracle).label,
            Label::Relevant,
            "constructed-relevant pair failed the oracle for item {}",
            item.id
        );
        match verify(&q_relevant, item, &user, &noisy).label {
            Label::Relevant => true_positive += 1,
            Label::Irrelevant => false_negative += 1,
        }

        let (key, value) = item.attributes.iter().next().expect("items carry attributes");
        let q_irrelevant = ParsedQuery::new(
            &item.category,
            vec![Constraint::Neg { key: key.clone(), value: value.clone() }],
        )
        .expect("irrelevant query builds");
        assert_eq!(
            verify(&q_irrelevant, item, &user, &oracle).label,
            Label::Irrelevant,
            "constructed-irrelevant pair passed the oracle for item {}",
            item.id
        );
        match verify(&q_irrelevant, item, &user, &noisy).label {
            Label::Relevant => false_positive += 1,
            Label::Irrelevant => true_negative += 1,
        }
    }
    let pairs = true_positive + false_negative + false_positive + true_negative;
    assert_eq!(pairs, 20_000, "pair construction must yield exactly 20,000 judgments");

    let measured_recall = true_positive as f64 / (true_positive + false_negative) as f64;
    let measured_precision = true_positive as f64 / (true_positive + false_positive) as f64;
    assert!(
        (measured_precision - 0.87).abs() <= 0.02,
        "measured precision {measured_precision:.4} outside 0.87 ± 0.02"
    );
    assert!(
        (measured_recall - 0.84).abs() <= 0.02,
        "measured recall {measured_recall:.4} outside 0.84 ± 0.02"
    );

    println!(
        "ACCEPTANCE 10 PASS — noisy verifier measured precision {measured_precision:.4} / \
         recall {measured_recall:.4} on 20,000 oracle-confirmed pairs \
         (configured 0.87 / 0.84, tolerance ±0.02)"
    );
}

// ---------------------------------------------------------------------------
// 11 — byte-identical reruns
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str]) {
    let mut argv = vec!["bnr".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let code = bnr_core::cli::run(argv);
    assert_eq!(code, 0, "command {args:?} exited with {code}");
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).expect("output dir readable") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("under root").to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).expect("output file readable")));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn a11_cli_reruns_are_byte_identical() {
    let root = tempfile::tempdir().expect("tempdir");
    let path = |name: &str| root.path().join(name).to_string_lossy().into_owned();

    let corpus_cfg = path("corpus.json");
    std::fs::write(&corpus_cfg, r#"{"num_items": 800, "seed": 3}"#).unwrap();
    let corpus_dir = path("corpus");
    run_cli(&["gen-corpus", "--config", &corpus_cfg, "--out", &corpus_dir]);

    let bench_cfg = path("bench.json");
    std::fs::write(
        &bench_cfg,
        format!(
            r#"{{"corpus_dir": {:?}, "count": 30, "over_constraint_level": 3, "seed": 9}}"#,
            corpus_dir
        ),
    )
    .unwrap();
    let bench_dir = path("bench");
    run_cli(&["gen-benchmark", "--config", &bench_cfg, "--out", &bench_dir]);
    let bench_path = format!("{bench_dir}/benchmark.jsonl");

    // Evaluate twice with a noisy verifier — the stress case for seed
    // plumbing — and demand byte-identical trees.
    let eval_cfg = path("eval.json");
    std::fs::write(
        &eval_cfg,
        format!(
            r#"{{
  "corpus_dir": {corpus_dir:?},
  "benchmark_path": {bench_path:?},
  "pipeline": {{"verifier": {{"mode": "noisy", "seed": 3}}}},
  "variants": [
    {{"name": "identity", "expander": {{"kind": "identity"}}}},
    {{"name": "enum4", "expander": {{"kind": "enumerative", "n": 4}}}}
  ]
}}"#
        ),
    )
    .unwrap();
    let eval_a = path("eval_a");
    let eval_b = path("eval_b");
    run_cli(&["evaluate", "--config", &eval_cfg, "--out", &eval_a]);
    run_cli(&["evaluate", "--config", &eval_cfg, "--out", &eval_b]);
    let bytes_a = dir_bytes(std::path::Path::new(&eval_a));
    let bytes_b = dir_bytes(std::path::Path::new(&eval_b));
    assert!(!bytes_a.is_empty(), "evaluate produced no outputs");
    assert_eq!(
        bytes_a.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        bytes_b.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "evaluate reruns produced different file sets"
    );
    for ((name_a, data_a), (_, data_b)) in bytes_a.iter().zip(&bytes_b) {
        assert_eq!(data_a, data_b, "evaluate rerun differs in {name_a}");
    }
    let eval_files = bytes_a.len();

    // Train twice, short run with checkpoints, same demand.
    let train_cfg = path("train.json");
    std::fs::write(
        &train_cfg,
        format!(
            r#"{{
  "corpus_dir": {corpus_dir:?},
  "benchmark_path": {bench_path:?},
  "optimizer": {{
    "algorithm": "gspo", "reward_mode": "effective", "steps": 4,
    "group_size": 4, "rollout_batch": 4, "learning_rate": 0.5,
    "seed": 5, "save_interval": 2
  }}
}}"#
        ),
    )
    .unwrap();
    let train_a = path("train_a");
    let train_b = path("train_b");
    run_cli(&["train", "--config", &train_cfg, "--out", &train_a]);
    run_cli(&["train", "--config", &train_cfg, "--out", &train_b]);
    let bytes_a = dir_bytes(std::path::Path::new(&train_a));
    let bytes_b = dir_bytes(std::path::Path::new(&train_b));
    assert!(
        bytes_a.iter().any(|(n, _)| n.ends_with("params_final.json")),
        "train produced no final parameters"
    );
    assert_eq!(
        bytes_a.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        bytes_b.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "train reruns produced different file sets"
    );
    for ((name_a, data_a), (_, data_b)) in bytes_a.iter().zip(&bytes_b) {
        assert_eq!(data_a, data_b, "train rerun differs in {name_a}");
    }

    println!(
        "ACCEPTANCE 11 PASS — evaluate ({eval_files} files) and train ({} files) reruns are \
         byte-identical",
        bytes_a.len()
    );
}
