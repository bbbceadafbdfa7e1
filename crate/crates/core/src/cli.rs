//! The `bnr` command-line front end: batch experiment plumbing that binds
//! corpus generation, benchmark construction, hindsight SFT data, policy
//! training, and evaluation reports.
//!
//! Every subcommand reads a JSON config document (`--config`), applies any
//! flag overrides (`--seed`, `--reward`, `--optimizer`), and — when it
//! produces artifacts — writes the fully resolved config beside them as
//! `resolved_config.json`, so a run can be reproduced from its output
//! directory alone.
//!
//! Exit codes: 0 success; 1 usage error (bad flags or a malformed config
//! document); 2 data error (missing or corrupt input artifacts, runtime
//! failures).

use crate::catalog::{
    build_query_benchmark, generate_catalog, load_corpus, read_benchmark, reference_schema,
    write_benchmark, write_corpus, Catalog, CatalogSpec, QueryRecord,
};
use crate::engine::{build_index, Index, SearchRequest, DEFAULT_LIMIT};
use crate::expander::{Expander, PolicyParams, DEFAULT_N_REWRITES};
use crate::posterior::{build_sft_dataset, PosteriorConfig};
use crate::querylang::parse;
use crate::rewards::RewardMode;
use crate::rlopt::{train, write_curve, Algorithm, OptimizerConfig, TrainEnv};
use crate::serving::{run_session, PipelineConfig, SessionReport};
use crate::verifier::UserContext;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for usage errors: bad flags, malformed config documents.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for data errors: missing or corrupt inputs, runtime failures.
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
enum CliError {
    /// The invocation itself is wrong (flags, config document).
    Usage(String),
    /// Inputs are missing/corrupt or the run failed midway.
    Data(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{context}: {e}"))
}

fn data(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

#[derive(Parser)]
#[command(
    name = "bnr",
    version,
    about = "Broaden-and-refine retrieval: corpus generation, training, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded product catalog into an output directory.
    GenCorpus {
        /// JSON config: {"num_items": 10000, "seed": 0}
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive an over-constrained query benchmark from a catalog.
    GenBenchmark {
        /// JSON config: {"corpus_dir": "...", "count": 200,
        /// "over_constraint_level": 3, "seed": 0}
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a single engine search and print the result as JSON.
    Search {
        /// JSON config: {"corpus_dir": "...", "query": "cat:… | …",
        /// "limit": 20, "offset": 0}
        #[arg(long)]
        config: PathBuf,
        /// Also write result.json (and the resolved config) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score enumerated rewrites in hindsight and write SFT records.
    BuildSft {
        /// JSON config: {"corpus_dir": "...", "benchmark_path": "...",
        /// "posterior": {…}}
        #[arg(long)]
        config: PathBuf,
        /// Overrides the verifier seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the rewrite policy and write the curve + final parameters.
    Train {
        /// JSON config: {"corpus_dir": "...", "benchmark_path": "...",
        /// "optimizer": {…}, "per_rewrite_limit": 20}
        #[arg(long)]
        config: PathBuf,
        /// Overrides the optimizer seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the optimizer algorithm: grpo | gspo | reinforcepp.
        #[arg(long)]
        optimizer: Option<String>,
        /// Overrides the training reward: hybrid | global | effective.
        #[arg(long)]
        reward: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run benchmark sessions for each expander variant and aggregate.
    Evaluate {
        /// JSON config: {"corpus_dir": "...", "benchmark_path": "...",
        /// "pipeline": {…}, "variants": [{"name": "...", "expander": {…}}]}
        #[arg(long)]
        config: PathBuf,
        /// Overrides the pipeline verifier seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the reported reward mode: hybrid | global | effective.
        #[arg(long)]
        reward: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one end-to-end session and print the report as JSON.
    Session {
        /// JSON config: {"corpus_dir": "...", "query": "...",
        /// "pipeline": {…}, "expander": {…}}
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reward: Option<String>,
        /// Also write session.json (and the resolved config) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses argv and runs the selected subcommand, returning the process exit
/// code. Kept in the library so tests can drive the CLI without spawning.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version arrive here too; they are not errors.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("bnr: usage error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            eprintln!("bnr: {msg}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::GenCorpus { config, seed, out } => cmd_gen_corpus(&config, seed, &out),
        Command::GenBenchmark { config, seed, out } => cmd_gen_benchmark(&config, seed, &out),
        Command::Search { config, out } => cmd_search(&config, out.as_deref()),
        Command::BuildSft { config, seed, out } => cmd_build_sft(&config, seed, &out),
        Command::Train { config, seed, optimizer, reward, out } => {
            cmd_train(&config, seed, optimizer.as_deref(), reward.as_deref(), &out)
        }
        Command::Evaluate { config, seed, reward, out } => {
            cmd_evaluate(&config, seed, reward.as_deref(), &out)
        }
        Command::Session { config, seed, reward, out } => {
            cmd_session(&config, seed, reward.as_deref(), out.as_deref())
        }
    }
}

/// Loads and strictly deserializes a JSON config document. Unknown keys are
/// rejected by the target types' `deny_unknown_fields`.
fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(&format!("--config {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| usage(&format!("--config {}", path.display()), e))
}

/// Writes the post-override config beside the run's outputs.
fn write_resolved<T: Serialize>(out_dir: &Path, cfg: &T) -> CliResult<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| data(&out_dir.display().to_string(), e))?;
    let path = out_dir.join("resolved_config.json");
    let text = serde_json::to_string_pretty(cfg)
        .map_err(|e| data("resolved config", e))?;
    std::fs::write(&path, text + "\n").map_err(|e| data(&path.display().to_string(), e))
}

fn parse_reward(flag: &str) -> CliResult<RewardMode> {
    flag.parse::<RewardMode>().map_err(|e| usage("--reward", e))
}

fn parse_algorithm(flag: &str) -> CliResult<Algorithm> {
    flag.parse::<Algorithm>().map_err(|e| usage("--optimizer", e))
}

fn load_corpus_dir(dir: &Path) -> CliResult<Catalog> {
    load_corpus(dir).map_err(|e| data(&format!("corpus {}", dir.display()), e))
}

fn load_benchmark_file(path: &Path) -> CliResult<Vec<QueryRecord>> {
    read_benchmark(path).map_err(|e| data(&format!("benchmark {}", path.display()), e))
}

fn index_for(catalog: &Catalog) -> CliResult<Index> {
    build_index(catalog).map_err(|e| data("index build", e))
}

/// How a config document describes an expander. `params_path` points at a
/// policy parameter JSON written by `train`. Shared with the C bindings,
/// which accept the same JSON shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExpanderSpec {
    Identity,
    Enumerative {
        n: usize,
    },
    Policy {
        params_path: PathBuf,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for ExpanderSpec {
    fn default() -> Self {
        ExpanderSpec::Enumerative { n: DEFAULT_N_REWRITES }
    }
}

impl ExpanderSpec {
    /// Materializes the expander, loading policy parameters when needed.
    pub fn build(&self) -> crate::Result<Expander> {
        match self {
            ExpanderSpec::Identity => Ok(Expander::Identity),
            ExpanderSpec::Enumerative { n } => Ok(Expander::Enumerative { n: *n }),
            ExpanderSpec::Policy { params_path, seed } => {
                let params = PolicyParams::load(params_path).map_err(|e| {
                    crate::BnrError::data(format!(
                        "policy params {}: {e}",
                        params_path.display()
                    ))
                })?;
                Ok(Expander::Policy { params, seed: *seed })
            }
        }
    }
}

// ---------------------------------------------------------------- gen-corpus

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GenCorpusConfig {
    num_items: usize,
    seed: u64,
}

impl Default for GenCorpusConfig {
    fn default() -> Self {
        GenCorpusConfig { num_items: 10_000, seed: 0 }
    }
}

fn cmd_gen_corpus(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut cfg: GenCorpusConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let spec = CatalogSpec { num_items: cfg.num_items, schema: reference_schema(), seed: cfg.seed };
    let catalog = generate_catalog(&spec).map_err(|e| usage("config field num_items", e))?;
    write_corpus(&catalog, out).map_err(|e| data(&out.display().to_string(), e))?;
    write_resolved(out, &cfg)?;
    println!("wrote {} items to {}", catalog.items.len(), out.display());
    Ok(())
}

// ------------------------------------------------------------- gen-benchmark

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenBenchmarkConfig {
    corpus_dir: PathBuf,
    #[serde(default = "default_benchmark_count")]
    count: usize,
    #[serde(default = "default_over_constraint_level")]
    over_constraint_level: u32,
    #[serde(default)]
    seed: u64,
}

fn default_benchmark_count() -> usize {
    200
}

fn default_over_constraint_level() -> u32 {
    3
}

fn cmd_gen_benchmark(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut cfg: GenBenchmarkConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let catalog = load_corpus_dir(&cfg.corpus_dir)?;
    let records =
        build_query_benchmark(&catalog, cfg.count, cfg.over_constraint_level, cfg.seed)
            .map_err(|e| data("benchmark generation", e))?;
    std::fs::create_dir_all(out).map_err(|e| data(&out.display().to_string(), e))?;
    let path = out.join("benchmark.jsonl");
    write_benchmark(&records, &path).map_err(|e| data(&path.display().to_string(), e))?;
    write_resolved(out, &cfg)?;
    println!("wrote {} queries to {}", records.len(), path.display());
    Ok(())
}

// -------------------------------------------------------------------- search

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchConfig {
    corpus_dir: PathBuf,
    query: String,
    #[serde(default = "default_limit")]
    limit: usize,
    #[serde(default)]
    offset: usize,
}

fn default_limit() -> usize {
    DEFAULT_LIMIT
}

#[derive(Debug, Serialize)]
struct SearchOutput {
    query: String,
    item_ids: Vec<u64>,
    total_matches: usize,
}

fn cmd_search(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let cfg: SearchConfig = load_config(config)?;
    let q = parse(&cfg.query).map_err(|e| usage("config field query", e))?;
    let catalog = load_corpus_dir(&cfg.corpus_dir)?;
    let index = index_for(&catalog)?;
    let result = index
        .search(&SearchRequest { rewrite: q.to_rewrite(), limit: cfg.limit, offset: cfg.offset })
        .map_err(|e| data("search", e))?;
    let output = SearchOutput {
        query: q.serialize(),
        item_ids: result.item_ids,
        total_matches: result.total_matches,
    };
    let text = serde_json::to_string_pretty(&output).map_err(|e| data("search output", e))?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| data(&dir.display().to_string(), e))?;
        std::fs::write(dir.join("result.json"), text + "\n")
            .map_err(|e| data("result.json", e))?;
        write_resolved(dir, &cfg)?;
    }
    Ok(())
}

// ----------------------------------------------------------------- build-sft

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildSftConfig {
    corpus_dir: PathBuf,
    benchmark_path: PathBuf,
    #[serde(default)]
    posterior: PosteriorConfig,
}

fn cmd_build_sft(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut cfg: BuildSftConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.posterior.verifier.seed = s;
    }
    cfg.posterior.validate().map_err(|e| usage("config field posterior", e))?;
    let catalog = load_corpus_dir(&cfg.corpus_dir)?;
    let benchmark = load_benchmark_file(&cfg.benchmark_path)?;
    let index = index_for(&catalog)?;
    let lookup = crate::serving::ItemLookup::new(&catalog);
    std::fs::create_dir_all(out).map_err(|e| data(&out.display().to_string(), e))?;
    let path = out.join("sft.jsonl");
    let records = build_sft_dataset(
        &benchmark,
        &index,
        &lookup,
        &UserContext::default(),
        &cfg.posterior,
        &path,
    )
    .map_err(|e| data("sft construction", e))?;
    write_resolved(out, &cfg)?;
    println!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

// --------------------------------------------------------------------- train

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfig {
    corpus_dir: PathBuf,
    benchmark_path: PathBuf,
    #[serde(default)]
    optimizer: OptimizerConfig,
    /// Items fetched per rewrite when scoring rollouts.
    #[serde(default = "default_limit")]
    per_rewrite_limit: usize,
}

fn cmd_train(
    config: &Path,
    seed: Option<u64>,
    optimizer: Option<&str>,
    reward: Option<&str>,
    out: &Path,
) -> CliResult<()> {
    let mut cfg: TrainConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.optimizer.seed = s;
    }
    if let Some(flag) = optimizer {
        cfg.optimizer.algorithm = parse_algorithm(flag)?;
    }
    if let Some(flag) = reward {
        cfg.optimizer.reward_mode = parse_reward(flag)?;
    }
    cfg.optimizer.validate().map_err(|e| usage("config field optimizer", e))?;
    if cfg.per_rewrite_limit == 0 {
        return Err(CliError::Usage("config field per_rewrite_limit: must be ≥ 1".to_string()));
    }
    let catalog = load_corpus_dir(&cfg.corpus_dir)?;
    let benchmark = load_benchmark_file(&cfg.benchmark_path)?;
    let index = index_for(&catalog)?;
    let mut env = TrainEnv::new(&index, &catalog, &benchmark)
        .map_err(|e| data("training environment", e))?;
    env.per_rewrite_limit = cfg.per_rewrite_limit;
    write_resolved(out, &cfg)?;
    let outcome = train(&env, &cfg.optimizer, Some(&out.join("checkpoints")))
        .map_err(|e| data("training", e))?;
    outcome
        .params
        .save(&out.join("params_final.json"))
        .map_err(|e| data("params_final.json", e))?;
    write_curve(&out.join("curve.csv"), &outcome.curve).map_err(|e| data("curve.csv", e))?;
    let last = outcome.curve.last().map(|p| p.mean_reward).unwrap_or(0.0);
    println!(
        "trained {} steps; final mean reward {last}; outputs in {}",
        outcome.curve.len(),
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------------------ evaluate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantSpec {
    name: String,
    expander: ExpanderSpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateConfig {
    corpus_dir: PathBuf,
    benchmark_path: PathBuf,
    #[serde(default)]
    pipeline: PipelineConfig,
    #[serde(default = "default_variants")]
    variants: Vec<VariantSpec>,
}

fn default_variants() -> Vec<VariantSpec> {
    vec![
        VariantSpec { name: "identity".to_string(), expander: ExpanderSpec::Identity },
        VariantSpec {
            name: "enumerative".to_string(),
            expander: ExpanderSpec::Enumerative { n: DEFAULT_N_REWRITES },
        },
    ]
}

/// One aggregate row of the evaluation report; means are plain arithmetic
/// means over the per-query session reports, so every figure is recomputable
/// from the JSONL beside it.
#[derive(Debug, Clone, Serialize)]
struct AggregateRow {
    variant: String,
    queries: usize,
    mean_hybrid: f64,
    mean_global: f64,
    mean_effective: f64,
    /// Fraction of sessions whose refined count fell below the threshold.
    low_result_rate: f64,
    /// Sessions that displayed nothing at all.
    zero_results: usize,
}

fn aggregate(variant: &str, sessions: &[SessionReport]) -> AggregateRow {
    let n = sessions.len();
    let mean = |f: &dyn Fn(&SessionReport) -> f64| {
        if n == 0 {
            0.0
        } else {
            sessions.iter().map(|s| f(s)).sum::<f64>() / n as f64
        }
    };
    AggregateRow {
        variant: variant.to_string(),
        queries: n,
        mean_hybrid: mean(&|s| s.reward.hybrid),
        mean_global: mean(&|s| s.reward.global),
        mean_effective: mean(&|s| s.reward.effective),
        low_result_rate: mean(&|s| if s.low_result { 1.0 } else { 0.0 }),
        zero_results: sessions.iter().filter(|s| s.refined_count == 0).count(),
    }
}

const AGGREGATE_HEADER: &str =
    "variant,queries,mean_hybrid,mean_global,mean_effective,low_result_rate,zero_results";

fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variant,
            r.queries,
            r.mean_hybrid,
            r.mean_global,
            r.mean_effective,
            r.low_result_rate,
            r.zero_results
        )
        .expect("string writes cannot fail");
    }
    out
}

fn validate_variants(variants: &[VariantSpec]) -> CliResult<()> {
    if variants.is_empty() {
        return Err(CliError::Usage("config field variants: must not be empty".to_string()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for v in variants {
        let sane = !v.name.is_empty()
            && v.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !sane {
            return Err(CliError::Usage(format!(
                "config field variants: name {:?} must be non-empty [A-Za-z0-9_-]",
                v.name
            )));
        }
        if !seen.insert(&v.name) {
            return Err(CliError::Usage(format!(
                "config field variants: duplicate name {:?}",
                v.name
            )));
        }
    }
    Ok(())
}

fn cmd_evaluate(config: &Path, seed: Option<u64>, reward: Option<&str>, out: &Path) -> CliResult<()> {
    let mut cfg: EvaluateConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.pipeline.verifier.seed = s;
    }
    if let Some(flag) = reward {
        cfg.pipeline.reward_mode = parse_reward(flag)?;
    }
    cfg.pipeline.validate().map_err(|e| usage("config field pipeline", e))?;
    validate_variants(&cfg.variants)?;
    let catalog = load_corpus_dir(&cfg.corpus_dir)?;
    let benchmark = load_benchmark_file(&cfg.benchmark_path)?;
    let index = index_for(&catalog)?;
    let user = UserContext::default();
    std::fs::create_dir_all(out).map_err(|e| data(&out.display().to_string(), e))?;
    write_resolved(out, &cfg)?;

    let mut rows = Vec::with_capacity(cfg.variants.len());
    for variant in &cfg.variants {
        let expander =
            variant.expander.build().map_err(|e| data(&format!("variant {}", variant.name), e))?;
        let mut sessions = Vec::with_capacity(benchmark.len());
        let mut jsonl = String::new();
        for (i, record) in benchmark.iter().enumerate() {
            let q = parse(&record.query_text)
                .map_err(|e| data(&format!("benchmark query {i}"), e))?;
            let report = run_session(&q, &user, &expander, &index, &catalog, &cfg.pipeline)
                .map_err(|e| data(&format!("variant {} query {i}", variant.name), e))?;
            let line = serde_json::to_string(&report)
                .map_err(|e| data("session serialization", e))?;
            jsonl.push_str(&line);
            jsonl.push('\n');
            sessions.push(report);
        }
        let path = out.join(format!("sessions_{}.jsonl", variant.name));
        std::fs::write(&path, jsonl).map_err(|e| data(&path.display().to_string(), e))?;
        rows.push(aggregate(&variant.name, &sessions));
    }
    let csv_path = out.join("aggregate.csv");
    std::fs::write(&csv_path, aggregate_csv(&rows))
        .map_err(|e| data(&csv_path.display().to_string(), e))?;
    println!("evaluated {} variants over {} queries; report in {}", rows.len(), benchmark.len(), out.display());
    Ok(())
}

// ------------------------------------------------------------------- session

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionConfig {
    corpus_dir: PathBuf,
    query: String,
    #[serde(default)]
    pipeline: PipelineConfig,
    #[serde(default)]
    expander: ExpanderSpec,
}

fn cmd_session(
    config: &Path,
    seed: Option<u64>,
    reward: Option<&str>,
    out: Option<&Path>,
) -> CliResult<()> {
    let mut cfg: SessionConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.pipeline.verifier.seed = s;
    }
    if let Some(flag) = reward {
        cfg.pipeline.reward_mode = parse_reward(flag)?;
    }
    cfg.pipeline.validate().map_err(|e| usage("config field pipeline", e))?;
    let q = parse(&cfg.query).map_err(|e| usage("config field query", e))?;
    let catalog = load_corpus_dir(&cfg.corpus_dir)?;
    let index = index_for(&catalog)?;
    let expander = cfg.expander.build().map_err(|e| data("config field expander", e))?;
    let report = run_session(&q, &UserContext::default(), &expander, &index, &catalog, &cfg.pipeline)
        .map_err(|e| data("session", e))?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| data("session output", e))?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| data(&dir.display().to_string(), e))?;
        std::fs::write(dir.join("session.json"), text + "\n")
            .map_err(|e| data("session.json", e))?;
        write_resolved(dir, &cfg)?;
    }
    Ok(())
}
