//! Synthetic product catalog and query benchmark.
//!
//! Stands in for a production corpus and its search logs: a seeded generator
//! emits items against a declared per-category schema (attribute vocabularies,
//! numeric ranges, soft-descriptor vocabulary), and an inverse-augmentation
//! pass turns items back into benchmark queries with a known-good gold
//! rewrite.
//!
//! Two deliberate catalog properties drive everything downstream:
//!
//! * Items carry only 2–3 *visible* tags, but several more descriptors appear
//!   only inside `review_text`/`ocr_text`. The engine matches soft
//!   constraints against visible tags; the verifier also reads the text. The
//!   gap between the two is what makes query relaxation profitable.
//! * Benchmark queries stack soft descriptors (and a negation) on top of the
//!   gold rewrite, so at higher over-constraint levels a large share of
//!   queries match nothing under full conjunction — the zero-result regime
//!   the serving pipeline is built to escape.

use crate::engine;
use crate::error::{BnrError, Result};
use crate::querylang::{Constraint, ParsedQuery, RewriteSpec};
use crate::seeding;
use crate::verifier;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Probability that a schema attribute key is present on a generated item.
const ATTR_PRESENCE: f64 = 0.9;
/// Visible tag count range per item.
const VISIBLE_TAGS_MIN: usize = 2;
const VISIBLE_TAGS_MAX: usize = 3;
/// Hidden (text-only) descriptor count range per item.
const HIDDEN_TAGS_MIN: usize = 3;
const HIDDEN_TAGS_MAX: usize = 5;
/// Probability that an item ships everywhere.
const REGION_ANY_P: f64 = 0.6;
/// Soft-descriptor counts for benchmark queries, indexed by
/// over-constraint level (level ≥ 3 uses the last entry).
const SOFTS_BY_LEVEL: [usize; 4] = [1, 2, 2, 3];
/// Fraction of benchmark queries that must have zero exact-conjunction
/// matches at over-constraint level ≥ 2.
const ZERO_MATCH_QUOTA: f64 = 0.2;

/// One product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: u64,
    pub category: String,
    pub title: String,
    /// Categorical attributes, e.g. material → linen.
    pub attributes: BTreeMap<String, String>,
    /// Numeric fields, e.g. price, sales.
    pub numeric: BTreeMap<String, f64>,
    /// Visible soft-descriptor tags — the only soft evidence the engine sees.
    pub tags: Vec<String>,
    pub region: String,
    pub review_text: String,
    pub ocr_text: String,
}

/// Declared vocabulary for one attribute key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub key: String,
    pub values: Vec<String>,
}

/// Declared range for one numeric key (inclusive, whole-number draws).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSpec {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
}

/// Schema for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySchema {
    pub name: String,
    pub attributes: Vec<AttributeSpec>,
    pub numeric: Vec<NumericSpec>,
    pub soft_vocab: Vec<String>,
}

/// Full catalog schema: categories plus the region vocabulary
/// (first region is the wildcard "any").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSchema {
    pub categories: Vec<CategorySchema>,
    pub regions: Vec<String>,
}

impl CatalogSchema {
    pub fn category(&self, name: &str) -> Option<&CategorySchema> {
        self.categories.iter().find(|c| c.name == name)
    }

    fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(BnrError::config("schema has no categories"));
        }
        if self.regions.is_empty() {
            return Err(BnrError::config("schema has no regions"));
        }
        for cat in &self.categories {
            if cat.attributes.is_empty() {
                return Err(BnrError::config(format!(
                    "category {:?} has no attribute keys",
                    cat.name
                )));
            }
            for attr in &cat.attributes {
                if attr.values.is_empty() {
                    return Err(BnrError::config(format!(
                        "empty vocabulary for attribute {:?} of category {:?}",
                        attr.key, cat.name
                    )));
                }
            }
            if cat.soft_vocab.is_empty() {
                return Err(BnrError::config(format!(
                    "category {:?} has no soft-descriptor vocabulary",
                    cat.name
                )));
            }
            for spec in &cat.numeric {
                if !(spec.lo.is_finite() && spec.hi.is_finite()) || spec.lo > spec.hi {
                    return Err(BnrError::config(format!(
                        "bad numeric range for {:?} of category {:?}",
                        spec.key, cat.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generation request: how many items, over which schema, from which seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub num_items: usize,
    #[serde(default = "reference_schema")]
    pub schema: CatalogSchema,
    pub seed: u64,
}

/// The generated catalog: immutable after generation.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub schema: CatalogSchema,
    pub items: Vec<Item>,
}

/// One benchmark entry: a (possibly over-constrained) query, the gold rewrite
/// derived from the source item, and the item it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub query_text: String,
    pub gold_rewrite: String,
    pub source_item: u64,
}

/// The built-in reference schema: five product families, 4–6 attribute keys
/// each, price/sales numerics, and ~10-token soft vocabularies.
pub fn reference_schema() -> CatalogSchema {
    fn attrs(pairs: &[(&str, &[&str])]) -> Vec<AttributeSpec> {
        pairs
            .iter()
            .map(|(key, values)| AttributeSpec {
                key: (*key).to_string(),
                values: values.iter().map(|v| v.to_string()).collect(),
            })
            .collect()
    }
    fn numerics(price_lo: f64, price_hi: f64) -> Vec<NumericSpec> {
        vec![
            NumericSpec { key: "price".into(), lo: price_lo, hi: price_hi },
            NumericSpec { key: "sales".into(), lo: 0.0, hi: 5000.0 },
        ]
    }
    fn vocab(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    CatalogSchema {
        categories: vec![
            CategorySchema {
                name: "blazer".into(),
                attributes: attrs(&[
                    ("material", &["linen", "wool", "cotton", "silk", "polyester", "velvet"]),
                    ("color", &["black", "navy", "beige", "white", "grey", "olive"]),
                    ("fit", &["slim", "regular", "relaxed"]),
                    ("size", &["s", "m", "l", "xl"]),
                    ("pattern", &["plain", "striped", "checked", "floral"]),
                ]),
                numeric: numerics(300.0, 2000.0),
                soft_vocab: vocab(&[
                    "beach-wedding", "office", "breathable", "lightweight", "tailored",
                    "vintage", "summer", "formal", "travel", "wrinkle-free", "premium",
                ]),
            },
            CategorySchema {
                name: "sneaker".into(),
                attributes: attrs(&[
                    ("color", &["black", "white", "red", "blue", "green", "grey"]),
                    ("material", &["leather", "mesh", "canvas", "suede"]),
                    ("sole", &["rubber", "foam", "gum"]),
                    ("style", &["running", "casual", "skate", "trail"]),
                    ("size", &["38", "40", "42", "44"]),
                ]),
                numeric: numerics(150.0, 1500.0),
                soft_vocab: vocab(&[
                    "waterproof", "breathable", "lightweight", "cushioned", "grippy",
                    "gym", "everyday", "vegan", "durable", "reflective", "slip-on",
                ]),
            },
            CategorySchema {
                name: "sofa".into(),
                attributes: attrs(&[
                    ("material", &["leather", "linen", "velvet", "microfiber"]),
                    ("color", &["grey", "beige", "navy", "green", "brown"]),
                    ("seats", &["two-seat", "three-seat", "corner"]),
                    ("frame", &["wood", "metal"]),
                    ("style", &["modern", "classic", "scandinavian"]),
                ]),
                numeric: numerics(1500.0, 9000.0),
                soft_vocab: vocab(&[
                    "cozy", "pet-friendly", "easy-clean", "compact", "modular",
                    "sleeper", "tufted", "low-profile", "family", "sturdy",
                ]),
            },
            CategorySchema {
                name: "headphone".into(),
                attributes: attrs(&[
                    ("kind", &["over-ear", "in-ear", "on-ear"]),
                    ("color", &["black", "white", "silver", "blue"]),
                    ("connectivity", &["wired", "wireless"]),
                    ("driver", &["dynamic", "planar"]),
                ]),
                numeric: numerics(100.0, 3000.0),
                soft_vocab: vocab(&[
                    "noise-cancelling", "bass-heavy", "foldable", "travel", "studio",
                    "sport", "comfy", "long-battery", "budget", "gaming",
                ]),
            },
            CategorySchema {
                name: "kettle".into(),
                attributes: attrs(&[
                    ("material", &["glass", "steel", "ceramic", "cast-iron"]),
                    ("color", &["white", "black", "red", "mint"]),
                    ("capacity", &["small", "medium", "large"]),
                    ("power", &["electric", "stovetop"]),
                ]),
                numeric: numerics(80.0, 600.0),
                soft_vocab: vocab(&[
                    "quiet", "fast-boil", "cordless", "retro", "gooseneck",
                    "insulated", "compact", "gift", "precise", "easy-pour",
                ]),
            },
        ],
        regions: vec!["any".into(), "north".into(), "south".into(), "east".into(), "west".into()],
    }
}

/// Generates a catalog deterministically from the spec.
///
/// Each item draws from its own derived RNG stream, so catalogs with the same
/// seed agree on their common prefix regardless of `num_items`. After
/// generation a repair pass guarantees (when `num_items` allows) that every
/// category and every schema attribute key is represented at least once.
pub fn generate_catalog(spec: &CatalogSpec) -> Result<Catalog> {
    spec.schema.validate()?;
    let mut items: Vec<Item> = (0..spec.num_items)
        .map(|i| {
            let mut rng = seeding::rng(spec.seed, "catalog-item", i as u64);
            generate_item(i as u64, &spec.schema, &mut rng, None)
        })
        .collect();
    repair_coverage(&mut items, spec);
    Ok(Catalog { schema: spec.schema.clone(), items })
}

fn generate_item(
    id: u64,
    schema: &CatalogSchema,
    rng: &mut ChaCha8Rng,
    forced_category: Option<usize>,
) -> Item {
    let cat_idx = forced_category.unwrap_or_else(|| rng.random_range(0..schema.categories.len()));
    let cat = &schema.categories[cat_idx];

    let mut attributes = BTreeMap::new();
    for attr in &cat.attributes {
        if rng.random::<f64>() < ATTR_PRESENCE {
            let v = &attr.values[rng.random_range(0..attr.values.len())];
            attributes.insert(attr.key.clone(), v.clone());
        }
    }

    let mut numeric = BTreeMap::new();
    for spec in &cat.numeric {
        let v = rng.random_range(spec.lo as i64..=spec.hi as i64) as f64;
        numeric.insert(spec.key.clone(), v);
    }

    let n_vis = rng.random_range(VISIBLE_TAGS_MIN..=VISIBLE_TAGS_MAX).min(cat.soft_vocab.len());
    let mut tags: Vec<String> = sample(rng, cat.soft_vocab.len(), n_vis)
        .iter()
        .map(|i| cat.soft_vocab[i].clone())
        .collect();
    tags.sort();

    // Descriptors that exist only in free text: the engine cannot see them,
    // the verifier can.
    let hidden_pool: Vec<&String> = cat.soft_vocab.iter().filter(|t| !tags.contains(t)).collect();
    let n_hidden = rng.random_range(HIDDEN_TAGS_MIN..=HIDDEN_TAGS_MAX).min(hidden_pool.len());
    let hidden: Vec<&str> = sample(rng, hidden_pool.len(), n_hidden)
        .iter()
        .map(|i| hidden_pool[i].as_str())
        .collect();
    let split = hidden.len().div_ceil(2);
    let review_text = match &hidden[..split] {
        [] => format!("works nicely and feels {} in daily use", tags[0]),
        part => format!(
            "really {} in daily use, and the {} finish holds up",
            part.join(" and "),
            tags[0]
        ),
    };
    let first_attr = cat
        .attributes
        .first()
        .and_then(|a| attributes.get(&a.key).cloned())
        .unwrap_or_else(|| cat.name.clone());
    let ocr_text = format!(
        "{} {} {} official store quality guarantee",
        cat.name,
        first_attr,
        hidden[split..].join(" ")
    );

    let region = if rng.random::<f64>() < REGION_ANY_P || schema.regions.len() == 1 {
        schema.regions[0].clone()
    } else {
        schema.regions[1 + rng.random_range(0..schema.regions.len() - 1)].clone()
    };

    let mut title_bits: Vec<&str> = Vec::new();
    for attr in cat.attributes.iter().take(2) {
        if let Some(v) = attributes.get(&attr.key) {
            title_bits.push(v);
        }
    }
    title_bits.push(&cat.name);
    let title = title_bits.join(" ");

    Item {
        id,
        category: cat.name.clone(),
        title,
        attributes,
        numeric,
        tags,
        region,
        review_text,
        ocr_text,
    }
}

/// Ensures every category has ≥1 item and every schema attribute key appears
/// on ≥1 item, to the extent `num_items` permits. Repairs are seeded and
/// touch as few items as possible; at reference scale they are no-ops.
fn repair_coverage(items: &mut [Item], spec: &CatalogSpec) {
    if items.is_empty() {
        return;
    }
    let schema = &spec.schema;
    // Categories with no items: overwrite the leading items (one per missing
    // category) with forced-category regenerations.
    let present: BTreeSet<&str> = items.iter().map(|i| i.category.as_str()).collect();
    let missing: Vec<usize> = schema
        .categories
        .iter()
        .enumerate()
        .filter(|(_, c)| !present.contains(c.name.as_str()))
        .map(|(idx, _)| idx)
        .collect();
    for (slot, cat_idx) in missing.into_iter().enumerate() {
        if slot >= items.len() {
            break;
        }
        let id = items[slot].id;
        let mut rng = seeding::rng(spec.seed, "catalog-repair", id);
        items[slot] = generate_item(id, schema, &mut rng, Some(cat_idx));
    }
    // Attribute keys never drawn: force them onto the first item of their
    // category that lacks them.
    for cat in &schema.categories {
        for attr in &cat.attributes {
            let covered = items
                .iter()
                .any(|i| i.category == cat.name && i.attributes.contains_key(&attr.key));
            if covered {
                continue;
            }
            if let Some(item) = items.iter_mut().find(|i| i.category == cat.name) {
                let pick = seeding::derive(spec.seed, "catalog-repair-attr", item.id) as usize
                    % attr.values.len();
                item.attributes.insert(attr.key.clone(), attr.values[pick].clone());
            }
        }
    }
}

/// Derives a benchmark query from an item.
///
/// The gold rewrite is the item's category plus a seeded subset (possibly
/// empty) of its attributes — the rewrite an ideal expander should be able to
/// fall back to. The query adds descriptors the user might also have asked
/// for: soft tokens from the category vocabulary and, half the time, a
/// negation that the item itself satisfies.
pub fn inverse_augment(item: &Item, schema: &CatalogSchema, seed: u64) -> Result<QueryRecord> {
    let mut rng = seeding::rng(seed, "inverse-augment", item.id);
    let n_soft = if rng.random::<f64>() < 0.35 { 2 } else { 1 };
    let want_neg = rng.random::<f64>() < 0.5;
    build_record(item, schema, &mut rng, n_soft, want_neg)
}

fn build_record(
    item: &Item,
    schema: &CatalogSchema,
    rng: &mut ChaCha8Rng,
    n_soft: usize,
    want_neg: bool,
) -> Result<QueryRecord> {
    let cat = schema.category(&item.category).ok_or_else(|| {
        BnrError::data(format!(
            "item {} has category {:?} not present in the schema",
            item.id, item.category
        ))
    })?;

    // Gold subset: 0..=2 of the item's own attributes.
    let attrs: Vec<(&String, &String)> = item.attributes.iter().collect();
    let n_gold = match rng.random::<f64>() {
        x if x < 0.15 => 0,
        x if x < 0.60 => 1,
        _ => 2,
    }
    .min(attrs.len());
    let gold: Vec<Constraint> = sample(rng, attrs.len(), n_gold)
        .iter()
        .map(|i| Constraint::Attr { key: attrs[i].0.clone(), value: attrs[i].1.clone() })
        .collect();

    let mut query = gold.clone();
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for _ in 0..n_soft {
        if let Some(tok) = draw_soft(cat, &used, rng) {
            used.insert(tok);
            query.push(Constraint::Soft { token: tok.to_string() });
        }
    }
    if want_neg {
        if let Some(neg) = draw_negation(item, cat, rng) {
            query.push(neg);
        }
    }

    let parsed = ParsedQuery::new(&item.category, query)?;
    let gold_rewrite = RewriteSpec::new(&item.category, gold)?;
    Ok(QueryRecord {
        query_text: parsed.serialize(),
        gold_rewrite: gold_rewrite.serialize(),
        source_item: item.id,
    })
}

/// Picks an unused soft token uniformly from the category vocabulary.
fn draw_soft<'a>(
    cat: &'a CategorySchema,
    used: &BTreeSet<&str>,
    rng: &mut ChaCha8Rng,
) -> Option<&'a str> {
    let pool: Vec<&str> = cat
        .soft_vocab
        .iter()
        .map(String::as_str)
        .filter(|t| !used.contains(t))
        .collect();
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

/// Picks a negation on one of the item's attribute keys with a value the
/// item does NOT carry, so the source item remains a legitimate answer.
fn draw_negation(item: &Item, cat: &CategorySchema, rng: &mut ChaCha8Rng) -> Option<Constraint> {
    let keyed: Vec<&AttributeSpec> = cat
        .attributes
        .iter()
        .filter(|a| item.attributes.contains_key(&a.key))
        .collect();
    if keyed.is_empty() {
        return None;
    }
    let attr = keyed[rng.random_range(0..keyed.len())];
    let own = &item.attributes[&attr.key];
    let other: Vec<&String> = attr.values.iter().filter(|v| *v != own).collect();
    if other.is_empty() {
        return None;
    }
    let value = other[rng.random_range(0..other.len())];
    Some(Constraint::Neg { key: attr.key.clone(), value: value.clone() })
}

/// Builds the query benchmark: `count` inverse-augmented records at the given
/// over-constraint level.
///
/// Level controls how many soft descriptors each query stacks on the gold
/// rewrite (see `SOFTS_BY_LEVEL`); level ≥ 2 additionally forces a negation
/// and guarantees — by consulting the engine and thickening queries when
/// necessary — that at least 20% of the emitted queries have zero
/// exact-conjunction matches.
pub fn build_query_benchmark(
    catalog: &Catalog,
    count: usize,
    over_constraint_level: u32,
    seed: u64,
) -> Result<Vec<QueryRecord>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if catalog.items.is_empty() {
        return Err(BnrError::config("cannot build a benchmark from an empty catalog"));
    }
    let index = engine::build_index(catalog)?;
    let mut pick_rng = seeding::rng(seed, "benchmark-pick", 0);
    let level = over_constraint_level.min(3) as usize;
    let n_soft = SOFTS_BY_LEVEL[level];
    let want_neg = over_constraint_level >= 2;

    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let item = &catalog.items[pick_rng.random_range(0..catalog.items.len())];
        let mut rec_rng = seeding::rng(seed, "benchmark-record", i as u64);
        let force_neg = want_neg || rec_rng.random::<f64>() < 0.5;
        records.push(build_record(item, &catalog.schema, &mut rec_rng, n_soft, force_neg)?);
    }

    if over_constraint_level >= 2 {
        enforce_zero_match_quota(&mut records, catalog, &index, seed)?;
    }
    Ok(records)
}

fn exact_matches(index: &engine::Index, query_text: &str) -> Result<usize> {
    let rewrite = RewriteSpec::parse(query_text)?;
    let res = index.search(&engine::SearchRequest { rewrite, limit: 1, offset: 0 })?;
    Ok(res.total_matches)
}

/// Thickens queries (one extra soft token at a time) until the zero-match
/// quota holds. Records are revisited in order; each pass adds at most one
/// token per record, so queries stay as close to their original shape as the
/// quota allows.
fn enforce_zero_match_quota(
    records: &mut [QueryRecord],
    catalog: &Catalog,
    index: &engine::Index,
    seed: u64,
) -> Result<()> {
    let total = records.len();
    let needed = ((total as f64) * ZERO_MATCH_QUOTA).ceil() as usize;
    let mut zero = 0usize;
    for rec in records.iter() {
        if exact_matches(index, &rec.query_text)? == 0 {
            zero += 1;
        }
    }
    for pass in 0..4 {
        if zero >= needed {
            return Ok(());
        }
        for (i, rec) in records.iter_mut().enumerate() {
            if zero >= needed {
                return Ok(());
            }
            if exact_matches(index, &rec.query_text)? == 0 {
                continue;
            }
            let parsed = ParsedQuery::parse_text(&rec.query_text)?;
            let item = catalog
                .items
                .iter()
                .find(|it| it.id == rec.source_item)
                .ok_or_else(|| BnrError::data(format!("benchmark references missing item {}", rec.source_item)))?;
            let cat = catalog.schema.category(&item.category).ok_or_else(|| {
                BnrError::data(format!("item {} category missing from schema", item.id))
            })?;
            let used: BTreeSet<&str> = parsed
                .constraints()
                .iter()
                .filter_map(|c| match c {
                    Constraint::Soft { token } => Some(token.as_str()),
                    _ => None,
                })
                .collect();
            // Prefer descriptors the source item carries only in text: they
            // defeat the engine's tag-only matching while keeping the item a
            // true answer to the query.
            let text_tokens = verifier::item_text_tokens(item);
            let hidden: Vec<&str> = cat
                .soft_vocab
                .iter()
                .map(String::as_str)
                .filter(|t| !used.contains(t) && text_tokens.contains(*t) && !item.tags.iter().any(|v| v == t))
                .collect();
            let fallback: Vec<&str> = cat
                .soft_vocab
                .iter()
                .map(String::as_str)
                .filter(|t| !used.contains(t))
                .collect();
            let mut pick_rng = seeding::rng(seed, "benchmark-quota", (pass * total + i) as u64);
            let pool = if hidden.is_empty() { &fallback } else { &hidden };
            let Some(tok) = pool.get(pick_rng.random_range(0..pool.len().max(1))) else {
                continue;
            };
            let mut constraints = parsed.constraints().to_vec();
            constraints.push(Constraint::Soft { token: tok.to_string() });
            let thickened = ParsedQuery::new(parsed.core(), constraints)?;
            rec.query_text = thickened.serialize();
            if exact_matches(index, &rec.query_text)? == 0 {
                zero += 1;
            }
        }
    }
    if zero >= needed {
        Ok(())
    } else {
        Err(BnrError::data(format!(
            "zero-match quota unreachable: {zero}/{total} after thickening (need {needed})"
        )))
    }
}

// ---------------------------------------------------------------------------
// File I/O: catalog corpora and benchmarks are JSONL; the schema is JSON.
// ---------------------------------------------------------------------------

pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const SCHEMA_FILE: &str = "schema.json";

/// Writes `catalog.jsonl` + `schema.json` into `dir`.
pub fn write_corpus(catalog: &Catalog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(CATALOG_FILE))?);
    for item in &catalog.items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let schema = serde_json::to_string_pretty(&catalog.schema)?;
    std::fs::write(dir.join(SCHEMA_FILE), schema + "\n")?;
    Ok(())
}

/// Loads a corpus directory written by [`write_corpus`].
pub fn load_corpus(dir: &Path) -> Result<Catalog> {
    let schema: CatalogSchema =
        serde_json::from_str(&std::fs::read_to_string(dir.join(SCHEMA_FILE))?)?;
    schema.validate()?;
    let file = std::fs::File::open(dir.join(CATALOG_FILE))?;
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: Item = serde_json::from_str(&line).map_err(|e| {
            BnrError::data(format!("{}:{}: bad item: {e}", dir.join(CATALOG_FILE).display(), lineno + 1))
        })?;
        if !seen.insert(item.id) {
            return Err(BnrError::data(format!("duplicate item id {}", item.id)));
        }
        items.push(item);
    }
    Ok(Catalog { schema, items })
}

/// Writes a benchmark as JSONL, one record per line.
pub fn write_benchmark(records: &[QueryRecord], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a benchmark JSONL file, validating that every query parses and that
/// each gold rewrite is a subset of its query.
pub fn read_benchmark(path: &Path) -> Result<Vec<QueryRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QueryRecord = serde_json::from_str(&line).map_err(|e| {
            BnrError::data(format!("{}:{}: bad record: {e}", path.display(), lineno + 1))
        })?;
        validate_record(&rec).map_err(|e| {
            BnrError::data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(rec);
    }
    Ok(records)
}

fn validate_record(rec: &QueryRecord) -> Result<()> {
    let query = ParsedQuery::parse_text(&rec.query_text)?;
    let gold = RewriteSpec::parse(&rec.gold_rewrite)?;
    if gold.core() != query.core() {
        return Err(BnrError::data(format!(
            "gold rewrite core {:?} differs from query core {:?}",
            gold.core(),
            query.core()
        )));
    }
    for c in gold.constraints() {
        if !query.constraints().iter().any(|qc| qc == c) {
            return Err(BnrError::data(format!(
                "gold constraint {c} is not part of the query"
            )));
        }
    }
    Ok(())
}
