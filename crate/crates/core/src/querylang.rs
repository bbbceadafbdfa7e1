//! The structured query grammar.
//!
//! A query is a category core plus zero or more constraint clauses joined by
//! `|`:
//!
//! ```text
//! cat:blazer | attr:material=linen | range:price=500..800 | neg:color=black | soft:beach-wedding
//! ```
//!
//! Clause kinds:
//!
//! - `attr:<key>=<value>` — hard equality on a categorical attribute,
//! - `range:<key>=<lo>..<hi>` — inclusive numeric interval,
//! - `neg:<key>=<value>` — the attribute must *not* equal the value,
//! - `soft:<token>` — a free-form descriptor matched against item text.
//!
//! Parsing canonicalizes: tokens are lowercased and trimmed, constraints are
//! sorted by (kind, key, value) with kind order attr < range < neg < soft, and
//! exact duplicates are collapsed. Two queries are equivalent exactly when
//! their canonical serializations are byte-identical, so `serialize ∘ parse`
//! is a fixed point after one application.

use crate::error::{BnrError, Result};
use std::cmp::Ordering;
use std::fmt;

/// One constraint clause of a query.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `attr:<key>=<value>` — attribute must equal the value.
    Attr { key: String, value: String },
    /// `range:<key>=<lo>..<hi>` — numeric field must lie in `[lo, hi]`.
    Range { key: String, lo: f64, hi: f64 },
    /// `neg:<key>=<value>` — attribute must not equal the value.
    Neg { key: String, value: String },
    /// `soft:<token>` — descriptor expected somewhere in the item's text.
    Soft { token: String },
}

impl Constraint {
    /// Kind rank used by the canonical (kind, key, value) ordering.
    fn kind_rank(&self) -> u8 {
        match self {
            Constraint::Attr { .. } => 0,
            Constraint::Range { .. } => 1,
            Constraint::Neg { .. } => 2,
            Constraint::Soft { .. } => 3,
        }
    }

    /// The key the constraint addresses (the token itself for `soft`).
    pub fn key(&self) -> &str {
        match self {
            Constraint::Attr { key, .. }
            | Constraint::Range { key, .. }
            | Constraint::Neg { key, .. } => key,
            Constraint::Soft { token } => token,
        }
    }

    /// Total order backing canonicalization: (kind, key, value), with range
    /// endpoints compared by `f64::total_cmp`.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.kind_rank()
            .cmp(&other.kind_rank())
            .then_with(|| self.key().cmp(other.key()))
            .then_with(|| match (self, other) {
                (
                    Constraint::Range { lo: a_lo, hi: a_hi, .. },
                    Constraint::Range { lo: b_lo, hi: b_hi, .. },
                ) => a_lo.total_cmp(b_lo).then(a_hi.total_cmp(b_hi)),
                (
                    Constraint::Attr { value: a, .. } | Constraint::Neg { value: a, .. },
                    Constraint::Attr { value: b, .. } | Constraint::Neg { value: b, .. },
                ) => a.cmp(b),
                _ => Ordering::Equal,
            })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Attr { key, value } => write!(f, "attr:{key}={value}"),
            Constraint::Range { key, lo, hi } => write!(f, "range:{key}={lo}..{hi}"),
            Constraint::Neg { key, value } => write!(f, "neg:{key}={value}"),
            Constraint::Soft { token } => write!(f, "soft:{token}"),
        }
    }
}

/// A parsed query in canonical form: the category core plus a sorted,
/// duplicate-free constraint list.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedQuery {
    core: String,
    constraints: Vec<Constraint>,
}

impl ParsedQuery {
    /// Builds a query from parts, canonicalizing the constraint list.
    /// The core must be a valid lowercase token.
    pub fn new(core: impl Into<String>, constraints: Vec<Constraint>) -> Result<Self> {
        let core = normalize_token(&core.into())
            .map_err(|msg| BnrError::parse(0, format!("category core: {msg}")))?;
        Ok(ParsedQuery {
            core,
            constraints: canonicalize(constraints),
        })
    }

    /// The category core token.
    pub fn core(&self) -> &str {
        &self.core
    }

    /// The canonical constraint list.
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Splits the query into its core and constraint list. Lossless:
    /// reassembling the parts reproduces the canonical serialization.
    pub fn decompose(&self) -> (&str, &[Constraint]) {
        (&self.core, &self.constraints)
    }

    /// Canonical text form.
    pub fn serialize(&self) -> String {
        serialize_parts(&self.core, &self.constraints)
    }

    /// Parses query text — same as the free function [`parse`].
    pub fn parse_text(text: &str) -> Result<Self> {
        parse(text)
    }

    /// The identity rewrite: same core, full constraint list.
    pub fn to_rewrite(&self) -> RewriteSpec {
        RewriteSpec {
            core: self.core.clone(),
            constraints: self.constraints.clone(),
        }
    }
}

impl fmt::Display for ParsedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// A rewrite: the original core plus a subset (possibly empty, possibly full)
/// of the original constraints. Shares the query grammar and canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteSpec {
    core: String,
    constraints: Vec<Constraint>,
}

impl RewriteSpec {
    /// Builds a rewrite from parts, canonicalizing the constraint list.
    pub fn new(core: impl Into<String>, constraints: Vec<Constraint>) -> Result<Self> {
        let q = ParsedQuery::new(core, constraints)?;
        Ok(q.to_rewrite())
    }

    pub fn core(&self) -> &str {
        &self.core
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Canonical text form (same grammar as queries).
    pub fn serialize(&self) -> String {
        serialize_parts(&self.core, &self.constraints)
    }

    /// Parses rewrite text — identical grammar to [`parse`].
    pub fn parse(text: &str) -> Result<Self> {
        Ok(parse(text)?.to_rewrite())
    }
}

impl fmt::Display for RewriteSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// True when the two queries are the same after canonicalization, i.e. their
/// canonical serializations are byte-identical.
pub fn is_equivalent(a: &ParsedQuery, b: &ParsedQuery) -> bool {
    a.serialize() == b.serialize()
}

/// Sorts by (kind, key, value) and collapses exact duplicates.
fn canonicalize(mut constraints: Vec<Constraint>) -> Vec<Constraint> {
    constraints.sort_by(Constraint::canonical_cmp);
    constraints.dedup_by(|a, b| a.canonical_cmp(b) == Ordering::Equal);
    constraints
}

fn serialize_parts(core: &str, constraints: &[Constraint]) -> String {
    let mut out = format!("cat:{core}");
    for c in constraints {
        out.push_str(" | ");
        out.push_str(&c.to_string());
    }
    out
}

/// Validates and lowercases a token: non-empty, characters in `[a-z0-9_-]`
/// after lowercasing. Surrounding whitespace is the caller's to strip.
fn normalize_token(raw: &str) -> std::result::Result<String, String> {
    if raw.is_empty() {
        return Err("empty token".to_string());
    }
    let lowered = raw.to_ascii_lowercase();
    match lowered
        .chars()
        .find(|c| !(c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '_' || *c == '-'))
    {
        Some(bad) => Err(format!("invalid character {bad:?} in token {raw:?}")),
        None => Ok(lowered),
    }
}

/// Parses query text into canonical form.
///
/// The first clause must be `cat:<token>`; clause order and whitespace around
/// `|` are irrelevant to the result.
///
/// # Examples
///
/// ```
/// use bnr_core::querylang::parse;
///
/// let q = parse("cat:blazer | soft:beach-wedding | attr:material=linen").unwrap();
/// assert_eq!(q.serialize(), "cat:blazer | attr:material=linen | soft:beach-wedding");
/// ```
pub fn parse(text: &str) -> Result<ParsedQuery> {
    let mut clauses = split_clauses(text);
    if clauses.is_empty() {
        return Err(BnrError::parse(0, "empty query"));
    }
    let (first_pos, first) = clauses.remove(0);
    let core = match first.strip_prefix("cat:") {
        Some(rest) => normalize_token(rest.trim())
            .map_err(|msg| BnrError::parse(first_pos, format!("category core: {msg}")))?,
        None => {
            return Err(BnrError::parse(
                first_pos,
                format!("query must start with a cat:<token> clause, found {first:?}"),
            ))
        }
    };

    let mut constraints = Vec::with_capacity(clauses.len());
    for (pos, clause) in clauses {
        constraints.push(parse_constraint_at(clause, pos)?);
    }
    Ok(ParsedQuery {
        core,
        constraints: canonicalize(constraints),
    })
}

/// Parses a single constraint clause (no `cat:` core). Exposed for callers
/// that assemble constraint lists directly.
pub fn parse_constraint(clause: &str) -> Result<Constraint> {
    parse_constraint_at(clause.trim(), 0)
}

/// Splits on `|`, trimming each clause and recording the byte offset of its
/// first non-space character (for error reporting). Empty clauses — as in
/// `"cat:a || soft:x"` or a trailing `|` — are kept so they can be rejected.
fn split_clauses(text: &str) -> Vec<(usize, &str)> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    for (idx, _) in text.match_indices('|') {
        out.push(clause_slice(text, start, idx));
        start = idx + 1;
    }
    out.push(clause_slice(text, start, text.len()));
    out
}

fn clause_slice(text: &str, start: usize, end: usize) -> (usize, &str) {
    let raw = &text[start..end];
    let trimmed = raw.trim();
    let offset = start + (raw.len() - raw.trim_start().len());
    (offset, trimmed)
}

fn parse_constraint_at(clause: &str, pos: usize) -> Result<Constraint> {
    if clause.is_empty() {
        return Err(BnrError::parse(pos, "empty clause"));
    }
    let (prefix, body) = match clause.split_once(':') {
        Some(split) => split,
        None => {
            return Err(BnrError::parse(
                pos,
                format!("clause {clause:?} has no kind prefix (expected attr:, range:, neg:, or soft:)"),
            ))
        }
    };
    let err = |msg: String| BnrError::parse(pos, msg);
    match prefix.trim() {
        "attr" => {
            let (key, value) = split_key_value(body, pos, "attr")?;
            Ok(Constraint::Attr { key, value })
        }
        "neg" => {
            let (key, value) = split_key_value(body, pos, "neg")?;
            Ok(Constraint::Neg { key, value })
        }
        "soft" => {
            let token = normalize_token(body.trim())
                .map_err(|msg| err(format!("soft clause: {msg}")))?;
            Ok(Constraint::Soft { token })
        }
        "range" => {
            let (key_raw, bounds) = body.split_once('=').ok_or_else(|| {
                err(format!("range clause {clause:?} must look like range:<key>=<lo>..<hi>"))
            })?;
            let key = normalize_token(key_raw.trim())
                .map_err(|msg| err(format!("range key: {msg}")))?;
            let (lo_raw, hi_raw) = bounds.split_once("..").ok_or_else(|| {
                err(format!("range bounds {bounds:?} must look like <lo>..<hi>"))
            })?;
            let lo = parse_bound(lo_raw, pos)?;
            let hi = parse_bound(hi_raw, pos)?;
            if lo > hi {
                return Err(err(format!("range lower bound {lo} exceeds upper bound {hi}")));
            }
            Ok(Constraint::Range { key, lo, hi })
        }
        other => Err(err(format!(
            "unknown clause kind {other:?} (expected attr, range, neg, or soft)"
        ))),
    }
}

fn split_key_value(body: &str, pos: usize, kind: &str) -> Result<(String, String)> {
    let (key_raw, value_raw) = body.split_once('=').ok_or_else(|| {
        BnrError::parse(pos, format!("{kind} clause must look like {kind}:<key>=<value>"))
    })?;
    let key = normalize_token(key_raw.trim())
        .map_err(|msg| BnrError::parse(pos, format!("{kind} key: {msg}")))?;
    let value = normalize_token(value_raw.trim())
        .map_err(|msg| BnrError::parse(pos, format!("{kind} value: {msg}")))?;
    Ok((key, value))
}

fn parse_bound(raw: &str, pos: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| BnrError::parse(pos, format!("range bound {raw:?} is not a number")))?;
    if !v.is_finite() {
        return Err(BnrError::parse(pos, format!("range bound {raw:?} must be finite")));
    }
    Ok(v)
}
