//! Broaden-and-refine product retrieval over a conjunctive inverted-index engine.
//!
//! A structured query (`cat:… | attr:… | range:… | neg:… | soft:…`) is expanded
//! into a small set of relaxed rewrites, every rewrite is executed against the
//! engine, the union of returned items is deduplicated (*broaden*), and a
//! relevance verifier filters the merged pool down to the items that actually
//! satisfy the original query (*refine*). Set-level rewards over the verified
//! pool drive a factorized Bernoulli rewrite policy trained with group-relative
//! policy-gradient methods.
//!
//! Module map:
//!
//! - [`querylang`] — the structured query grammar: parsing, canonical
//!   serialization, decomposition into core + constraints.
//! - [`catalog`] — item schema, seeded catalog generation, and inverse
//!   augmentation of items into benchmark queries.
//! - [`engine`] — the black-box stand-in: inverted-index build and conjunctive
//!   paged search.
//! - [`expander`] — rewrite generation: identity, deterministic enumeration,
//!   and the trainable factorized Bernoulli policy.
//! - [`verifier`] — oracle and noise-calibrated relevance judgments, plus
//!   order-preserving batch verification.
//! - [`rewards`] — set-level reward functions over verified candidate pools.
//! - [`posterior`] — hindsight scoring of rewrite candidates and SFT dataset
//!   construction.
//! - [`rlopt`] — group-relative policy optimization (three objective variants)
//!   with closed-form gradients.
//! - [`serving`] — the runtime pipeline: broaden, refine, budget allocation,
//!   adaptive paging, end-to-end sessions.
//! - [`cli`] — the `bnr` command-line front end.

pub mod catalog;
pub mod cli;
pub mod engine;
pub mod error;
pub mod expander;
pub mod posterior;
pub mod querylang;
pub mod rewards;
pub mod rlopt;
mod seeding;
pub mod serving;
pub mod verifier;

pub use error::{BnrError, Result};
