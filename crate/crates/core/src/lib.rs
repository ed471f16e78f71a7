//! Document-level natural language inference by retrieve, read and fuse.
//!
//! Each hypothesis sentence gets its top-K premise sentences from a
//! retriever ([`retrieval`]), a reader scores the pair ([`reader`]), and a
//! fusion head turns the sentence scores into one document score
//! ([`fusion`], [`model`]). [`training`] fits reader and head end to end with
//! hand-written gradients and AdamW; [`metrics`] reports document and
//! sentence-level results, including evidence recall and full accuracy.
//!
//! [`corpus`] covers JSON-lines I/O, checkpoints, embeddings and a synthetic
//! corpus with complete sentence gold. [`pipeline`] and [`harness`] chain the
//! stages; [`cli`] backs the `docnli` binary.

pub mod corpus;
pub mod fsio;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod reader;
pub mod retrieval;
pub mod text;
pub mod training;

pub mod gradcheck;
pub mod harness;
pub mod pipeline;

pub mod cli;
pub mod config;
