//! An iterative propose/compile/review/remember loop for Lean 4 proofs and
//! a benchmark harness to measure it.
//!
//! The pieces, leaf first:
//!
//! - [`lexer`], [`types`], [`prompts`]: Lean tokens, shared records, prompt templates.
//! - [`llm`], [`leanenv`], [`toolbox`]: model clients, Lean builds, search tools;
//!   each has a deterministic mock.
//! - [`review`]: candidate assembly, loophole checks, reviewer verdicts.
//! - [`memory`], [`proposer`], [`agent`]: the attempt loop.
//! - [`harness`]: manifests, ledgers, benchmark runs and statistics.
//! - [`config`], [`cli`]: settings profiles and the `leanloop` command.

pub mod agent;
pub mod cli;
pub mod config;
pub mod harness;
pub mod leanenv;
pub mod lexer;
pub mod llm;
pub mod memory;
pub mod prompts;
pub mod proposer;
pub mod review;
pub mod toolbox;
pub mod types;
