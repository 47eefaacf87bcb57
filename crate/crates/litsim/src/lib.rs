//! Deterministic simulation environment and workflow engine for evaluating
//! iterative literature-search agents.
//!
//! The crate is organized around the stages of one evaluation run:
//!
//! - [`corpus`] loads, validates, and deduplicates the static paper corpus
//!   plus the benchmark query set, producing immutable snapshots.
//! - [`retrieval`] executes parameterized tool calls against a snapshot with
//!   deterministic sparse (BM25) or dense (exact cosine) ranking, date
//!   filtering, and pagination.
//! - [`memory`] maintains the per-query subquery tree and experience buffer
//!   across iterations.
//! - [`policy`] is the decision brain: prompt rendering, strict parsing of
//!   tagged JSON outputs, a scripted mock for tests, and a JSON-over-HTTP
//!   chat client for real models.
//! - [`assess`] drives abstract-only or adaptive (full-text) relevance
//!   assessment of candidate sets.
//! - [`workflow`] glues planning, invocation, assessment, and memory into the
//!   iteration loop, plus the direct-query baseline and batch execution.
//! - [`metrics`] computes the evaluation suite (recall/precision/F1 at the
//!   retrieval and selection stages, average distance, ground-truth discard
//!   rates, per-iteration cumulative curves) from persisted trajectories.
//! - [`config`] carries every run parameter and its canonical digest.
//!
//! All operations are deterministic: identical inputs and configuration
//! produce byte-identical snapshots, indexes, trajectories, and reports.

pub mod assess;
pub mod config;
pub mod corpus;
pub mod error;
pub mod memory;
pub mod metrics;
pub mod policy;
pub mod retrieval;
pub mod workflow;

pub(crate) mod par;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
