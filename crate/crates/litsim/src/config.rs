//! Run configuration: every parameter a batch run depends on, plus the
//! canonical digest embedded in every output file so `--resume` and replay
//! can tell configurations apart.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::policy::{AssessMode, Decoding, RetryPolicy};
use crate::retrieval::BackendKind;
use crate::{Error, Result};

/// Which brain drives planning/assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// Scripted playback from a JSON file (see [`crate::policy::MockScript`]).
    Mock { script: String },
    /// Greedy built-in: verbatim query once, token-overlap selection.
    Heuristic {
        #[serde(default = "default_heuristic_k")]
        target_k: usize,
        #[serde(default)]
        min_shared_tokens: usize,
    },
    /// JSON-over-HTTP chat endpoint. The auth token is read from the
    /// environment variable named by `auth_env`, never from the config file.
    Http {
        endpoint: String,
        model: String,
        #[serde(default = "default_auth_env")]
        auth_env: String,
    },
}

fn default_heuristic_k() -> usize {
    10
}

fn default_auth_env() -> String {
    "LITSIM_API_TOKEN".to_string()
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Heuristic {
            target_k: default_heuristic_k(),
            min_shared_tokens: 0,
        }
    }
}

/// Full-text lookup for adaptive browsing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FullTextConfig {
    /// Directory of per-paper section files.
    #[serde(default)]
    pub store_dir: Option<String>,
    /// The HTTP fetcher runs only when explicitly enabled.
    #[serde(default)]
    pub fetch_enabled: bool,
    /// URL template with an `{id}` placeholder.
    #[serde(default)]
    pub fetch_url_template: Option<String>,
}

/// Everything one run depends on. Serializes to/from TOML (harness config
/// files) and JSON (trajectory headers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Corpus snapshot file.
    pub corpus: String,
    /// Benchmark query file.
    pub benchmark: String,
    /// Prebuilt index file matching `backend`.
    pub index: String,
    pub backend: BackendKind,
    pub mode: AssessMode,
    /// Max iterations T.
    pub iterations: usize,
    /// Rank cutoff c for the average-distance metric.
    pub rank_cutoff: usize,
    /// Page-size cap for planner tool calls.
    pub max_results_per_request: usize,
    /// Result count for the direct-query baseline's single call.
    pub direct_k: usize,
    /// Experience-buffer character cap.
    pub buffer_cap: usize,
    /// Re-asks after a parse failure before a stage degrades.
    pub max_parse_retries: u32,
    /// Reject incomplete plans proposing outside 3..=6 subqueries.
    pub strict_subquery_bounds: bool,
    /// Worker cap for query-level fan-out; 0 means all available cores, 1
    /// forces sequential execution.
    pub parallelism: usize,
    /// Trajectories and reports land here.
    pub output_dir: String,
    /// Toy hash-embedder dimension for the dense backend.
    pub embedder_dim: usize,
    pub policy: PolicyConfig,
    pub decoding: Decoding,
    pub retry: RetryPolicy,
    pub fulltext: FullTextConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: String::new(),
            benchmark: String::new(),
            index: String::new(),
            backend: BackendKind::Sparse,
            mode: AssessMode::AbstractOnly,
            iterations: 5,
            rank_cutoff: 100,
            max_results_per_request: 10,
            direct_k: 50,
            buffer_cap: 4_000,
            max_parse_retries: 2,
            strict_subquery_bounds: false,
            parallelism: 0,
            output_dir: "out".to_string(),
            embedder_dim: 64,
            policy: PolicyConfig::default(),
            decoding: Decoding::default(),
            retry: RetryPolicy::default(),
            fulltext: FullTextConfig::default(),
        }
    }
}

impl RunConfig {
    /// Documented minima for every numeric field.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("iterations", self.iterations >= 1),
            ("rank_cutoff", self.rank_cutoff >= 1),
            ("max_results_per_request", self.max_results_per_request >= 1),
            ("direct_k", self.direct_k >= 1),
            ("buffer_cap", self.buffer_cap >= 1),
            ("embedder_dim", self.embedder_dim >= 1),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::Config(format!("{name} below its minimum")));
            }
        }
        if self.decoding.temperature < 0.0 || !(0.0..=1.0).contains(&self.decoding.top_p) {
            return Err(Error::Config("decoding parameters out of range".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON serialization. Field order is fixed by
    /// the struct, so identical configurations digest identically.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
