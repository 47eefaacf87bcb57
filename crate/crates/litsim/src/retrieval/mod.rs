//! Deterministic retrieval: parameterized tool calls executed against a
//! corpus snapshot with sparse (BM25) or dense (exact cosine) ranking.
//!
//! Both backends share the same contract: papers dated after the call's
//! date constraint are excluded *before* ranking, ties are broken by
//! ascending paper id, and pagination slices a single global ranking, so
//! identical `(snapshot, call, backend, parameters)` always produce an
//! identical [`CandidateSet`] across process restarts.

pub mod dense;
pub mod sparse;
pub mod tokenize;

use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::corpus::PaperId;
use crate::{Error, Result};

pub use dense::{build_dense_index, search_dense, DenseIndex, Embedder, HashEmbedder};
pub use sparse::{build_sparse_index, search_sparse, Bm25Params, SparseIndex};
pub use tokenize::tokenize;

/// One parameterized retrieval request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub query_text: String,
    /// Results requested for this page.
    pub k: usize,
    /// Inclusive upper bound on candidate publication dates.
    pub date_constraint: NaiveDate,
    /// Zero-based page index; each call returns exactly one page.
    pub page: usize,
}

impl ToolCall {
    pub fn new(query_text: impl Into<String>, k: usize, date_constraint: NaiveDate) -> Self {
        ToolCall {
            query_text: query_text.into(),
            k,
            date_constraint,
            page: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidToolCall("k must be positive".into()));
        }
        Ok(())
    }
}

/// One ranked result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub paper_id: PaperId,
    /// Backend-native relevance (BM25 score or cosine similarity).
    pub score: f64,
    /// 1-based rank in the full date-filtered ranking for this query,
    /// independent of pagination: page `p` carries ranks `p*k+1 ..`.
    pub rank: usize,
}

/// Ranked results for one tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub call: ToolCall,
    pub hits: Vec<ScoredHit>,
    /// True when no further pages exist for this call.
    pub exhausted: bool,
}

impl CandidateSet {
    pub fn paper_ids(&self) -> impl Iterator<Item = &PaperId> {
        self.hits.iter().map(|h| &h.paper_id)
    }

    fn empty(call: ToolCall) -> Self {
        CandidateSet {
            call,
            hits: Vec::new(),
            exhausted: true,
        }
    }
}

/// Builds the next-page call for a non-exhausted candidate set.
///
/// Query text, `k`, and date constraint are preserved; only the page index
/// advances. Calling this on an exhausted set is planner misuse.
pub fn continue_page(prior: &CandidateSet) -> Result<ToolCall> {
    if prior.exhausted {
        return Err(Error::ExhaustedPagination);
    }
    let mut call = prior.call.clone();
    call.page += 1;
    Ok(call)
}

/// Slices one page out of a full ranking, assigning global ranks.
fn paginate(call: ToolCall, ranking: Vec<(PaperId, f64)>) -> CandidateSet {
    let total = ranking.len();
    let start = call.page.saturating_mul(call.k).min(total);
    let end = start.saturating_add(call.k).min(total);
    let hits = ranking[start..end]
        .iter()
        .enumerate()
        .map(|(i, (paper_id, score))| ScoredHit {
            paper_id: paper_id.clone(),
            score: *score,
            rank: start + i + 1,
        })
        .collect();
    CandidateSet {
        exhausted: start + call.k >= total,
        call,
        hits,
    }
}

/// Sorts `(paper_id, score)` pairs by descending score, ties by ascending id.
fn sort_ranking(ranking: &mut [(PaperId, f64)]) {
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Which retrieval method a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Sparse,
    Dense,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Sparse => f.write_str("sparse"),
            BackendKind::Dense => f.write_str("dense"),
        }
    }
}

/// A ready-to-search backend. Indexes are immutable after build; searches
/// are read-only and may run concurrently.
#[derive(Clone)]
pub enum Backend {
    Sparse(Arc<SparseIndex>),
    Dense {
        index: Arc<DenseIndex>,
        embedder: Arc<dyn Embedder>,
    },
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::Sparse(_) => BackendKind::Sparse,
            Backend::Dense { .. } => BackendKind::Dense,
        }
    }

    pub fn snapshot_digest(&self) -> &str {
        match self {
            Backend::Sparse(index) => index.snapshot_digest(),
            Backend::Dense { index, .. } => index.snapshot_digest(),
        }
    }

    /// Executes one tool call. `parallel` only affects wall-clock time, never
    /// results.
    pub fn search(&self, call: &ToolCall, parallel: bool) -> Result<CandidateSet> {
        match self {
            Backend::Sparse(index) => search_sparse(index, call),
            Backend::Dense { index, embedder } => {
                search_dense(index, call, embedder.as_ref(), parallel)
            }
        }
    }
}

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// First line of a persisted index file; the index JSON follows on line two.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexHeader {
    pub format_version: u32,
    pub kind: BackendKind,
    /// SHA-256 of the index payload line.
    pub index_digest: String,
}

fn write_index_file<W: std::io::Write, T: Serialize>(
    mut w: W,
    kind: BackendKind,
    index: &T,
) -> Result<()> {
    let payload = serde_json::to_string(index)?;
    let header = IndexHeader {
        format_version: INDEX_FORMAT_VERSION,
        kind,
        index_digest: hex::encode(sha2::Sha256::digest(payload.as_bytes())),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    w.write_all(payload.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

fn read_index_file<R: std::io::BufRead>(mut r: R, expect: BackendKind) -> Result<String> {
    let mut header_line = String::new();
    r.read_line(&mut header_line)?;
    let header: IndexHeader = serde_json::from_str(header_line.trim_end())?;
    if header.format_version != INDEX_FORMAT_VERSION {
        return Err(Error::Index(format!(
            "unsupported index format version {}",
            header.format_version
        )));
    }
    if header.kind != expect {
        return Err(Error::Index(format!(
            "index file holds a {} index, expected {}",
            header.kind, expect
        )));
    }
    let mut payload = String::new();
    r.read_line(&mut payload)?;
    let payload = payload.trim_end_matches('\n').to_string();
    let digest = hex::encode(sha2::Sha256::digest(payload.as_bytes()));
    if digest != header.index_digest {
        return Err(Error::Index("index payload digest mismatch".into()));
    }
    Ok(payload)
}

/// Reads only the header of a persisted index file.
pub fn peek_index_header<R: std::io::BufRead>(mut r: R) -> Result<IndexHeader> {
    let mut header_line = String::new();
    r.read_line(&mut header_line)?;
    Ok(serde_json::from_str(header_line.trim_end())?)
}

pub fn write_sparse_index<W: std::io::Write>(index: &SparseIndex, w: W) -> Result<()> {
    write_index_file(w, BackendKind::Sparse, index)
}

pub fn read_sparse_index<R: std::io::BufRead>(r: R) -> Result<SparseIndex> {
    Ok(serde_json::from_str(&read_index_file(r, BackendKind::Sparse)?)?)
}

pub fn write_dense_index<W: std::io::Write>(index: &DenseIndex, w: W) -> Result<()> {
    write_index_file(w, BackendKind::Dense, index)
}

pub fn read_dense_index<R: std::io::BufRead>(r: R) -> Result<DenseIndex> {
    Ok(serde_json::from_str(&read_index_file(r, BackendKind::Dense)?)?)
}
