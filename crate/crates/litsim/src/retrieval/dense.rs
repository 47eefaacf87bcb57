//! Dense retrieval: embedding vectors ranked by exact cosine similarity.
//!
//! No approximate nearest-neighbor structures: the scan is exhaustive and
//! exact at desk scale, which keeps results deterministic and lets a
//! brute-force oracle check the implementation one-to-one. Per-document
//! scores are independent, so the scan parallelizes without changing any
//! result bit.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{CorpusSnapshot, PaperId};
use crate::par::map_slice;
use crate::{Error, Result};

use super::tokenize::tokenize;
use super::{paginate, sort_ranking, CandidateSet, ToolCall};

/// A pure text-to-vector function with a fixed output dimension.
///
/// Implementations must be deterministic: the same text always maps to the
/// same vector, across processes and platforms.
pub trait Embedder: Send + Sync {
    /// Fixed output dimension, declared once.
    fn dim(&self) -> usize;
    /// Embeds one text. The returned vector must have length [`Embedder::dim`].
    fn embed(&self, text: &str) -> Vec<f64>;
    /// Stable identifier recorded in indexes so a mismatched embedder is
    /// refused at search time instead of silently producing garbage.
    fn id(&self) -> String;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic toy embedder: signed hash projection of token counts.
///
/// Each token hashes to one bucket with sign taken from the hash's top bit.
/// Useful for tests and deterministic end-to-end runs; real embedders plug
/// in behind the same trait.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedder dimension must be positive");
        HashEmbedder { dim }
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        v
    }

    fn id(&self) -> String {
        format!("hash-fnv1a-{}", self.dim)
    }
}

/// One vector per paper over concatenated title+abstract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseIndex {
    embedder_id: String,
    dim: usize,
    snapshot_digest: String,
    doc_ids: Vec<PaperId>,
    doc_dates: Vec<NaiveDate>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl DenseIndex {
    pub fn snapshot_digest(&self) -> &str {
        &self.snapshot_digest
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vector(&self, id: &PaperId) -> Option<&[f64]> {
        let idx = self.doc_ids.binary_search(id).ok()?;
        Some(&self.vectors[idx])
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("index serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Exhaustive cosine ranking over documents dated on or before
    /// `date_constraint`. Every eligible document appears, including
    /// zero-score ones; ties order by ascending paper id.
    pub fn ranking(
        &self,
        query_vector: &[f64],
        date_constraint: NaiveDate,
        parallel: bool,
    ) -> Vec<(PaperId, f64)> {
        let qnorm = l2_norm(query_vector);
        let eligible: Vec<usize> = (0..self.doc_ids.len())
            .filter(|&i| self.doc_dates[i] <= date_constraint)
            .collect();
        let mut ranking: Vec<(PaperId, f64)> = map_slice(&eligible, parallel, |&i| {
            let score = cosine_with_norms(query_vector, qnorm, &self.vectors[i], self.norms[i]);
            (self.doc_ids[i].clone(), score)
        });
        sort_ranking(&mut ranking);
        ranking
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine_with_norms(a: &[f64], a_norm: f64, b: &[f64], b_norm: f64) -> f64 {
    if a_norm == 0.0 || b_norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a_norm * b_norm)
}

/// Cosine similarity of two equal-length vectors; zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, l2_norm(a), b, l2_norm(b))
}

/// Embeds every paper's title+abstract. A vector whose length disagrees with
/// the embedder's declared dimension is a hard error.
pub fn build_dense_index(snapshot: &CorpusSnapshot, embedder: &dyn Embedder) -> Result<DenseIndex> {
    if snapshot.is_empty() {
        return Err(Error::Index("cannot index an empty snapshot".into()));
    }
    let dim = embedder.dim();
    let mut doc_ids = Vec::with_capacity(snapshot.len());
    let mut doc_dates = Vec::with_capacity(snapshot.len());
    let mut vectors = Vec::with_capacity(snapshot.len());
    let mut norms = Vec::with_capacity(snapshot.len());
    for paper in snapshot.iter() {
        let v = embedder.embed(&paper.searchable_text());
        if v.len() != dim {
            return Err(Error::Index(format!(
                "embedder returned {} dims for {}, declared {}",
                v.len(),
                paper.id,
                dim
            )));
        }
        norms.push(l2_norm(&v));
        vectors.push(v);
        doc_ids.push(paper.id.clone());
        doc_dates.push(paper.date);
    }
    Ok(DenseIndex {
        embedder_id: embedder.id(),
        dim,
        snapshot_digest: snapshot.digest().to_string(),
        doc_ids,
        doc_dates,
        vectors,
        norms,
    })
}

/// Executes one tool call against the dense index.
///
/// Mirrors the sparse contract: date filter before ranking, same tie-break,
/// same pagination, and a query that tokenizes to nothing yields an empty,
/// exhausted set.
pub fn search_dense(
    index: &DenseIndex,
    call: &ToolCall,
    embedder: &dyn Embedder,
    parallel: bool,
) -> Result<CandidateSet> {
    call.validate()?;
    if embedder.id() != index.embedder_id {
        return Err(Error::Index(format!(
            "embedder {} does not match index embedder {}",
            embedder.id(),
            index.embedder_id
        )));
    }
    if tokenize(&call.query_text).is_empty() {
        return Ok(CandidateSet::empty(call.clone()));
    }
    let qv = embedder.embed(&call.query_text);
    if qv.len() != index.dim {
        return Err(Error::Index(format!(
            "query embedding has {} dims, index has {}",
            qv.len(),
            index.dim
        )));
    }
    let ranking = index.ranking(&qv, call.date_constraint, parallel);
    Ok(paginate(call.clone(), ranking))
}
