//! Okapi BM25 over an inverted index of tokenized title+abstract.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{CorpusSnapshot, PaperId};
use crate::{Error, Result};

use super::tokenize::tokenize;
use super::{paginate, sort_ranking, CandidateSet, ToolCall};

/// Okapi BM25 parameters. `IDF = ln((N - df + 0.5) / (df + 0.5) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Posting {
    /// Index into the id-ordered document table.
    doc: u32,
    /// Term frequency in the document.
    tf: u32,
}

/// Immutable inverted index over a corpus snapshot.
///
/// Documents are stored in ascending id order, so document indexes order the
/// same way ids do and tie-breaking by index equals tie-breaking by id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseIndex {
    params: Bm25Params,
    snapshot_digest: String,
    doc_ids: Vec<PaperId>,
    doc_dates: Vec<NaiveDate>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl SparseIndex {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn snapshot_digest(&self) -> &str {
        &self.snapshot_digest
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    /// Number of documents containing `token`.
    pub fn document_frequency(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, Vec::len)
    }

    pub fn distinct_tokens(&self) -> usize {
        self.postings.len()
    }

    /// SHA-256 over the canonical serialization; identical snapshots and
    /// parameters produce identical digests.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("index serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Full BM25 ranking for `query_text` over documents dated on or before
    /// `date_constraint`, sorted by descending score then ascending id.
    /// Only documents sharing at least one token with the query appear.
    pub fn ranking(&self, query_text: &str, date_constraint: NaiveDate) -> Vec<(PaperId, f64)> {
        let query_tokens = tokenize(query_text);
        if query_tokens.is_empty() {
            return Vec::new();
        }
        let n = self.doc_ids.len() as f64;
        let mut scores = vec![0.0f64; self.doc_ids.len()];
        let mut touched = vec![false; self.doc_ids.len()];

        // Accumulation order is fixed (query tokens outer, postings inner),
        // so per-document sums are bit-reproducible.
        for token in &query_tokens {
            let Some(postings) = self.postings.get(token) else {
                continue;
            };
            let df = postings.len() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            for p in postings {
                let doc = p.doc as usize;
                if self.doc_dates[doc] > date_constraint {
                    continue;
                }
                let tf = p.tf as f64;
                let dl = self.doc_lengths[doc] as f64;
                let tf_norm = (tf * (self.params.k1 + 1.0))
                    / (tf + self.params.k1 * (1.0 - self.params.b + self.params.b * dl / self.avg_doc_len));
                scores[doc] += idf * tf_norm;
                touched[doc] = true;
            }
        }

        let mut ranking: Vec<(PaperId, f64)> = touched
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(|(doc, _)| (self.doc_ids[doc].clone(), scores[doc]))
            .collect();
        sort_ranking(&mut ranking);
        ranking
    }
}

/// Builds the inverted index over tokenized title+abstract.
pub fn build_sparse_index(snapshot: &CorpusSnapshot, params: Bm25Params) -> Result<SparseIndex> {
    if snapshot.is_empty() {
        return Err(Error::Index("cannot index an empty snapshot".into()));
    }
    let mut doc_ids = Vec::with_capacity(snapshot.len());
    let mut doc_dates = Vec::with_capacity(snapshot.len());
    let mut doc_lengths = Vec::with_capacity(snapshot.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();

    for (doc, paper) in snapshot.iter().enumerate() {
        let tokens = tokenize(&paper.searchable_text());
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        for (token, tf) in counts {
            postings.entry(token.to_string()).or_default().push(Posting {
                doc: doc as u32,
                tf,
            });
        }
        doc_ids.push(paper.id.clone());
        doc_dates.push(paper.date);
        doc_lengths.push(tokens.len() as u32);
    }

    let avg_doc_len = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64;
    Ok(SparseIndex {
        params,
        snapshot_digest: snapshot.digest().to_string(),
        doc_ids,
        doc_dates,
        doc_lengths,
        avg_doc_len,
        postings,
    })
}

/// Executes one tool call against the sparse index.
///
/// A query that tokenizes to nothing yields an empty, exhausted candidate
/// set: an unproductive query, not a failure.
pub fn search_sparse(index: &SparseIndex, call: &ToolCall) -> Result<CandidateSet> {
    call.validate()?;
    if tokenize(&call.query_text).is_empty() {
        return Ok(CandidateSet::empty(call.clone()));
    }
    let ranking = index.ranking(&call.query_text, call.date_constraint);
    Ok(paginate(call.clone(), ranking))
}
