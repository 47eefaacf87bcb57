//! Evaluation metrics computed from trajectories and ground truth.
//!
//! Two stages are measured: *retrieval* (candidates returned by the backend,
//! cumulative set R) and *selection* (papers kept after assessment,
//! cumulative set S). All operations are pure functions of
//! `(trajectory, ground truth, parameters)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::PaperId;
use crate::workflow::Trajectory;
use crate::{Error, Result};

/// Harmonic mean of recall and precision; 0 when both are 0.
pub fn f1_score(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}

/// Recall/precision/F1 triple for one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

fn stage_metrics(predicted: &BTreeSet<PaperId>, gt: &BTreeSet<PaperId>) -> Result<PrecisionRecall> {
    if gt.is_empty() {
        return Err(Error::Metrics(
            "empty ground truth: query must be excluded upstream".into(),
        ));
    }
    let hits = predicted.intersection(gt).count() as f64;
    let recall = hits / gt.len() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        hits / predicted.len() as f64
    };
    Ok(PrecisionRecall {
        recall,
        precision,
        f1: f1_score(recall, precision),
    })
}

/// Selection-stage recall/precision/F1: `R = |S∩G|/|G|`, `P = |S∩G|/|S|`
/// (0 when S is empty).
pub fn selection_metrics(
    selected: &BTreeSet<PaperId>,
    gt: &BTreeSet<PaperId>,
) -> Result<PrecisionRecall> {
    stage_metrics(selected, gt)
}

/// Retrieval-stage recall/precision/F1 over the cumulative retrieved set.
pub fn retrieval_metrics(
    retrieved: &BTreeSet<PaperId>,
    gt: &BTreeSet<PaperId>,
) -> Result<PrecisionRecall> {
    stage_metrics(retrieved, gt)
}

/// Best (minimum) rank of each ground-truth paper across every candidate set
/// in iterations 1..=t. Ranks are the hits' global per-query ranks, so
/// pagination does not distort them.
fn best_ranks_through(
    trajectory: &Trajectory,
    gt: &BTreeSet<PaperId>,
    through_iteration: usize,
) -> BTreeMap<PaperId, usize> {
    let mut best: BTreeMap<PaperId, usize> = BTreeMap::new();
    for record in trajectory
        .iterations
        .iter()
        .filter(|r| r.iteration <= through_iteration)
    {
        for set in &record.candidate_sets {
            for hit in &set.hits {
                if gt.contains(&hit.paper_id) {
                    best.entry(hit.paper_id.clone())
                        .and_modify(|r| *r = (*r).min(hit.rank))
                        .or_insert(hit.rank);
                }
            }
        }
    }
    best
}

/// Distance credit for one rank: `max(1 - r/c, 0)`.
fn distance_credit(rank: usize, cutoff: usize) -> f64 {
    (1.0 - rank as f64 / cutoff as f64).max(0.0)
}

/// Mean over ground truth of `max(1 - r_g/c, 0)`, where `r_g` is the paper's
/// best rank across all subqueries and iterations. Never-retrieved papers
/// and papers ranked at or beyond the cutoff receive zero credit.
pub fn avg_distance(trajectory: &Trajectory, gt: &BTreeSet<PaperId>, cutoff: usize) -> f64 {
    avg_distance_through(trajectory, gt, cutoff, usize::MAX)
}

fn avg_distance_through(
    trajectory: &Trajectory,
    gt: &BTreeSet<PaperId>,
    cutoff: usize,
    through_iteration: usize,
) -> f64 {
    if gt.is_empty() {
        return 0.0;
    }
    let best = best_ranks_through(trajectory, gt, through_iteration);
    let total: f64 = gt
        .iter()
        .map(|g| best.get(g).map_or(0.0, |r| distance_credit(*r, cutoff)))
        .sum();
    total / gt.len() as f64
}

/// Which ground-truth discard denominator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtDiscardVariant {
    /// `|(R∩G)\S| / |R\S|`: relevant losses among everything discarded.
    Main,
    /// `|(R∩G)\(S∩G)| / |R∩G|`: fraction of retrieved relevant papers lost.
    Retention,
}

fn gt_discard_sets(
    retrieved: &BTreeSet<PaperId>,
    selected: &BTreeSet<PaperId>,
    gt: &BTreeSet<PaperId>,
    variant: GtDiscardVariant,
) -> f64 {
    let relevant_retrieved: BTreeSet<&PaperId> = retrieved.intersection(gt).collect();
    let lost = relevant_retrieved
        .iter()
        .filter(|id| !selected.contains(**id))
        .count() as f64;
    let denominator = match variant {
        GtDiscardVariant::Main => retrieved.difference(selected).count() as f64,
        GtDiscardVariant::Retention => relevant_retrieved.len() as f64,
    };
    if denominator == 0.0 {
        0.0
    } else {
        lost / denominator
    }
}

/// Ground-truth discard rate over the trajectory's cumulative sets.
pub fn gt_discard(trajectory: &Trajectory, gt: &BTreeSet<PaperId>, variant: GtDiscardVariant) -> f64 {
    let retrieved = trajectory.retrieved();
    gt_discard_sets(&retrieved, &trajectory.final_selected, gt, variant)
}

/// Every metric at one cumulative cut t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub ret_recall: f64,
    pub ret_precision: f64,
    pub ret_f1: f64,
    pub avg_distance: f64,
    pub gt_discard_main: f64,
    pub gt_discard_retention: f64,
}

/// Per-query metric curves; the last entry is the final row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub qid: String,
    pub per_iteration: Vec<IterationMetrics>,
}

impl MetricsRow {
    pub fn final_metrics(&self) -> &IterationMetrics {
        self.per_iteration.last().expect("at least one iteration row")
    }
}

/// Computes cumulative metrics at every iteration cut: `R^(t)` and `S^(t)`
/// are unions through t, and all metrics are recomputed on them.
pub fn per_iteration(
    trajectory: &Trajectory,
    gt: &BTreeSet<PaperId>,
    cutoff: usize,
) -> Result<MetricsRow> {
    if gt.is_empty() {
        return Err(Error::Metrics(format!(
            "{}: empty ground truth, query must be excluded upstream",
            trajectory.qid
        )));
    }
    let mut rows = Vec::new();
    let mut retrieved: BTreeSet<PaperId> = BTreeSet::new();
    let mut selected: BTreeSet<PaperId> = BTreeSet::new();
    for record in &trajectory.iterations {
        for set in &record.candidate_sets {
            retrieved.extend(set.paper_ids().cloned());
        }
        selected.extend(record.selected_new.iter().cloned());
        let sel = selection_metrics(&selected, gt)?;
        let ret = retrieval_metrics(&retrieved, gt)?;
        rows.push(IterationMetrics {
            iteration: record.iteration,
            recall: sel.recall,
            precision: sel.precision,
            f1: sel.f1,
            ret_recall: ret.recall,
            ret_precision: ret.precision,
            ret_f1: ret.f1,
            avg_distance: avg_distance_through(trajectory, gt, cutoff, record.iteration),
            gt_discard_main: gt_discard_sets(&retrieved, &selected, gt, GtDiscardVariant::Main),
            gt_discard_retention: gt_discard_sets(
                &retrieved,
                &selected,
                gt,
                GtDiscardVariant::Retention,
            ),
        });
    }
    if rows.is_empty() {
        // A trajectory may terminate before executing any iteration; metrics
        // are then the all-zero row at t=0 (nothing retrieved or selected).
        rows.push(IterationMetrics {
            iteration: 0,
            recall: 0.0,
            precision: 0.0,
            f1: 0.0,
            ret_recall: 0.0,
            ret_precision: 0.0,
            ret_f1: 0.0,
            avg_distance: 0.0,
            gt_discard_main: 0.0,
            gt_discard_retention: 0.0,
        });
    }
    Ok(MetricsRow {
        qid: trajectory.qid.clone(),
        per_iteration: rows,
    })
}

/// Macro-averaged benchmark report: unweighted means over queries, per
/// iteration cut. Queries that terminated early carry their final cumulative
/// values forward to later cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub query_count: usize,
    pub excluded_queries: usize,
    pub per_iteration: Vec<IterationMetrics>,
}

impl BenchmarkReport {
    pub fn final_row(&self) -> &IterationMetrics {
        self.per_iteration.last().expect("at least one row")
    }
}

/// Unweighted mean over queries per metric per iteration cut.
pub fn aggregate(rows: &[MetricsRow], excluded_queries: usize) -> Result<BenchmarkReport> {
    if rows.is_empty() {
        return Err(Error::Metrics("no usable metric rows to aggregate".into()));
    }
    let depth = rows
        .iter()
        .map(|r| r.per_iteration.len())
        .max()
        .unwrap_or(1);
    let n = rows.len() as f64;
    let mut per_iteration = Vec::with_capacity(depth);
    for t in 0..depth {
        let mut acc = [0.0f64; 9];
        for row in rows {
            // Carry the last cumulative row forward for short trajectories.
            let m = row.per_iteration[t.min(row.per_iteration.len() - 1)];
            acc[0] += m.recall;
            acc[1] += m.precision;
            acc[2] += m.f1;
            acc[3] += m.ret_recall;
            acc[4] += m.ret_precision;
            acc[5] += m.ret_f1;
            acc[6] += m.avg_distance;
            acc[7] += m.gt_discard_main;
            acc[8] += m.gt_discard_retention;
        }
        per_iteration.push(IterationMetrics {
            iteration: t + 1,
            recall: acc[0] / n,
            precision: acc[1] / n,
            f1: acc[2] / n,
            ret_recall: acc[3] / n,
            ret_precision: acc[4] / n,
            ret_f1: acc[5] / n,
            avg_distance: acc[6] / n,
            gt_discard_main: acc[7] / n,
            gt_discard_retention: acc[8] / n,
        });
    }
    Ok(BenchmarkReport {
        query_count: rows.len(),
        excluded_queries,
        per_iteration,
    })
}

/// Aligned plain-text table of the final-iteration aggregate.
pub fn render_text_table(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "queries={} excluded={}\n",
        report.query_count, report.excluded_queries
    ));
    out.push_str(
        "Iter      R       P      F1   Ret.R   Ret.P  Ret.F1  AvgDist  GTDisc%  Reten%\n",
    );
    for m in &report.per_iteration {
        out.push_str(&format!(
            "{:>4}  {:.3}   {:.3}   {:.3}   {:.3}   {:.3}   {:.3}    {:.3}    {:.3}   {:.3}\n",
            m.iteration,
            m.recall,
            m.precision,
            m.f1,
            m.ret_recall,
            m.ret_precision,
            m.ret_f1,
            m.avg_distance,
            m.gt_discard_main * 100.0,
            m.gt_discard_retention * 100.0,
        ));
    }
    out
}

/// CSV of per-query per-iteration curves for external plotting.
pub fn curves_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(
        "qid,iteration,recall,precision,f1,ret_recall,ret_precision,ret_f1,avg_distance,gt_discard_main,gt_discard_retention\n",
    );
    for row in rows {
        for m in &row.per_iteration {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                row.qid,
                m.iteration,
                m.recall,
                m.precision,
                m.f1,
                m.ret_recall,
                m.ret_precision,
                m.ret_f1,
                m.avg_distance,
                m.gt_discard_main,
                m.gt_discard_retention,
            ));
        }
    }
    out
}
