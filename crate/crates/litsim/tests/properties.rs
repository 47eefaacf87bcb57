//! Property tests for the spec-level invariants: ingestion determinism,
//! retrieval/oracle equivalence, pagination laws, render/parse round-trips,
//! tree invariants, and metric identities against a naive oracle.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use proptest::prelude::*;

use litsim::config::RunConfig;
use litsim::corpus::{ingest, CorpusSnapshot, DateWindow, PaperId};
use litsim::memory::{apply_plan, render_state, ExperienceBuffer, PlanDefaults, SubqueryTree};
use litsim::metrics;
use litsim::policy::{
    parse_assessment, parse_plan, AssessMode, Assessment, LinkType, Plan, PlanItem,
};
use litsim::retrieval::{
    build_dense_index, build_sparse_index, continue_page, search_dense, search_sparse, tokenize,
    Bm25Params, Embedder, HashEmbedder, ScoredHit, ToolCall,
};
use litsim::workflow::{IterationRecord, TerminatedReason, Trajectory};

const VOCAB: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu",
];

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

#[derive(Debug, Clone)]
struct Doc {
    id_num: u32,
    title: Vec<usize>,
    abstract_words: Vec<usize>,
    year: i32,
}

fn doc_strategy() -> impl Strategy<Value = Doc> {
    (
        0u32..10_000,
        prop::collection::vec(0usize..VOCAB.len(), 1..5),
        prop::collection::vec(0usize..VOCAB.len(), 1..12),
        2000i32..2024,
    )
        .prop_map(|(id_num, title, abstract_words, year)| Doc {
            id_num,
            title,
            abstract_words,
            year,
        })
}

fn corpus_lines(docs: &[Doc]) -> Vec<String> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            let title: Vec<&str> = d.title.iter().map(|w| VOCAB[*w]).collect();
            let abs: Vec<&str> = d.abstract_words.iter().map(|w| VOCAB[*w]).collect();
            serde_json::json!({
                "id": format!("{:04}.{:05}", 1000 + i, d.id_num),
                "title": title.join(" "),
                "abstract": abs.join(" "),
                "date": format!("{}-06-15", d.year),
                "authors": [], "categories": []
            })
            .to_string()
        })
        .collect()
}

fn snapshot_of(docs: &[Doc]) -> CorpusSnapshot {
    ingest(corpus_lines(docs).join("\n").as_bytes(), DateWindow::default())
        .unwrap()
        .0
}

/// Straight-line BM25 over raw documents, independent of the inverted index.
fn oracle_bm25(
    snapshot: &CorpusSnapshot,
    params: Bm25Params,
    query: &str,
    constraint: NaiveDate,
) -> Vec<(PaperId, f64)> {
    let query_tokens = tokenize(query);
    let docs: Vec<(&PaperId, Vec<String>, NaiveDate)> = snapshot
        .iter()
        .map(|p| (&p.id, tokenize(&p.searchable_text()), p.date))
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, t, _)| t.len() as f64).sum::<f64>() / n;
    let mut out = Vec::new();
    for (id, tokens, d) in &docs {
        if *d > constraint {
            continue;
        }
        let mut score = 0.0f64;
        let mut matched = false;
        for q in &query_tokens {
            let tf = tokens.iter().filter(|t| *t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs
                .iter()
                .filter(|(_, dt, _)| dt.iter().any(|t| t == q))
                .count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            let dl = tokens.len() as f64;
            score += idf * (tf * (params.k1 + 1.0))
                / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
            matched = true;
        }
        if matched {
            out.push(((*id).clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ingest_digest_is_order_insensitive(
        docs in prop::collection::vec(doc_strategy(), 2..20),
        seed in 0u64..1000,
    ) {
        let mut lines = corpus_lines(&docs);
        let (a, _) = ingest(lines.join("\n").as_bytes(), DateWindow::default()).unwrap();
        // Deterministic shuffle from the seed.
        let mut s = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        for i in (1..lines.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            lines.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let (b, _) = ingest(lines.join("\n").as_bytes(), DateWindow::default()).unwrap();
        prop_assert_eq!(a.digest(), b.digest());
        a.validate().unwrap();
    }

    #[test]
    fn sparse_search_matches_oracle_and_respects_dates(
        docs in prop::collection::vec(doc_strategy(), 3..25),
        query_words in prop::collection::vec(0usize..VOCAB.len(), 1..4),
        k in 1usize..8,
        year in 2000i32..2025,
    ) {
        let snapshot = snapshot_of(&docs);
        let params = Bm25Params::default();
        let index = build_sparse_index(&snapshot, params).unwrap();
        let query: Vec<&str> = query_words.iter().map(|w| VOCAB[*w]).collect();
        let constraint = date(year, 12, 31);
        let call = ToolCall::new(query.join(" "), k, constraint);

        let got = search_sparse(&index, &call).unwrap();
        let oracle = oracle_bm25(&snapshot, params, &call.query_text, constraint);

        // Identical top-k ids in identical order.
        let got_ids: Vec<_> = got.paper_ids().cloned().collect();
        let oracle_ids: Vec<_> = oracle.iter().take(k).map(|(id, _)| id.clone()).collect();
        prop_assert_eq!(got_ids, oracle_ids);

        // Date soundness and rank contiguity.
        for hit in &got.hits {
            let paper = snapshot.get(&hit.paper_id).unwrap();
            prop_assert!(paper.date <= constraint);
        }
        for (i, hit) in got.hits.iter().enumerate() {
            prop_assert_eq!(hit.rank, i + 1);
        }
        // Scores non-increasing with rank.
        for w in got.hits.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        // Determinism across a rebuild.
        let index2 = build_sparse_index(&snapshot, params).unwrap();
        let again = search_sparse(&index2, &call).unwrap();
        prop_assert_eq!(got, again);
    }

    #[test]
    fn pagination_is_disjoint_and_prefix_faithful(
        docs in prop::collection::vec(doc_strategy(), 5..25),
        query_words in prop::collection::vec(0usize..VOCAB.len(), 1..3),
        k in 1usize..5,
    ) {
        let snapshot = snapshot_of(&docs);
        let index = build_sparse_index(&snapshot, Bm25Params::default()).unwrap();
        let query: Vec<&str> = query_words.iter().map(|w| VOCAB[*w]).collect();
        let call = ToolCall::new(query.join(" "), k, date(2024, 12, 31));

        let unpaginated = index.ranking(&call.query_text, call.date_constraint);
        let mut seen: Vec<PaperId> = Vec::new();
        let mut current = call;
        loop {
            let set = search_sparse(&index, &current).unwrap();
            for hit in &set.hits {
                prop_assert!(!seen.contains(&hit.paper_id), "pages must be disjoint");
                seen.push(hit.paper_id.clone());
            }
            if set.exhausted {
                break;
            }
            current = continue_page(&set).unwrap();
        }
        let expect: Vec<PaperId> = unpaginated.into_iter().map(|(id, _)| id).collect();
        prop_assert_eq!(seen, expect, "concatenated pages must equal the full ranking");
    }

    #[test]
    fn dense_search_matches_cosine_oracle(
        docs in prop::collection::vec(doc_strategy(), 3..20),
        query_words in prop::collection::vec(0usize..VOCAB.len(), 1..4),
        k in 1usize..8,
    ) {
        let snapshot = snapshot_of(&docs);
        let embedder = HashEmbedder::new(16);
        let index = build_dense_index(&snapshot, &embedder).unwrap();
        let query: Vec<&str> = query_words.iter().map(|w| VOCAB[*w]).collect();
        let call = ToolCall::new(query.join(" "), k, date(2024, 12, 31));
        let got = search_dense(&index, &call, &embedder, false).unwrap();

        let qv = embedder.embed(&call.query_text);
        let mut oracle: Vec<(PaperId, f64)> = snapshot
            .iter()
            .map(|p| {
                (
                    p.id.clone(),
                    litsim::retrieval::dense::cosine(&qv, &embedder.embed(&p.searchable_text())),
                )
            })
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let got_ids: Vec<_> = got.paper_ids().cloned().collect();
        let oracle_ids: Vec<_> = oracle.iter().take(k.min(oracle.len())).map(|(id, _)| id.clone()).collect();
        prop_assert_eq!(got_ids, oracle_ids);
    }

    #[test]
    fn plan_render_parse_round_trip_loses_nothing(
        n_items in 1usize..6,
        kinds in prop::collection::vec(0u8..3, 6),
        ks in prop::collection::vec(1usize..20, 6),
        checklist in "[ -~]{0,40}",
        replay in "[ -~]{0,40}",
        is_complete in any::<bool>(),
    ) {
        let mut subqueries = Vec::new();
        for i in 0..n_items {
            let (link_type, source_id, text) = match kinds[i] % 3 {
                0 => (LinkType::Derive, 0, Some(format!("derive text {i}"))),
                1 => (LinkType::Expand, 0, Some(format!("expand text {i}"))),
                _ => (LinkType::Continue, 1, None),
            };
            subqueries.push(PlanItem { link_type, source_id, text, target_k: ks[i] });
        }
        let plan = Plan { subqueries, checklist, experience_replay: replay, is_complete };
        let payload = format!(
            "preamble chatter\n<planner_output>{}</planner_output>\ntrailing",
            serde_json::to_string(&plan).unwrap()
        );
        let parsed = parse_plan(&payload).unwrap();
        prop_assert_eq!(parsed.plan, plan);
    }

    #[test]
    fn assessment_render_parse_round_trip(
        n in 1usize..8,
        selected_mask in prop::collection::vec(any::<bool>(), 8),
        overview in "[ -~]{0,60}",
    ) {
        let presented: Vec<PaperId> =
            (0..n).map(|i| PaperId::new(format!("15{i:02}.0000{i}"))).collect();
        let mut selected = Vec::new();
        let mut discarded = Vec::new();
        for (i, id) in presented.iter().enumerate() {
            if selected_mask[i] {
                selected.push(id.clone());
            } else {
                discarded.push(id.clone());
            }
        }
        let assessment = Assessment {
            selected,
            discarded,
            to_browse: BTreeMap::new(),
            reasons: BTreeMap::new(),
            overview,
        };
        let payload = format!(
            "<selector_output>{}</selector_output>",
            serde_json::to_string(&assessment).unwrap()
        );
        let presented_set: BTreeSet<PaperId> = presented.into_iter().collect();
        let parsed = parse_assessment(
            &payload,
            AssessMode::Adaptive,
            &presented_set,
            &BTreeSet::new(),
        ).unwrap();
        prop_assert_eq!(parsed.assessment, assessment);
        prop_assert!(parsed.dropped_ids.is_empty());
    }

    #[test]
    fn tree_invariants_hold_under_random_plans(
        actions in prop::collection::vec((0u8..3, 0usize..6, 1usize..12), 1..15),
    ) {
        let mut tree = SubqueryTree::new("root query", 10);
        let defaults = PlanDefaults {
            date_constraint: date(2024, 12, 31),
            max_results_per_request: 10,
        };
        let mut node_count = 1;
        for (iteration, (kind, source_raw, k)) in actions.into_iter().enumerate() {
            let source_id = source_raw % node_count;
            let item = match kind % 3 {
                0 => PlanItem { link_type: LinkType::Derive, source_id, text: Some("d".into()), target_k: k },
                1 => PlanItem { link_type: LinkType::Expand, source_id, text: Some("e".into()), target_k: k },
                _ => {
                    if node_count == 1 {
                        // No continuable node yet.
                        continue;
                    }
                    PlanItem { link_type: LinkType::Continue, source_id: 1 + source_raw % (node_count - 1), text: None, target_k: k }
                }
            };
            let plan = Plan {
                subqueries: vec![item],
                checklist: String::new(),
                experience_replay: String::new(),
                is_complete: false,
            };
            let before = tree.len();
            apply_plan(&mut tree, &plan, iteration + 1, &defaults).unwrap();
            prop_assert!(tree.len() >= before, "node count never decreases");
            node_count = tree.len();

            for node in tree.nodes() {
                if node.node_id != 0 {
                    prop_assert!(node.parent_id < node.node_id, "acyclic by construction");
                }
                prop_assert!(node.target_k <= defaults.max_results_per_request);
            }
        }
        // Rendering is pure.
        let buffer = ExperienceBuffer::new(100);
        let a = render_state(&tree, &buffer, 3, &[]);
        let b = render_state(&tree, &buffer, 3, &[]);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metrics_match_naive_oracle_on_small_trajectories(
        iter_specs in prop::collection::vec(
            (
                prop::collection::btree_set(0usize..50, 0..12), // retrieved ids
                prop::collection::btree_set(0usize..50, 0..6),  // selected (filtered below)
            ),
            1..4,
        ),
        gt_raw in prop::collection::btree_set(0usize..50, 1..6),
        cutoff in 5usize..120,
    ) {
        let pid = |i: usize| PaperId::new(format!("p{i:02}"));
        let config = RunConfig::default();
        let mut iterations = Vec::new();
        for (t, (retrieved, selected)) in iter_specs.iter().enumerate() {
            let hits: Vec<ScoredHit> = retrieved
                .iter()
                .enumerate()
                .map(|(rank0, i)| ScoredHit {
                    paper_id: pid(*i),
                    score: 100.0 - rank0 as f64,
                    rank: rank0 + 1,
                })
                .collect();
            let selected_new: BTreeSet<PaperId> = selected
                .iter()
                .filter(|i| retrieved.contains(*i))
                .map(|i| pid(*i))
                .collect();
            iterations.push(IterationRecord {
                iteration: t + 1,
                plan: Plan::complete(),
                tool_calls: Vec::new(),
                candidate_sets: vec![litsim::retrieval::CandidateSet {
                    call: ToolCall::new("q", 50, date(2024, 12, 31)),
                    hits,
                    exhausted: true,
                }],
                assessments: Vec::new(),
                selected_new,
                failures: Vec::new(),
            });
        }
        let final_selected: BTreeSet<PaperId> = iterations
            .iter()
            .flat_map(|r| r.selected_new.iter().cloned())
            .collect();
        let trajectory = Trajectory {
            qid: "q".into(),
            config_digest: config.digest(),
            config,
            baseline: false,
            iterations,
            final_selected: final_selected.clone(),
            terminated_reason: TerminatedReason::MaxIterations,
        };
        let gt: BTreeSet<PaperId> = gt_raw.iter().map(|i| pid(*i)).collect();

        // Naive set-comprehension oracle over the raw spec formulas.
        let retrieved_all: BTreeSet<PaperId> = trajectory.retrieved();
        let s_and_g = final_selected.intersection(&gt).count() as f64;
        let r_and_g = retrieved_all.intersection(&gt).count() as f64;
        let o_recall = s_and_g / gt.len() as f64;
        let o_precision = if final_selected.is_empty() { 0.0 } else { s_and_g / final_selected.len() as f64 };
        let o_ret_recall = r_and_g / gt.len() as f64;
        let o_ret_precision = if retrieved_all.is_empty() { 0.0 } else { r_and_g / retrieved_all.len() as f64 };

        let mut o_dist_sum = 0.0;
        for g in &gt {
            let mut best: Option<usize> = None;
            for record in &trajectory.iterations {
                for set in &record.candidate_sets {
                    for hit in &set.hits {
                        if &hit.paper_id == g {
                            best = Some(best.map_or(hit.rank, |b: usize| b.min(hit.rank)));
                        }
                    }
                }
            }
            o_dist_sum += best.map_or(0.0, |r| (1.0 - r as f64 / cutoff as f64).max(0.0));
        }
        let o_avg_distance = o_dist_sum / gt.len() as f64;

        let lost: BTreeSet<&PaperId> = retrieved_all
            .intersection(&gt)
            .filter(|id| !final_selected.contains(*id))
            .collect();
        let discarded_all = retrieved_all.difference(&final_selected).count() as f64;
        let o_main = if discarded_all == 0.0 { 0.0 } else { lost.len() as f64 / discarded_all };
        let rg = retrieved_all.intersection(&gt).count() as f64;
        let o_retention = if rg == 0.0 { 0.0 } else { lost.len() as f64 / rg };

        let row = metrics::per_iteration(&trajectory, &gt, cutoff).unwrap();
        let m = row.final_metrics();
        prop_assert!((m.recall - o_recall).abs() < 1e-12);
        prop_assert!((m.precision - o_precision).abs() < 1e-12);
        prop_assert!((m.ret_recall - o_ret_recall).abs() < 1e-12);
        prop_assert!((m.ret_precision - o_ret_precision).abs() < 1e-12);
        prop_assert!((m.f1 - metrics::f1_score(o_recall, o_precision)).abs() < 1e-12);
        prop_assert!((m.avg_distance - o_avg_distance).abs() < 1e-12);
        prop_assert!((m.gt_discard_main - o_main).abs() < 1e-12);
        prop_assert!((m.gt_discard_retention - o_retention).abs() < 1e-12);

        // Monotone cumulative recalls.
        let recalls: Vec<f64> = row.per_iteration.iter().map(|x| x.recall).collect();
        prop_assert!(recalls.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        let rets: Vec<f64> = row.per_iteration.iter().map(|x| x.ret_recall).collect();
        prop_assert!(rets.windows(2).all(|w| w[0] <= w[1] + 1e-15));
    }
}
