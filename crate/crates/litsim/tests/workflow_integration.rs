//! End-to-end workflow semantics on small fixtures with scripted policies.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::NaiveDate;

use litsim::config::RunConfig;
use litsim::corpus::{ingest, BenchmarkQuery, CorpusSnapshot, DateWindow, PaperId, QuerySource};
use litsim::metrics;
use litsim::policy::{
    Assessment, AssessmentFallback, LinkType, MockPolicy, MockScript, Plan, PlanItem, Policy,
    StageResult,
};
use litsim::retrieval::{build_sparse_index, Backend, Bm25Params};
use litsim::workflow::{
    read_trajectory, replay_tool_calls, run_batch, run_direct_query, run_workflow,
    write_trajectory, SearchEnv, TerminatedReason, Trajectory,
};

fn record(id: &str, title: &str, abs: &str) -> String {
    serde_json::json!({
        "id": id, "title": title, "abstract": abs, "date": "2020-06-01",
        "authors": [], "categories": []
    })
    .to_string()
}

/// Ten documents: seven "alpha" docs with identical token statistics (their
/// BM25 scores tie, so they rank a1..a7 by id) and three "beta" docs.
fn ten_doc_snapshot() -> Arc<CorpusSnapshot> {
    let mut lines = Vec::new();
    for i in 1..=7 {
        lines.push(record(&format!("1111.0000{i}"), "alpha", "filler one two"));
    }
    for i in 1..=3 {
        lines.push(record(&format!("2222.0000{i}"), "beta", "filler one two"));
    }
    let (snap, _) = ingest(lines.join("\n").as_bytes(), DateWindow::default()).unwrap();
    Arc::new(snap)
}

fn sparse_env(snapshot: Arc<CorpusSnapshot>) -> SearchEnv {
    let index = Arc::new(build_sparse_index(&snapshot, Bm25Params::default()).unwrap());
    SearchEnv::new(snapshot, Backend::Sparse(index))
}

fn query(text: &str, gt: &[&str]) -> BenchmarkQuery {
    BenchmarkQuery {
        qid: "q1".into(),
        text: text.into(),
        date_constraint: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
        ground_truth: gt.iter().map(|s| PaperId::new(*s)).collect(),
        source: QuerySource::Other,
    }
}

fn derive(source: usize, text: &str, k: usize) -> PlanItem {
    PlanItem {
        link_type: LinkType::Derive,
        source_id: source,
        text: Some(text.into()),
        target_k: k,
    }
}

fn cont(source: usize, k: usize) -> PlanItem {
    PlanItem {
        link_type: LinkType::Continue,
        source_id: source,
        text: None,
        target_k: k,
    }
}

fn plan(items: Vec<PlanItem>, replay: &str) -> Plan {
    Plan {
        subqueries: items,
        checklist: "checklist".into(),
        experience_replay: replay.into(),
        is_complete: false,
    }
}

fn select(ids: &[&str]) -> Assessment {
    Assessment {
        selected: ids.iter().map(|s| PaperId::new(*s)).collect(),
        overview: format!("selected {}", ids.len()),
        ..Assessment::default()
    }
}

fn ids(v: &[&str]) -> BTreeSet<PaperId> {
    v.iter().map(|s| PaperId::new(*s)).collect()
}

/// The two-iteration scripted walkthrough. Hand-walked expectations:
/// iteration 1 retrieves a1..a5 (node 1, page 0) and b1..b3 (node 2),
/// selecting {a1, a3, b2}; iteration 2 continues node 1 onto page 1
/// (a6, a7) and re-derives "beta" (node 3, duplicates absorbed), selecting
/// {a6, b2}. Final union: {a1, a3, a6, b2}.
fn two_iteration_script() -> MockScript {
    MockScript {
        plans: vec![
            plan(vec![derive(0, "alpha", 5), derive(0, "beta", 5)], "e1"),
            plan(vec![cont(1, 5), derive(0, "beta", 5)], "e2"),
        ],
        assessments: vec![
            select(&["1111.00001", "1111.00003"]), // node 1 page 0
            select(&["2222.00002"]),               // node 2
            select(&["1111.00006"]),               // node 1 page 1
            select(&["2222.00002"]),               // node 3 (duplicate text)
        ],
        ..MockScript::default()
    }
}

#[test]
fn scripted_two_iteration_run_matches_hand_walk() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001", "1111.00006"]);
    let config = RunConfig::default();
    let mut policy = MockPolicy::new(two_iteration_script());
    let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();

    assert_eq!(trajectory.iterations.len(), 2);
    assert_eq!(trajectory.terminated_reason, TerminatedReason::IsComplete);
    assert_eq!(
        trajectory.final_selected,
        ids(&["1111.00001", "1111.00003", "1111.00006", "2222.00002"])
    );

    // Iteration 1: pages of 5 and 3; iteration 2: page of 2 (exhausted) + 3.
    let sizes: Vec<Vec<usize>> = trajectory
        .iterations
        .iter()
        .map(|r| r.candidate_sets.iter().map(|s| s.hits.len()).collect())
        .collect();
    assert_eq!(sizes, vec![vec![5, 3], vec![2, 3]]);

    // Page 1 of node 1 carries global ranks 6 and 7.
    let page1 = &trajectory.iterations[1].candidate_sets[0];
    assert_eq!(page1.call.page, 1);
    assert_eq!(
        page1.hits.iter().map(|h| h.rank).collect::<Vec<_>>(),
        vec![6, 7]
    );
    assert!(page1.exhausted);

    // Cumulative recall is monotone and reaches 1.0 on this ground truth.
    let row = metrics::per_iteration(&trajectory, &q.ground_truth, 100).unwrap();
    let recalls: Vec<f64> = row.per_iteration.iter().map(|m| m.recall).collect();
    assert!(recalls.windows(2).all(|w| w[0] <= w[1]));
    assert!((recalls[0] - 0.5).abs() < 1e-12);
    assert!((recalls[1] - 1.0).abs() < 1e-12);
}

#[test]
fn one_plan_script_yields_one_iteration_is_complete() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default();
    let script = MockScript {
        plans: vec![plan(vec![derive(0, "alpha", 5)], "e1")],
        assessment_fallback: AssessmentFallback::SelectAll,
        ..MockScript::default()
    };
    let mut policy = MockPolicy::new(script);
    let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();
    assert_eq!(trajectory.iterations.len(), 1);
    assert_eq!(trajectory.terminated_reason, TerminatedReason::IsComplete);
}

#[test]
fn long_script_is_cut_at_max_iterations() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default(); // T = 5
    let script = MockScript {
        plans: (0..7).map(|_| plan(vec![derive(0, "alpha", 5)], "e")).collect(),
        assessment_fallback: AssessmentFallback::SelectAll,
        ..MockScript::default()
    };
    let mut policy = MockPolicy::new(script);
    let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();
    assert_eq!(trajectory.iterations.len(), 5);
    assert_eq!(trajectory.terminated_reason, TerminatedReason::MaxIterations);
}

#[test]
fn empty_plan_terminates_without_a_record() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default();
    let script = MockScript {
        plans: vec![Plan {
            subqueries: Vec::new(),
            checklist: String::new(),
            experience_replay: String::new(),
            is_complete: false,
        }],
        ..MockScript::default()
    };
    let mut policy = MockPolicy::new(script);
    let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();
    assert!(trajectory.iterations.is_empty());
    assert_eq!(trajectory.terminated_reason, TerminatedReason::EmptyPlan);
    assert!(trajectory.final_selected.is_empty());
}

/// A policy whose planner always degrades.
struct BrokenPlanner;

impl Policy for BrokenPlanner {
    fn plan(&mut self, _req: &litsim::policy::PlanRequest<'_>) -> StageResult<Plan> {
        StageResult::Degraded {
            notes: vec!["planner: scripted breakage".into()],
        }
    }
    fn assess(&mut self, _req: &litsim::policy::AssessRequest<'_>) -> StageResult<Assessment> {
        StageResult::ok(Assessment::default())
    }
    fn extract(
        &mut self,
        _req: &litsim::policy::ExtractRequest<'_>,
    ) -> StageResult<litsim::policy::Extraction> {
        StageResult::Degraded { notes: Vec::new() }
    }
}

#[test]
fn planner_degradation_terminates_gracefully_with_partial_trajectory() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default();
    let trajectory = run_workflow(&q, &env, &mut BrokenPlanner, &config).unwrap();
    assert_eq!(trajectory.terminated_reason, TerminatedReason::PolicyFailure);
    assert_eq!(trajectory.iterations.len(), 1);
    assert!(trajectory.iterations[0]
        .failures
        .iter()
        .any(|f| f.contains("scripted breakage")));
    // The partial trajectory is still metric-eligible.
    let row = metrics::per_iteration(&trajectory, &q.ground_truth, 100).unwrap();
    assert_eq!(row.final_metrics().recall, 0.0);
}

#[test]
fn direct_query_runs_one_verbatim_call() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00006"]);
    let mut config = RunConfig::default();
    config.direct_k = 50;
    let script = MockScript {
        assessment_fallback: AssessmentFallback::SelectAll,
        ..MockScript::default()
    };
    let mut policy = MockPolicy::new(script);
    let trajectory = run_direct_query(&q, &env, &mut policy, &config).unwrap();

    assert!(trajectory.baseline);
    assert_eq!(trajectory.iterations.len(), 1);
    assert_eq!(trajectory.terminated_reason, TerminatedReason::IsComplete);
    let record = &trajectory.iterations[0];
    assert_eq!(record.tool_calls.len(), 1);
    let call = &record.tool_calls[0].1;
    assert_eq!(call.query_text, "alpha");
    assert_eq!(call.k, 50);
    assert_eq!(call.page, 0);
    // k=50 swallows all 7 alpha docs; select-all mirrors retrieval metrics.
    let row = metrics::per_iteration(&trajectory, &q.ground_truth, 100).unwrap();
    let m = row.final_metrics();
    assert_eq!(m.recall, m.ret_recall);
    assert_eq!(m.recall, 1.0);
}

#[test]
fn direct_query_zero_overlap_has_zero_recall() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("omega nothing matches", &["1111.00001"]);
    let config = RunConfig::default();
    let script = MockScript {
        assessment_fallback: AssessmentFallback::SelectAll,
        ..MockScript::default()
    };
    let mut policy = MockPolicy::new(script);
    let trajectory = run_direct_query(&q, &env, &mut policy, &config).unwrap();
    let row = metrics::per_iteration(&trajectory, &q.ground_truth, 100).unwrap();
    assert_eq!(row.final_metrics().ret_recall, 0.0);
    assert_eq!(row.final_metrics().recall, 0.0);
}

/// Fixture engineered so the verbatim query cannot reach one ground-truth
/// paper: "2222.00001" shares no token with the query, but a Derive subquery
/// reaches it.
#[test]
fn iterative_decomposition_beats_direct_query_on_reachability() {
    let lines = vec![
        record("1111.00001", "alpha topic", "about alpha things"),
        record("1111.00002", "alpha topic", "more alpha things"),
        record("2222.00001", "gamma specialized", "hidden gem"),
        record("3333.00001", "unrelated", "noise"),
    ];
    let (snap, _) = ingest(lines.join("\n").as_bytes(), DateWindow::default()).unwrap();
    let env = sparse_env(Arc::new(snap));
    let q = query("alpha topic", &["1111.00001", "2222.00001"]);
    let config = RunConfig::default();

    let select_all = MockScript {
        assessment_fallback: AssessmentFallback::SelectAll,
        ..MockScript::default()
    };
    let mut direct_policy = MockPolicy::new(select_all.clone());
    let direct = run_direct_query(&q, &env, &mut direct_policy, &config).unwrap();

    let iterative_script = MockScript {
        plans: vec![Plan {
            subqueries: vec![derive(0, "alpha topic", 10), derive(0, "gamma specialized", 10)],
            checklist: String::new(),
            experience_replay: String::new(),
            is_complete: true,
        }],
        assessment_fallback: AssessmentFallback::SelectAll,
        ..MockScript::default()
    };
    let mut iter_policy = MockPolicy::new(iterative_script);
    let iterative = run_workflow(&q, &env, &mut iter_policy, &config).unwrap();

    let direct_ret = metrics::retrieval_metrics(&direct.retrieved(), &q.ground_truth)
        .unwrap()
        .recall;
    let iter_ret = metrics::retrieval_metrics(&iterative.retrieved(), &q.ground_truth)
        .unwrap()
        .recall;
    assert!(
        iter_ret > direct_ret,
        "iterative Ret.R {iter_ret} must strictly exceed direct {direct_ret}"
    );
    assert_eq!(direct_ret, 0.5);
    assert_eq!(iter_ret, 1.0);
}

#[test]
fn trajectories_round_trip_and_replay_consistently() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default();
    let mut policy = MockPolicy::new(two_iteration_script());
    let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();

    let mut buf = Vec::new();
    write_trajectory(&trajectory, &mut buf).unwrap();
    let loaded = read_trajectory(buf.as_slice()).unwrap();
    assert_eq!(loaded, trajectory);

    // Replaying the persisted plans reproduces the identical call sequence.
    let replayed = replay_tool_calls(&loaded).unwrap();
    let recorded: Vec<_> = trajectory
        .iterations
        .iter()
        .map(|r| r.tool_calls.clone())
        .collect();
    assert_eq!(replayed, recorded);
}

#[test]
fn identical_runs_produce_byte_identical_trajectories() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default();

    let mut bytes = Vec::new();
    for _ in 0..2 {
        let mut policy = MockPolicy::new(two_iteration_script());
        let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&trajectory, &mut buf).unwrap();
        bytes.push(buf);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn batch_preserves_input_order_and_isolates_failures() {
    let env = sparse_env(ten_doc_snapshot());
    let queries: Vec<BenchmarkQuery> = (0..6)
        .map(|i| BenchmarkQuery {
            qid: format!("q{i}"),
            text: "alpha".into(),
            date_constraint: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
            ground_truth: ids(&["1111.00001"]),
            source: QuerySource::Other,
        })
        .collect();
    let config = RunConfig::default();

    let outcome = run_batch(
        &queries,
        &env,
        |_q| {
            Box::new(MockPolicy::new(MockScript {
                assessment_fallback: AssessmentFallback::SelectAll,
                ..MockScript::default()
            })) as Box<dyn Policy>
        },
        &config,
        false,
    );
    assert!(outcome.failures.is_empty());
    let qids: Vec<_> = outcome.trajectories.iter().map(|t| t.qid.clone()).collect();
    assert_eq!(qids, vec!["q0", "q1", "q2", "q3", "q4", "q5"]);

    // Sequential and parallel batches agree trajectory-for-trajectory.
    let mut sequential_config = RunConfig::default();
    sequential_config.parallelism = 1;
    let sequential = run_batch(
        &queries,
        &env,
        |_q| {
            Box::new(MockPolicy::new(MockScript {
                assessment_fallback: AssessmentFallback::SelectAll,
                ..MockScript::default()
            })) as Box<dyn Policy>
        },
        &sequential_config,
        false,
    );
    let parallel_traj: Vec<Trajectory> = outcome.trajectories;
    for (a, b) in parallel_traj.iter().zip(sequential.trajectories.iter()) {
        assert_eq!(a.final_selected, b.final_selected);
        assert_eq!(a.iterations.len(), b.iterations.len());
    }
}

#[test]
fn selected_new_stays_within_iteration_candidates() {
    let env = sparse_env(ten_doc_snapshot());
    let q = query("alpha", &["1111.00001"]);
    let config = RunConfig::default();
    let mut policy = MockPolicy::new(two_iteration_script());
    let trajectory = run_workflow(&q, &env, &mut policy, &config).unwrap();
    for record in &trajectory.iterations {
        let candidates: BTreeSet<PaperId> = record
            .candidate_sets
            .iter()
            .flat_map(|s| s.paper_ids().cloned())
            .collect();
        assert!(record.selected_new.is_subset(&candidates));
    }
}
