//! The iteration loop: plan, invoke, assess, remember; plus the direct-query
//! baseline and batch execution over a benchmark.
//!
//! Distinct benchmark queries run fully in parallel over shared immutable
//! indexes. Within one query, iterations are strictly sequential and tool
//! calls execute in plan order, which keeps memory deduplication and
//! trajectories deterministic.

pub mod trajectory;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assess::{assess_abstract_only, assess_adaptive, AssessOutcome, FullTextProvider};
use crate::config::RunConfig;
use crate::corpus::{BenchmarkQuery, CorpusSnapshot, PaperId};
use crate::memory::{
    apply_plan, record_results, render_state, ExperienceBuffer, IterationView, NodeId,
    NodeIterationState, PlanDefaults, SubqueryTree,
};
use crate::par::map_slice;
use crate::policy::{
    AssessMode, Assessment, CandidateView, LinkType, Plan, PlanItem, PlanRequest, Policy,
    StageResult,
};
use crate::retrieval::{Backend, CandidateSet, ToolCall};
use crate::Result;

pub use trajectory::{
    read_trajectory, read_trajectory_header, write_trajectory, TrajectoryHeader,
    TRAJECTORY_FORMAT_VERSION,
};

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedReason {
    /// The planner proposed no subqueries without claiming completion.
    EmptyPlan,
    /// The planner set the completion flag.
    IsComplete,
    /// The iteration budget ran out.
    MaxIterations,
    /// The planning stage degraded; the partial trajectory stays valid.
    PolicyFailure,
}

/// Everything one iteration did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub plan: Plan,
    pub tool_calls: Vec<(NodeId, ToolCall)>,
    pub candidate_sets: Vec<CandidateSet>,
    pub assessments: Vec<(NodeId, Assessment)>,
    /// Papers selected this iteration (subset of this iteration's candidates).
    pub selected_new: BTreeSet<PaperId>,
    pub failures: Vec<String>,
}

/// The full per-query record: the unit of persistence and metric computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub qid: String,
    pub config_digest: String,
    pub config: RunConfig,
    /// True for direct-query baseline runs (affects the page-size cap during
    /// replay).
    pub baseline: bool,
    pub iterations: Vec<IterationRecord>,
    /// Union of `selected_new` over all iterations.
    pub final_selected: BTreeSet<PaperId>,
    pub terminated_reason: TerminatedReason,
}

impl Trajectory {
    /// Union of every candidate id over all iterations (the cumulative
    /// retrieved set).
    pub fn retrieved(&self) -> BTreeSet<PaperId> {
        self.iterations
            .iter()
            .flat_map(|r| r.candidate_sets.iter())
            .flat_map(|s| s.paper_ids().cloned())
            .collect()
    }
}

/// Immutable per-run search environment, shared across queries.
#[derive(Clone)]
pub struct SearchEnv {
    pub snapshot: Arc<CorpusSnapshot>,
    pub backend: Backend,
    pub fulltext: Arc<FullTextProvider>,
    /// Parallelize the dense scan inside one call. Off by default: query-level
    /// fan-out already saturates cores on batch runs.
    pub parallel_search: bool,
}

impl SearchEnv {
    pub fn new(snapshot: Arc<CorpusSnapshot>, backend: Backend) -> Self {
        SearchEnv {
            snapshot,
            backend,
            fulltext: Arc::new(FullTextProvider::default()),
            parallel_search: false,
        }
    }

    pub fn with_fulltext(mut self, provider: FullTextProvider) -> Self {
        self.fulltext = Arc::new(provider);
        self
    }

    fn candidate_views(&self, set: &CandidateSet) -> Vec<CandidateView> {
        set.hits
            .iter()
            .filter_map(|hit| {
                let paper = self.snapshot.get(&hit.paper_id)?;
                Some(CandidateView {
                    paper_id: paper.id.clone(),
                    title: paper.title.clone(),
                    abstract_text: paper.abstract_text.clone(),
                    date: paper.date,
                    score: hit.score,
                    browser_summary: None,
                })
            })
            .collect()
    }
}

/// Executes one plan's tool calls and assessments, updating tree and buffer.
/// Returns the iteration record and the view the next planner round needs.
fn execute_iteration(
    query: &BenchmarkQuery,
    env: &SearchEnv,
    policy: &mut dyn Policy,
    config: &RunConfig,
    tree: &mut SubqueryTree,
    buffer: &mut ExperienceBuffer,
    iteration: usize,
    plan: Plan,
    defaults: &PlanDefaults,
    mut failures: Vec<String>,
) -> Result<(IterationRecord, IterationView)> {
    let calls = apply_plan(tree, &plan, iteration, defaults)?;

    let mut candidate_sets = Vec::with_capacity(calls.len());
    let mut assessments = Vec::with_capacity(calls.len());
    let mut node_states = Vec::with_capacity(calls.len());
    let mut selected_new = BTreeSet::new();

    for (node_id, call) in &calls {
        let set = env.backend.search(call, env.parallel_search)?;
        let views = env.candidate_views(&set);
        let sub_query = tree.node(*node_id).map(|n| n.text.clone()).unwrap_or_default();

        let AssessOutcome {
            assessment,
            notes,
            degraded,
        } = match config.mode {
            AssessMode::AbstractOnly => {
                assess_abstract_only(policy, &query.text, &sub_query, &plan.checklist, &views)
            }
            AssessMode::Adaptive => assess_adaptive(
                policy,
                &env.fulltext,
                &query.text,
                &sub_query,
                &plan.checklist,
                &views,
            ),
        };
        failures.extend(notes);
        if degraded {
            failures.push(format!("node {node_id}: assessment degraded"));
        }

        record_results(tree, *node_id, &set, &assessment)?;
        selected_new.extend(assessment.selected.iter().cloned());
        node_states.push(NodeIterationState {
            node_id: *node_id,
            retrieved: set.hits.len(),
            selected: assessment.selected.len(),
            overview: assessment.overview.clone(),
        });
        candidate_sets.push(set);
        assessments.push((*node_id, assessment));
    }

    buffer.update(&plan.experience_replay);
    let view = IterationView {
        iteration,
        checklist: plan.checklist.clone(),
        node_states,
    };
    let record = IterationRecord {
        iteration,
        plan,
        tool_calls: calls,
        candidate_sets,
        assessments,
        selected_new,
        failures,
    };
    Ok((record, view))
}

fn finish(
    query: &BenchmarkQuery,
    config: &RunConfig,
    baseline: bool,
    iterations: Vec<IterationRecord>,
    terminated_reason: TerminatedReason,
) -> Trajectory {
    let final_selected = iterations
        .iter()
        .flat_map(|r| r.selected_new.iter().cloned())
        .collect();
    Trajectory {
        qid: query.qid.clone(),
        config_digest: config.digest(),
        config: config.clone(),
        baseline,
        iterations,
        final_selected,
        terminated_reason,
    }
}

/// Runs the full iterative workflow for one benchmark query.
///
/// Loop for t = 1..=T: plan against the rendered memory state; an empty plan
/// or the completion flag terminates; otherwise the plan's calls execute in
/// order, each candidate set is assessed and folded into memory, and the
/// buffer takes the plan's experience replay. A plan that both proposes
/// subqueries and sets the flag executes first and then terminates. Planner
/// degradation terminates with `PolicyFailure`; the partial trajectory is
/// still valid and metric-eligible.
pub fn run_workflow(
    query: &BenchmarkQuery,
    env: &SearchEnv,
    policy: &mut dyn Policy,
    config: &RunConfig,
) -> Result<Trajectory> {
    let defaults = PlanDefaults {
        date_constraint: query.date_constraint,
        max_results_per_request: config.max_results_per_request,
    };
    let mut tree = SubqueryTree::new(query.text.clone(), config.max_results_per_request);
    let mut buffer = ExperienceBuffer::new(config.buffer_cap);
    let mut views: Vec<IterationView> = Vec::new();
    let mut records: Vec<IterationRecord> = Vec::new();

    for t in 1..=config.iterations {
        let context = render_state(&tree, &buffer, t, &views);
        let plan = match policy.plan(&PlanRequest {
            user_query: &query.text,
            context: &context,
        }) {
            StageResult::Ok { value, notes } => {
                if !notes.is_empty() {
                    log::debug!("{}: planner notes at t={t}: {notes:?}", query.qid);
                }
                (value, notes)
            }
            StageResult::Degraded { notes } => {
                records.push(IterationRecord {
                    iteration: t,
                    plan: Plan::complete(),
                    tool_calls: Vec::new(),
                    candidate_sets: Vec::new(),
                    assessments: Vec::new(),
                    selected_new: BTreeSet::new(),
                    failures: notes,
                });
                return Ok(finish(query, config, false, records, TerminatedReason::PolicyFailure));
            }
        };
        let (plan, notes) = plan;

        if plan.subqueries.is_empty() {
            let reason = if plan.is_complete {
                TerminatedReason::IsComplete
            } else {
                TerminatedReason::EmptyPlan
            };
            return Ok(finish(query, config, false, records, reason));
        }

        let is_complete = plan.is_complete;
        let (record, view) = execute_iteration(
            query, env, policy, config, &mut tree, &mut buffer, t, plan, &defaults, notes,
        )?;
        records.push(record);
        views.push(view);

        if is_complete {
            return Ok(finish(query, config, false, records, TerminatedReason::IsComplete));
        }
    }
    Ok(finish(query, config, false, records, TerminatedReason::MaxIterations))
}

/// Runs the direct-query baseline: one verbatim call, no planning, then the
/// same assessment procedure as the full workflow.
///
/// The synthetic plan requests `direct_k` results in a single page, so the
/// page-size cap handed to `apply_plan` is `direct_k` itself rather than the
/// planner cap.
pub fn run_direct_query(
    query: &BenchmarkQuery,
    env: &SearchEnv,
    policy: &mut dyn Policy,
    config: &RunConfig,
) -> Result<Trajectory> {
    let defaults = PlanDefaults {
        date_constraint: query.date_constraint,
        max_results_per_request: config.direct_k,
    };
    let mut tree = SubqueryTree::new(query.text.clone(), config.direct_k);
    let mut buffer = ExperienceBuffer::new(config.buffer_cap);
    let plan = Plan {
        subqueries: vec![PlanItem {
            link_type: LinkType::Derive,
            source_id: 0,
            text: Some(query.text.clone()),
            target_k: config.direct_k,
        }],
        checklist: String::new(),
        experience_replay: String::new(),
        is_complete: true,
    };
    let (record, _view) = execute_iteration(
        query,
        env,
        policy,
        config,
        &mut tree,
        &mut buffer,
        1,
        plan,
        &defaults,
        Vec::new(),
    )?;
    Ok(finish(
        query,
        config,
        true,
        vec![record],
        TerminatedReason::IsComplete,
    ))
}

/// Batch outcome: trajectories in input order plus per-query failures.
#[derive(Debug)]
pub struct BatchOutcome {
    pub trajectories: Vec<Trajectory>,
    pub failures: Vec<(String, String)>,
}

/// Runs every query, fanning out across the worker pool unless
/// `config.parallelism == 1`. Each worker owns its query's policy, memory,
/// and trajectory exclusively; shared inputs are immutable, so the output is
/// independent of scheduling.
pub fn run_batch<F>(
    queries: &[BenchmarkQuery],
    env: &SearchEnv,
    make_policy: F,
    config: &RunConfig,
    baseline: bool,
) -> BatchOutcome
where
    F: Fn(&BenchmarkQuery) -> Box<dyn Policy> + Sync,
{
    let parallel = config.parallelism != 1;
    let results: Vec<(String, Result<Trajectory>)> = map_slice(queries, parallel, |query| {
        let mut policy = make_policy(query);
        let result = if baseline {
            run_direct_query(query, env, policy.as_mut(), config)
        } else {
            run_workflow(query, env, policy.as_mut(), config)
        };
        (query.qid.clone(), result)
    });

    let mut trajectories = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (qid, result) in results {
        match result {
            Ok(t) => trajectories.push(t),
            Err(e) => failures.push((qid, e.to_string())),
        }
    }
    BatchOutcome {
        trajectories,
        failures,
    }
}

/// Runs `f` under a worker pool capped at `cap` threads; 0 means the default
/// pool (all available execution units). Without the `parallel` feature the
/// cap is moot and `f` runs directly.
pub fn with_parallelism<R: Send>(cap: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if cap > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cap)
            .build()
            .expect("worker pool builds");
        return pool.install(f);
    }
    f()
}

/// Rebuilds the tool-call sequence a trajectory's plans imply and checks it
/// against what was recorded (trajectory self-consistency).
pub fn replay_tool_calls(trajectory: &Trajectory) -> Result<Vec<Vec<(NodeId, ToolCall)>>> {
    let cap = if trajectory.baseline {
        trajectory.config.direct_k
    } else {
        trajectory.config.max_results_per_request
    };

    // Date constraints live on the recorded calls.
    let date_constraint = trajectory
        .iterations
        .iter()
        .flat_map(|r| r.tool_calls.iter())
        .map(|(_, c)| c.date_constraint)
        .next()
        .ok_or_else(|| crate::Error::Trajectory("no tool calls to replay".into()))?;

    let mut tree = SubqueryTree::new(String::new(), cap);
    let defaults = PlanDefaults {
        date_constraint,
        max_results_per_request: cap,
    };
    let mut replayed = Vec::with_capacity(trajectory.iterations.len());
    for record in &trajectory.iterations {
        if record.tool_calls.is_empty() && record.plan.subqueries.is_empty() {
            replayed.push(Vec::new());
            continue;
        }
        let calls = apply_plan(&mut tree, &record.plan, record.iteration, &defaults)?;
        replayed.push(calls);
    }
    Ok(replayed)
}
