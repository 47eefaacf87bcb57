//! Per-query memory: the subquery tree and the experience buffer.
//!
//! One tree + buffer exist per benchmark query, mutated only by that query's
//! workflow loop, strictly sequentially. The tree is acyclic by construction
//! (every parent id is smaller than its child's id) and only ever grows.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::PaperId;
use crate::policy::{Assessment, LinkType, Plan};
use crate::retrieval::{CandidateSet, ToolCall};
use crate::{Error, Result};

/// Node index within one query's subquery tree; 0 is the root.
pub type NodeId = usize;

/// Literal used in planner-context blocks that have nothing to show.
pub const EMPTY_MARKER: &str = "(empty)";

/// One subquery, its provenance, and its cumulative retrieval state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubqueryNode {
    pub node_id: NodeId,
    pub parent_id: NodeId,
    pub link_type: LinkType,
    /// Iteration that created the node; 0 for the root.
    pub iteration_created: usize,
    pub text: String,
    pub target_k: usize,
    /// Cumulative retrieved ids, deduplicated, in first-seen order.
    pub retrieved_ids: Vec<PaperId>,
    /// Assessor selections, always a subset of `retrieved_ids`.
    pub selected_ids: Vec<PaperId>,
    /// Next page index a Continue on this node would request.
    pub next_page: usize,
    /// Latest assessor feedback for this node.
    pub overview: String,
}

/// The hierarchical subquery memory rooted at the original query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubqueryTree {
    nodes: Vec<SubqueryNode>,
}

impl SubqueryTree {
    /// Creates the tree with node 0 holding the original query.
    pub fn new(original_query: impl Into<String>, default_k: usize) -> Self {
        let root = SubqueryNode {
            node_id: 0,
            parent_id: 0,
            link_type: LinkType::Root,
            iteration_created: 0,
            text: original_query.into(),
            target_k: default_k,
            retrieved_ids: Vec::new(),
            selected_ids: Vec::new(),
            next_page: 0,
            overview: String::new(),
        };
        SubqueryTree { nodes: vec![root] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // node 0 always exists
    }

    pub fn node(&self, id: NodeId) -> Option<&SubqueryNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> &[SubqueryNode] {
        &self.nodes
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut SubqueryNode> {
        self.nodes
            .get_mut(id)
            .ok_or_else(|| Error::Memory(format!("node {id} does not exist")))
    }

    /// Structural invariants, asserted after every mutation.
    fn check_invariants(&self) -> Result<()> {
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.node_id != idx {
                return Err(Error::Memory(format!("node {idx} carries id {}", node.node_id)));
            }
            if idx == 0 {
                if node.link_type != LinkType::Root || node.parent_id != 0 {
                    return Err(Error::Memory("malformed root node".into()));
                }
            } else if node.parent_id >= node.node_id {
                return Err(Error::Memory(format!(
                    "node {idx} has parent {} >= itself",
                    node.parent_id
                )));
            }
            let retrieved: std::collections::BTreeSet<_> = node.retrieved_ids.iter().collect();
            if !node.selected_ids.iter().all(|id| retrieved.contains(id)) {
                return Err(Error::Memory(format!(
                    "node {idx} selected ids escape retrieved ids"
                )));
            }
        }
        Ok(())
    }
}

/// Run-level parameters needed to turn plan items into tool calls.
#[derive(Debug, Clone, Copy)]
pub struct PlanDefaults {
    /// The benchmark query's date constraint, carried by every call.
    pub date_constraint: NaiveDate,
    /// Upper bound on per-page result counts; larger requests are clamped.
    pub max_results_per_request: usize,
}

/// Applies a validated plan to the tree, allocating nodes for Derive/Expand
/// and advancing pagination for Continue. Returns the tool calls to execute,
/// in plan order.
///
/// Node ids are allocated in order of appearance in the plan. Every
/// `source_id` must reference a node that existed before this plan; a plan
/// referencing an unknown node, or continuing the root, is rejected as a
/// whole and the tree is left untouched.
pub fn apply_plan(
    tree: &mut SubqueryTree,
    plan: &Plan,
    iteration: usize,
    defaults: &PlanDefaults,
) -> Result<Vec<(NodeId, ToolCall)>> {
    let pre_existing = tree.len();
    for (pos, item) in plan.subqueries.iter().enumerate() {
        if item.source_id >= pre_existing {
            return Err(Error::PlanRejected(format!(
                "subquery {pos}: source_id {} not in tree of {pre_existing} nodes",
                item.source_id
            )));
        }
        match item.link_type {
            LinkType::Continue => {
                if item.source_id == 0 {
                    return Err(Error::PlanRejected(format!(
                        "subquery {pos}: the root query (id=0) cannot be continued"
                    )));
                }
            }
            LinkType::Derive | LinkType::Expand => {
                if item.text.as_deref().map_or(true, |t| t.trim().is_empty()) {
                    return Err(Error::PlanRejected(format!(
                        "subquery {pos}: {} requires non-empty text",
                        item.link_type
                    )));
                }
            }
            LinkType::Root => {
                return Err(Error::PlanRejected(format!(
                    "subquery {pos}: plans may not emit root links"
                )));
            }
        }
        if item.target_k == 0 {
            return Err(Error::PlanRejected(format!("subquery {pos}: target_k must be >= 1")));
        }
    }

    let mut calls = Vec::with_capacity(plan.subqueries.len());
    for item in &plan.subqueries {
        match item.link_type {
            LinkType::Continue => {
                let cap = defaults.max_results_per_request;
                let date = defaults.date_constraint;
                let node = tree.node_mut(item.source_id)?;
                let call = ToolCall {
                    query_text: node.text.clone(),
                    k: node.target_k.min(cap),
                    date_constraint: date,
                    page: node.next_page,
                };
                node.next_page += 1;
                calls.push((node.node_id, call));
            }
            LinkType::Derive | LinkType::Expand => {
                let node_id = tree.nodes.len();
                let text = item.text.clone().expect("validated above");
                let target_k = item.target_k.min(defaults.max_results_per_request);
                tree.nodes.push(SubqueryNode {
                    node_id,
                    parent_id: item.source_id,
                    link_type: item.link_type,
                    iteration_created: iteration,
                    text: text.clone(),
                    target_k,
                    retrieved_ids: Vec::new(),
                    selected_ids: Vec::new(),
                    next_page: 1,
                    overview: String::new(),
                });
                calls.push((
                    node_id,
                    ToolCall {
                        query_text: text,
                        k: target_k,
                        date_constraint: defaults.date_constraint,
                        page: 0,
                    },
                ));
            }
            LinkType::Root => unreachable!("rejected during validation"),
        }
    }
    tree.check_invariants()?;
    Ok(calls)
}

/// Folds one candidate set and its assessment into the node: retrieved ids
/// extended (deduplicated, order-preserving), selections appended, overview
/// replaced.
pub fn record_results(
    tree: &mut SubqueryTree,
    node_id: NodeId,
    candidates: &CandidateSet,
    assessment: &Assessment,
) -> Result<()> {
    let presented: std::collections::BTreeSet<&PaperId> = candidates.paper_ids().collect();
    for id in &assessment.selected {
        if !presented.contains(id) {
            return Err(Error::Assessment(format!(
                "selected id {id} was not among node {node_id}'s candidates"
            )));
        }
    }
    let node = tree.node_mut(node_id)?;
    for hit in &candidates.hits {
        if !node.retrieved_ids.contains(&hit.paper_id) {
            node.retrieved_ids.push(hit.paper_id.clone());
        }
    }
    for id in &assessment.selected {
        if !node.selected_ids.contains(id) {
            node.selected_ids.push(id.clone());
        }
    }
    node.overview = assessment.overview.clone();
    tree.check_invariants()
}

/// Fixed-length textual summary of search history carried across iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceBuffer {
    text: String,
    max_chars: usize,
}

impl ExperienceBuffer {
    pub fn new(max_chars: usize) -> Self {
        ExperienceBuffer {
            text: String::new(),
            max_chars,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn max_chars(&self) -> usize {
        self.max_chars
    }

    /// Replaces the buffer with `new_summary`, hard-truncated at the
    /// character cap.
    pub fn update(&mut self, new_summary: &str) {
        if new_summary.chars().count() <= self.max_chars {
            self.text = new_summary.to_string();
        } else {
            self.text = new_summary.chars().take(self.max_chars).collect();
        }
    }
}

/// Per-node state within one past iteration, used to render planner context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeIterationState {
    pub node_id: NodeId,
    /// Results returned for this node in that iteration.
    pub retrieved: usize,
    /// Results selected for this node in that iteration.
    pub selected: usize,
    pub overview: String,
}

/// What one past iteration did, as the planner prompt needs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationView {
    pub iteration: usize,
    pub checklist: String,
    pub node_states: Vec<NodeIterationState>,
}

/// The textual blocks the planner prompt consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerContext {
    pub current_iteration: usize,
    pub all_subqueries: String,
    pub last_iteration_state: String,
    pub previous_iteration_state: String,
    pub last_checklist: String,
    pub last_experience_replay: String,
    /// Node count at render time; lets the policy validate source ids.
    pub node_count: usize,
}

fn one_line(text: &str) -> String {
    text.replace(['\n', '\r'], " ")
}

fn node_state_line(tree: &SubqueryTree, state: &NodeIterationState) -> String {
    let (text, target_k) = tree
        .node(state.node_id)
        .map(|n| (n.text.clone(), n.target_k))
        .unwrap_or_default();
    format!(
        "id={} text=\"{}\" target_k={} retrieved={} selected={} overview=\"{}\"",
        state.node_id,
        one_line(&text),
        target_k,
        state.retrieved,
        state.selected,
        one_line(&state.overview)
    )
}

/// Renders the planner-facing view of memory at the start of `iteration`.
///
/// Pure function of its inputs: rendering twice without mutation yields
/// identical text. `history` holds the iteration views for 1..iteration-1 in
/// order.
pub fn render_state(
    tree: &SubqueryTree,
    buffer: &ExperienceBuffer,
    iteration: usize,
    history: &[IterationView],
) -> PlannerContext {
    let all_subqueries = tree
        .nodes()
        .iter()
        .map(|n| {
            format!(
                "id={} source={} link={} iteration={} text=\"{}\"",
                n.node_id,
                n.parent_id,
                n.link_type,
                n.iteration_created,
                one_line(&n.text)
            )
        })
        .collect::<Vec<_>>()
        .join("\n");

    let last = history.last();
    let last_iteration_state = match last {
        Some(view) if !view.node_states.is_empty() => view
            .node_states
            .iter()
            .map(|s| node_state_line(tree, s))
            .collect::<Vec<_>>()
            .join("\n"),
        _ => EMPTY_MARKER.to_string(),
    };

    let earlier = history.len().saturating_sub(1);
    let previous_iteration_state = if earlier == 0 {
        EMPTY_MARKER.to_string()
    } else {
        history[..earlier]
            .iter()
            .map(|view| {
                let mut block = format!("[iteration {}]", view.iteration);
                for s in &view.node_states {
                    block.push('\n');
                    block.push_str(&node_state_line(tree, s));
                }
                block
            })
            .collect::<Vec<_>>()
            .join("\n")
    };

    let last_checklist = match last {
        Some(view) if !view.checklist.trim().is_empty() => view.checklist.clone(),
        _ => EMPTY_MARKER.to_string(),
    };
    let last_experience_replay = if buffer.text().trim().is_empty() {
        EMPTY_MARKER.to_string()
    } else {
        buffer.text().to_string()
    };

    PlannerContext {
        current_iteration: iteration,
        all_subqueries,
        last_iteration_state,
        previous_iteration_state,
        last_checklist,
        last_experience_replay,
        node_count: tree.len(),
    }
}
