//! The decision brain behind planning and assessment.
//!
//! Prompt rendering from plain-text templates, strict parsing of the tagged
//! JSON outputs, a scripted deterministic mock for tests, and a generic
//! JSON-over-HTTP chat client for real models. Parsing never mutates
//! environment state; all effects flow through returned values.

pub mod llm;
pub mod mock;
pub mod parse;
pub mod template;
pub mod transport;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::PaperId;
use crate::memory::PlannerContext;

pub use llm::{LlmPolicy, LlmPolicyConfig};
pub use mock::{AssessmentFallback, HeuristicPolicy, MockPolicy, MockScript};
pub use parse::{parse_assessment, parse_extraction, parse_plan, ParseFailure, ParsedAssessment, ParsedPlan};
pub use template::{
    render_assessor_prompt, render_extractor_prompt, render_planner_prompt, ChatMessage,
    PromptMessages, DEFAULT_SELECTOR_RECIPE,
};
pub use transport::{chat_complete, ChatOutcome, ChatRequest, Decoding, HttpChatClient, RetryPolicy, ChatTransport, TransportError};

/// How a subquery relates to its source node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkType {
    Root,
    Derive,
    Expand,
    Continue,
}

impl std::fmt::Display for LinkType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinkType::Root => f.write_str("root"),
            LinkType::Derive => f.write_str("derive"),
            LinkType::Expand => f.write_str("expand"),
            LinkType::Continue => f.write_str("continue"),
        }
    }
}

/// One proposed subquery action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub link_type: LinkType,
    pub source_id: usize,
    /// Absent for Continue (which reuses the node's text).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub target_k: usize,
}

/// Planner output for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub subqueries: Vec<PlanItem>,
    #[serde(default)]
    pub checklist: String,
    #[serde(default)]
    pub experience_replay: String,
    #[serde(default)]
    pub is_complete: bool,
}

impl Plan {
    /// Terminal plan: no subqueries, completion flag set.
    pub fn complete() -> Self {
        Plan {
            subqueries: Vec::new(),
            checklist: String::new(),
            experience_replay: String::new(),
            is_complete: true,
        }
    }
}

/// Assessor output for one candidate set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    #[serde(default)]
    pub selected: Vec<PaperId>,
    #[serde(default)]
    pub discarded: Vec<PaperId>,
    /// Candidate id to extraction goal; Adaptive mode only.
    #[serde(default)]
    pub to_browse: BTreeMap<PaperId, String>,
    #[serde(default)]
    pub reasons: BTreeMap<PaperId, String>,
    #[serde(default)]
    pub overview: String,
}

/// Browser extraction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub rational: String,
    pub evidence: String,
    /// At most three sentences.
    pub summary: String,
}

/// Relevance-assessment strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessMode {
    AbstractOnly,
    Adaptive,
}

/// One candidate as presented to the assessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub paper_id: PaperId,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub date: NaiveDate,
    pub score: f64,
    /// Present only on the adaptive second pass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub browser_summary: Option<String>,
}

/// Inputs for one planning round.
#[derive(Debug)]
pub struct PlanRequest<'a> {
    pub user_query: &'a str,
    pub context: &'a PlannerContext,
}

/// Inputs for one assessment round over one candidate set.
#[derive(Debug)]
pub struct AssessRequest<'a> {
    pub mode: AssessMode,
    pub user_query: &'a str,
    pub sub_query: &'a str,
    pub checklist: &'a str,
    pub candidates: &'a [CandidateView],
    /// Ids that already carry browser evidence; they may not be re-browsed.
    pub browsed: &'a std::collections::BTreeSet<PaperId>,
}

impl AssessRequest<'_> {
    pub fn presented_ids(&self) -> std::collections::BTreeSet<PaperId> {
        self.candidates.iter().map(|c| c.paper_id.clone()).collect()
    }
}

/// Inputs for one full-text extraction.
#[derive(Debug)]
pub struct ExtractRequest<'a> {
    pub doc_text: &'a str,
    pub goal: &'a str,
}

/// Outcome of one policy stage.
///
/// Degradation is a value, not an error: the workflow applies the stage's
/// documented fallback (planner: empty plan and termination; assessor: select
/// nothing; extractor: placeholder extraction) and the run continues with the
/// failure recorded.
#[derive(Debug, Clone, PartialEq)]
pub enum StageResult<T> {
    Ok { value: T, notes: Vec<String> },
    Degraded { notes: Vec<String> },
}

impl<T> StageResult<T> {
    pub fn ok(value: T) -> Self {
        StageResult::Ok {
            value,
            notes: Vec::new(),
        }
    }

    pub fn is_degraded(&self) -> bool {
        matches!(self, StageResult::Degraded { .. })
    }

    pub fn notes(&self) -> &[String] {
        match self {
            StageResult::Ok { notes, .. } => notes,
            StageResult::Degraded { notes } => notes,
        }
    }
}

/// A planning/assessment/extraction brain.
///
/// Policies are stateless between calls except for internal script cursors,
/// which are confined to one query's run.
pub trait Policy: Send {
    fn plan(&mut self, req: &PlanRequest<'_>) -> StageResult<Plan>;
    fn assess(&mut self, req: &AssessRequest<'_>) -> StageResult<Assessment>;
    fn extract(&mut self, req: &ExtractRequest<'_>) -> StageResult<Extraction>;
}
