//! Model-backed policy: renders prompts, calls the chat transport, parses the
//! tagged output, and re-asks on parse failures up to a cap.
//!
//! After the cap the stage degrades instead of failing the run: the planner
//! yields a terminal empty plan, the assessor selects nothing, the extractor
//! returns a placeholder. The workflow records every degradation.

use crate::memory::PlannerContext;

use super::parse::{parse_assessment, parse_extraction, parse_plan, ParseFailure};
use super::template::{
    render_assessor_prompt, render_extractor_prompt, render_planner_prompt, PromptMessages,
    DEFAULT_SELECTOR_RECIPE,
};
use super::transport::{chat_complete, ChatRequest, ChatTransport, Decoding, RetryPolicy, TransportError};
use super::{
    AssessRequest, Assessment, ExtractRequest, Extraction, Plan, PlanRequest, Policy, StageResult,
};

/// Knobs for the model-backed policy.
#[derive(Debug, Clone)]
pub struct LlmPolicyConfig {
    /// Re-asks after a parse failure before the stage degrades.
    pub max_parse_retries: u32,
    pub decoding: Decoding,
    pub retry: RetryPolicy,
    pub max_results_per_request: usize,
    pub selector_recipe: String,
    /// When set, incomplete plans proposing outside 3..=6 subqueries are
    /// treated as parse failures instead of warnings.
    pub strict_subquery_bounds: bool,
}

impl Default for LlmPolicyConfig {
    fn default() -> Self {
        LlmPolicyConfig {
            max_parse_retries: 2,
            decoding: Decoding::default(),
            retry: RetryPolicy::default(),
            max_results_per_request: 10,
            selector_recipe: DEFAULT_SELECTOR_RECIPE.to_string(),
            strict_subquery_bounds: false,
        }
    }
}

/// [`Policy`] implementation backed by any [`ChatTransport`].
pub struct LlmPolicy<T: ChatTransport> {
    transport: T,
    config: LlmPolicyConfig,
}

impl<T: ChatTransport> LlmPolicy<T> {
    pub fn new(transport: T, config: LlmPolicyConfig) -> Self {
        LlmPolicy { transport, config }
    }

    /// Runs render → chat → parse with re-asks on parse failures.
    fn stage<V>(
        &self,
        stage_name: &str,
        messages: &PromptMessages,
        mut parse: impl FnMut(&str) -> Result<(V, Vec<String>), ParseFailure>,
    ) -> StageResult<V> {
        let mut notes = Vec::new();
        for attempt in 0..=self.config.max_parse_retries {
            let req = ChatRequest {
                messages,
                decoding: self.config.decoding,
            };
            let outcome = match chat_complete(&self.transport, &req, &self.config.retry) {
                Ok(o) => o,
                Err(TransportError::Transient(e)) => {
                    notes.push(format!("{stage_name}: transport exhausted: {e}"));
                    return StageResult::Degraded { notes };
                }
                Err(TransportError::Permanent(e)) => {
                    notes.push(format!("{stage_name}: transport failed: {e}"));
                    return StageResult::Degraded { notes };
                }
            };
            if outcome.transport_retries > 0 {
                notes.push(format!(
                    "{stage_name}: {} transport retries",
                    outcome.transport_retries
                ));
            }
            match parse(&outcome.text) {
                Ok((value, warnings)) => {
                    notes.extend(
                        warnings
                            .into_iter()
                            .map(|w| format!("{stage_name}: {w}")),
                    );
                    return StageResult::Ok { value, notes };
                }
                Err(failure) => {
                    notes.push(format!(
                        "{stage_name}: attempt {attempt}: parse failure ({}): {failure}",
                        failure.defect_class()
                    ));
                }
            }
        }
        notes.push(format!(
            "{stage_name}: degraded after {} parse attempts",
            self.config.max_parse_retries + 1
        ));
        StageResult::Degraded { notes }
    }

    /// Tree-consistency checks the parser cannot do alone: every source id
    /// must name an existing node.
    fn validate_against_tree(plan: &Plan, context: &PlannerContext) -> Result<(), ParseFailure> {
        for (pos, item) in plan.subqueries.iter().enumerate() {
            if item.source_id >= context.node_count {
                return Err(ParseFailure::Schema {
                    class: "unknown_source",
                    detail: format!(
                        "subquery {pos}: source_id {} not among {} known nodes",
                        item.source_id, context.node_count
                    ),
                });
            }
        }
        Ok(())
    }
}

impl<T: ChatTransport> Policy for LlmPolicy<T> {
    fn plan(&mut self, req: &PlanRequest<'_>) -> StageResult<Plan> {
        let messages = match render_planner_prompt(
            req.user_query,
            req.context,
            self.config.max_results_per_request,
        ) {
            Ok(m) => m,
            Err(e) => {
                return StageResult::Degraded {
                    notes: vec![format!("planner: {e}")],
                }
            }
        };
        let strict = self.config.strict_subquery_bounds;
        let context = req.context;
        self.stage("planner", &messages, |text| {
            let parsed = parse_plan(text)?;
            Self::validate_against_tree(&parsed.plan, context)?;
            let n = parsed.plan.subqueries.len();
            if strict && !parsed.plan.is_complete && n > 0 && !(3..=6).contains(&n) {
                return Err(ParseFailure::Schema {
                    class: "bounds",
                    detail: format!("strict mode: {n} subqueries outside 3..=6"),
                });
            }
            Ok((parsed.plan, parsed.warnings))
        })
    }

    fn assess(&mut self, req: &AssessRequest<'_>) -> StageResult<Assessment> {
        let messages = match render_assessor_prompt(
            req.mode,
            req.user_query,
            req.sub_query,
            req.checklist,
            &self.config.selector_recipe,
            req.candidates,
        ) {
            Ok(m) => m,
            Err(e) => {
                return StageResult::Degraded {
                    notes: vec![format!("assessor: {e}")],
                }
            }
        };
        let presented = req.presented_ids();
        let mode = req.mode;
        let browsed = req.browsed;
        self.stage("assessor", &messages, |text| {
            let parsed = parse_assessment(text, mode, &presented, browsed)?;
            Ok((parsed.assessment, parsed.warnings))
        })
    }

    fn extract(&mut self, req: &ExtractRequest<'_>) -> StageResult<Extraction> {
        let messages = match render_extractor_prompt(req.doc_text, req.goal) {
            Ok(m) => m,
            Err(e) => {
                return StageResult::Degraded {
                    notes: vec![format!("extractor: {e}")],
                }
            }
        };
        self.stage("extractor", &messages, |text| {
            Ok((parse_extraction(text)?, Vec::new()))
        })
    }
}
