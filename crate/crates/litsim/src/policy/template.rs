//! Prompt templates and `{placeholder}` substitution.
//!
//! Templates are plain-text resources compiled into the binary. Rendering is
//! pure: the same inputs always produce identical text. A template
//! placeholder without a supplied value is a hard error; literal JSON braces
//! in the templates are not placeholders (a placeholder is `{` followed by a
//! lowercase identifier and `}`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::memory::PlannerContext;
use crate::{Error, Result};

use super::{AssessMode, CandidateView};

const PLANNER_SYSTEM: &str = include_str!("../../resources/prompts/planner_system.txt");
const PLANNER_USER: &str = include_str!("../../resources/prompts/planner_user.txt");
const ASSESSOR_ABSTRACT_SYSTEM: &str =
    include_str!("../../resources/prompts/assessor_abstract_system.txt");
const ASSESSOR_ABSTRACT_USER: &str =
    include_str!("../../resources/prompts/assessor_abstract_user.txt");
const ASSESSOR_ADAPTIVE_SYSTEM: &str =
    include_str!("../../resources/prompts/assessor_adaptive_system.txt");
const ASSESSOR_ADAPTIVE_USER: &str =
    include_str!("../../resources/prompts/assessor_adaptive_user.txt");
const EXTRACTOR_SYSTEM: &str = include_str!("../../resources/prompts/extractor_system.txt");
const EXTRACTOR_USER: &str = include_str!("../../resources/prompts/extractor_user.txt");

/// Default assessment recipe; overridable per run.
pub const DEFAULT_SELECTOR_RECIPE: &str = "Prioritize: direct topical alignment with the subquery and original query; clear methodological contributions; recent or seminal works; strong empirical evidence; complete abstracts. Survey papers are down-ranked unless explicitly requested.";

/// One chat message on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// System + user messages for one stage call.
pub type PromptMessages = Vec<ChatMessage>;

/// Finds `{identifier}` placeholders in a template.
fn placeholders(template: &str) -> Vec<&str> {
    let bytes = template.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len()
                && (bytes[end].is_ascii_lowercase() || bytes[end] == b'_' || bytes[end].is_ascii_digit())
            {
                end += 1;
            }
            if end > start && end < bytes.len() && bytes[end] == b'}' {
                found.push(&template[start..end]);
                i = end + 1;
                continue;
            }
        }
        i += 1;
    }
    found
}

/// Substitutes every placeholder; a placeholder missing from `vars` is a hard
/// error before any substitution happens.
pub(crate) fn render(template: &str, vars: &BTreeMap<&str, String>) -> Result<String> {
    let mut missing: Vec<&str> = placeholders(template)
        .into_iter()
        .filter(|name| !vars.contains_key(name))
        .collect();
    if !missing.is_empty() {
        missing.dedup();
        return Err(Error::Template(format!(
            "unfilled placeholder(s): {}",
            missing.join(", ")
        )));
    }
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    Ok(out)
}

/// Renders the query-planning prompt from the memory state.
pub fn render_planner_prompt(
    user_query: &str,
    context: &PlannerContext,
    max_results_per_request: usize,
) -> Result<PromptMessages> {
    let mut system_vars = BTreeMap::new();
    system_vars.insert("max_results_per_request", max_results_per_request.to_string());
    let system = render(PLANNER_SYSTEM, &system_vars)?;

    let mut vars = BTreeMap::new();
    vars.insert("user_query", user_query.to_string());
    vars.insert("current_iteration", context.current_iteration.to_string());
    vars.insert("last_iteration_state", context.last_iteration_state.clone());
    vars.insert(
        "previous_iteration_state",
        context.previous_iteration_state.clone(),
    );
    vars.insert("last_checklist", context.last_checklist.clone());
    vars.insert(
        "last_experience_replay",
        context.last_experience_replay.clone(),
    );
    vars.insert("all_subqueries", context.all_subqueries.clone());
    let user = render(PLANNER_USER, &vars)?;
    Ok(vec![ChatMessage::system(system), ChatMessage::user(user)])
}

/// Serializes candidates for the assessor prompt: id, title, abstract, date,
/// score, and (second pass only) browser summary.
pub fn serialize_candidates(candidates: &[CandidateView]) -> String {
    serde_json::to_string_pretty(candidates).expect("candidates serialize")
}

/// Renders the relevance-assessment prompt; the mode selects the template.
pub fn render_assessor_prompt(
    mode: AssessMode,
    user_query: &str,
    sub_query: &str,
    checklist: &str,
    recipe: &str,
    candidates: &[CandidateView],
) -> Result<PromptMessages> {
    let (system_tpl, user_tpl) = match mode {
        AssessMode::AbstractOnly => (ASSESSOR_ABSTRACT_SYSTEM, ASSESSOR_ABSTRACT_USER),
        AssessMode::Adaptive => (ASSESSOR_ADAPTIVE_SYSTEM, ASSESSOR_ADAPTIVE_USER),
    };
    let mut vars = BTreeMap::new();
    vars.insert("user_query", user_query.to_string());
    vars.insert("sub_query", sub_query.to_string());
    vars.insert("planner_checklist", checklist.to_string());
    vars.insert("selector_recipe", recipe.to_string());
    vars.insert("candidates", serialize_candidates(candidates));
    let user = render(user_tpl, &vars)?;
    Ok(vec![ChatMessage::system(system_tpl), ChatMessage::user(user)])
}

/// Renders the browser-extraction prompt.
pub fn render_extractor_prompt(full_text: &str, goal: &str) -> Result<PromptMessages> {
    let mut vars = BTreeMap::new();
    vars.insert("full_text", full_text.to_string());
    vars.insert("task", goal.to_string());
    let user = render(EXTRACTOR_USER, &vars)?;
    Ok(vec![ChatMessage::system(EXTRACTOR_SYSTEM), ChatMessage::user(user)])
}
