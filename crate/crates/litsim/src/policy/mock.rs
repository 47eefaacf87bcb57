//! Deterministic test policies: scripted playback and a greedy heuristic.
//!
//! Neither touches the network. With a fixed script and configuration, two
//! full benchmark runs produce byte-identical trajectories.

use serde::{Deserialize, Serialize};

use crate::retrieval::tokenize;

use super::{
    AssessRequest, Assessment, ExtractRequest, Extraction, LinkType, Plan, PlanItem, PlanRequest,
    Policy, StageResult,
};

/// What a scripted mock does once its assessment list runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentFallback {
    /// Select every presented candidate.
    SelectAll,
    /// Select nothing (everything is implicitly discarded downstream).
    #[default]
    SelectNone,
}

/// Canned outputs consumed in call order; plans index by iteration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub plans: Vec<Plan>,
    #[serde(default)]
    pub assessments: Vec<Assessment>,
    #[serde(default)]
    pub extractions: Vec<Extraction>,
    #[serde(default)]
    pub assessment_fallback: AssessmentFallback,
}

/// Scripted policy: replays the script, then signals completion.
#[derive(Debug, Clone)]
pub struct MockPolicy {
    script: MockScript,
    assess_cursor: usize,
    extract_cursor: usize,
}

impl MockPolicy {
    pub fn new(script: MockScript) -> Self {
        MockPolicy {
            script,
            assess_cursor: 0,
            extract_cursor: 0,
        }
    }

    fn select_all(req: &AssessRequest<'_>) -> Assessment {
        Assessment {
            selected: req.candidates.iter().map(|c| c.paper_id.clone()).collect(),
            overview: "mock: selected all candidates".into(),
            ..Assessment::default()
        }
    }
}

impl Policy for MockPolicy {
    fn plan(&mut self, req: &PlanRequest<'_>) -> StageResult<Plan> {
        // Iterations are 1-based; an exhausted script yields a terminal plan.
        let idx = req.context.current_iteration.saturating_sub(1);
        match self.script.plans.get(idx) {
            Some(plan) => StageResult::ok(plan.clone()),
            None => StageResult::ok(Plan::complete()),
        }
    }

    fn assess(&mut self, req: &AssessRequest<'_>) -> StageResult<Assessment> {
        match self.script.assessments.get(self.assess_cursor) {
            Some(assessment) => {
                self.assess_cursor += 1;
                StageResult::ok(assessment.clone())
            }
            None => match self.script.assessment_fallback {
                AssessmentFallback::SelectAll => StageResult::ok(Self::select_all(req)),
                AssessmentFallback::SelectNone => StageResult::ok(Assessment {
                    overview: "mock: script exhausted, selected nothing".into(),
                    ..Assessment::default()
                }),
            },
        }
    }

    fn extract(&mut self, _req: &ExtractRequest<'_>) -> StageResult<Extraction> {
        match self.script.extractions.get(self.extract_cursor) {
            Some(extraction) => {
                self.extract_cursor += 1;
                StageResult::ok(extraction.clone())
            }
            None => StageResult::ok(Extraction {
                rational: "mock".into(),
                evidence: "mock".into(),
                summary: "mock: extraction script exhausted".into(),
            }),
        }
    }
}

/// Greedy heuristic policy: plans the original query verbatim at iteration 1,
/// declares completion afterwards, and selects candidates sharing at least
/// `min_shared_tokens` distinct content tokens with the query (0 selects
/// everything).
#[derive(Debug, Clone)]
pub struct HeuristicPolicy {
    pub target_k: usize,
    pub min_shared_tokens: usize,
}

impl HeuristicPolicy {
    pub fn new(target_k: usize, min_shared_tokens: usize) -> Self {
        HeuristicPolicy {
            target_k,
            min_shared_tokens,
        }
    }
}

impl Policy for HeuristicPolicy {
    fn plan(&mut self, req: &PlanRequest<'_>) -> StageResult<Plan> {
        if req.context.current_iteration == 1 {
            StageResult::ok(Plan {
                subqueries: vec![PlanItem {
                    link_type: LinkType::Derive,
                    source_id: 0,
                    text: Some(req.user_query.to_string()),
                    target_k: self.target_k,
                }],
                checklist: "verbatim query".into(),
                experience_replay: "heuristic: single verbatim pass".into(),
                is_complete: false,
            })
        } else {
            StageResult::ok(Plan::complete())
        }
    }

    fn assess(&mut self, req: &AssessRequest<'_>) -> StageResult<Assessment> {
        let query_tokens: std::collections::BTreeSet<String> =
            tokenize(req.user_query).into_iter().collect();
        let mut selected = Vec::new();
        for candidate in req.candidates {
            let doc_tokens: std::collections::BTreeSet<String> =
                tokenize(&format!("{} {}", candidate.title, candidate.abstract_text))
                    .into_iter()
                    .collect();
            let shared = query_tokens.intersection(&doc_tokens).count();
            if shared >= self.min_shared_tokens {
                selected.push(candidate.paper_id.clone());
            }
        }
        StageResult::ok(Assessment {
            selected,
            overview: format!(
                "heuristic: kept candidates sharing >= {} query tokens",
                self.min_shared_tokens
            ),
            ..Assessment::default()
        })
    }

    fn extract(&mut self, _req: &ExtractRequest<'_>) -> StageResult<Extraction> {
        StageResult::ok(Extraction {
            rational: "heuristic".into(),
            evidence: "heuristic".into(),
            summary: "heuristic extraction placeholder".into(),
        })
    }
}
