//! The relevance-assessment stage.
//!
//! Drives Abstract-only or Adaptive evaluation of one candidate set and
//! produces the selections plus the feedback overview. Adaptive mode runs at
//! most one browse round: candidates the first round marks uncertain get a
//! full-text extraction, then a second round must finalize them.

pub mod fulltext;

use std::collections::BTreeSet;

use crate::corpus::PaperId;
use crate::policy::{
    AssessMode, AssessRequest, Assessment, CandidateView, ExtractRequest, Extraction, Policy,
    StageResult,
};
use crate::{Error, Result};

pub use fulltext::{
    fetch_fulltext, is_stop_section, parse_html_sections, store_file_name, FullTextDoc,
    FullTextProvider, FullTextSource, HttpFetcher, LocalStore, Section,
};

/// One finished assessment over one candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessOutcome {
    pub assessment: Assessment,
    /// Diagnostics: parse warnings, retries, fetch failures, degradations.
    pub notes: Vec<String>,
    /// True when a policy round degraded instead of answering.
    pub degraded: bool,
}

impl AssessOutcome {
    fn vacuous() -> Self {
        AssessOutcome {
            assessment: Assessment::default(),
            notes: Vec::new(),
            degraded: false,
        }
    }
}

/// Candidates the round never mentioned become discarded: the round is
/// final, and strict selection treats silence as rejection.
fn discard_unmentioned(assessment: &mut Assessment, presented: &[CandidateView]) {
    let mentioned: BTreeSet<&PaperId> = assessment
        .selected
        .iter()
        .chain(assessment.discarded.iter())
        .chain(assessment.to_browse.keys())
        .collect();
    let missing: Vec<PaperId> = presented
        .iter()
        .map(|c| &c.paper_id)
        .filter(|id| !mentioned.contains(id))
        .cloned()
        .collect();
    assessment.discarded.extend(missing);
}

/// Abstract-only assessment: a single policy round over titles and
/// abstracts; `to_browse` is forced empty.
pub fn assess_abstract_only(
    policy: &mut dyn Policy,
    user_query: &str,
    sub_query: &str,
    checklist: &str,
    candidates: &[CandidateView],
) -> AssessOutcome {
    if candidates.is_empty() {
        return AssessOutcome::vacuous();
    }
    let browsed = BTreeSet::new();
    let result = policy.assess(&AssessRequest {
        mode: AssessMode::AbstractOnly,
        user_query,
        sub_query,
        checklist,
        candidates,
        browsed: &browsed,
    });
    match result {
        StageResult::Ok { value, notes } => {
            let mut assessment = value;
            assessment.to_browse.clear();
            discard_unmentioned(&mut assessment, candidates);
            AssessOutcome {
                assessment,
                notes,
                degraded: false,
            }
        }
        StageResult::Degraded { mut notes } => {
            notes.push("assessment degraded: nothing selected".into());
            AssessOutcome {
                assessment: Assessment::default(),
                notes,
                degraded: true,
            }
        }
    }
}

/// Adaptive assessment: round one may mark candidates uncertain; each gets
/// one full-text extraction, and round two presents them with the browser
/// summary attached and must finalize them.
///
/// A candidate whose full text cannot be found is discarded with reason
/// `fulltext_unavailable`.
pub fn assess_adaptive(
    policy: &mut dyn Policy,
    provider: &FullTextProvider,
    user_query: &str,
    sub_query: &str,
    checklist: &str,
    candidates: &[CandidateView],
) -> AssessOutcome {
    if candidates.is_empty() {
        return AssessOutcome::vacuous();
    }
    let browsed = BTreeSet::new();
    let round1 = policy.assess(&AssessRequest {
        mode: AssessMode::Adaptive,
        user_query,
        sub_query,
        checklist,
        candidates,
        browsed: &browsed,
    });
    let (mut merged, mut notes) = match round1 {
        StageResult::Ok { value, notes } => (value, notes),
        StageResult::Degraded { mut notes } => {
            notes.push("assessment degraded: nothing selected".into());
            return AssessOutcome {
                assessment: Assessment::default(),
                notes,
                degraded: true,
            };
        }
    };
    discard_unmentioned(&mut merged, candidates);

    let to_browse = std::mem::take(&mut merged.to_browse);
    if to_browse.is_empty() {
        return AssessOutcome {
            assessment: merged,
            notes,
            degraded: false,
        };
    }

    // Browse pass: fetch + extract each uncertain candidate.
    let mut second_pass: Vec<CandidateView> = Vec::new();
    for (id, goal) in &to_browse {
        match fetch_fulltext(provider, id) {
            Ok(doc) => {
                let (extraction, extract_notes) = extract(policy, &doc, goal)
                    .unwrap_or_else(|e| {
                        (
                            Extraction {
                                rational: String::new(),
                                evidence: String::new(),
                                summary: "extraction failed".into(),
                            },
                            vec![format!("extract({id}): {e}")],
                        )
                    });
                notes.extend(extract_notes);
                let Some(base) = candidates.iter().find(|c| &c.paper_id == id) else {
                    notes.push(format!("browse target {id} missing from candidates"));
                    continue;
                };
                let mut view = base.clone();
                view.browser_summary = Some(extraction.summary);
                second_pass.push(view);
            }
            Err(Error::FullTextNotFound(_)) => {
                merged.discarded.push(id.clone());
                merged
                    .reasons
                    .insert(id.clone(), "fulltext_unavailable".into());
                notes.push(format!("{id}: full text unavailable, discarded"));
            }
            Err(e) => {
                merged.discarded.push(id.clone());
                merged
                    .reasons
                    .insert(id.clone(), "fulltext_unavailable".into());
                notes.push(format!("{id}: full text lookup failed ({e}), discarded"));
            }
        }
    }

    if second_pass.is_empty() {
        return AssessOutcome {
            assessment: merged,
            notes,
            degraded: false,
        };
    }

    let browsed: BTreeSet<PaperId> = second_pass.iter().map(|c| c.paper_id.clone()).collect();
    let round2 = policy.assess(&AssessRequest {
        mode: AssessMode::Adaptive,
        user_query,
        sub_query,
        checklist,
        candidates: &second_pass,
        browsed: &browsed,
    });
    let mut degraded = false;
    match round2 {
        StageResult::Ok { value, notes: n2 } => {
            notes.extend(n2);
            for id in value.selected {
                if !merged.selected.contains(&id) {
                    merged.selected.push(id);
                }
            }
            for id in value.discarded {
                if !merged.discarded.contains(&id) {
                    merged.discarded.push(id);
                }
            }
            merged.reasons.extend(value.reasons);
            if !value.overview.trim().is_empty() {
                if merged.overview.trim().is_empty() {
                    merged.overview = value.overview;
                } else {
                    merged.overview = format!("{}\n{}", merged.overview, value.overview);
                }
            }
        }
        StageResult::Degraded { notes: n2 } => {
            notes.extend(n2);
            notes.push("browse round degraded".into());
            degraded = true;
        }
    }

    // Round two must finalize every browsed candidate; leftovers are
    // discarded conservatively.
    let finalized: BTreeSet<&PaperId> = merged
        .selected
        .iter()
        .chain(merged.discarded.iter())
        .collect();
    let leftovers: Vec<PaperId> = browsed
        .iter()
        .filter(|id| !finalized.contains(id))
        .cloned()
        .collect();
    for id in leftovers {
        notes.push(format!("{id}: browsed but never finalized, discarded"));
        merged
            .reasons
            .entry(id.clone())
            .or_insert_with(|| "assessment_degraded".into());
        merged.discarded.push(id);
    }
    merged.to_browse.clear();

    AssessOutcome {
        assessment: merged,
        notes,
        degraded,
    }
}

/// One targeted extraction from a full-text document.
///
/// An empty goal is rejected before any policy call. Extractor degradation
/// yields the placeholder extraction (empty evidence, summary
/// "extraction failed"), never an error, so the candidate still finalizes.
pub fn extract(
    policy: &mut dyn Policy,
    doc: &FullTextDoc,
    goal: &str,
) -> Result<(Extraction, Vec<String>)> {
    if goal.trim().is_empty() {
        return Err(Error::Assessment("empty extraction goal".into()));
    }
    if doc.is_empty() {
        return Err(Error::Assessment(format!("{}: empty document", doc.paper_id)));
    }
    let rendered = doc.rendered();
    let result = policy.extract(&ExtractRequest {
        doc_text: &rendered,
        goal,
    });
    Ok(match result {
        StageResult::Ok { value, notes } => {
            let capped = Extraction {
                summary: crate::policy::parse::cap_sentences(&value.summary, 3),
                ..value
            };
            (capped, notes)
        }
        StageResult::Degraded { mut notes } => {
            notes.push("extraction degraded".into());
            (
                Extraction {
                    rational: String::new(),
                    evidence: String::new(),
                    summary: "extraction failed".into(),
                },
                notes,
            )
        }
    })
}
