//! Strict parsing of tagged JSON model outputs.
//!
//! Extraction takes the last well-formed tagged span in the text, since
//! reasoning-mode models emit chatter before the payload. Failures carry a
//! defect class that drives the re-ask loop.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use crate::corpus::{normalize_paper_id, PaperId};

use super::{AssessMode, Assessment, Extraction, LinkType, Plan, PlanItem};

/// Why a model output could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseFailure {
    #[error("missing <{tag}> tags")]
    MissingTags { tag: String },
    #[error("invalid json: {detail}")]
    InvalidJson { detail: String },
    #[error("schema violation ({class}): {detail}")]
    Schema {
        class: &'static str,
        detail: String,
    },
}

impl ParseFailure {
    fn schema(class: &'static str, detail: impl Into<String>) -> Self {
        ParseFailure::Schema {
            class,
            detail: detail.into(),
        }
    }

    /// Short defect class for retry diagnostics.
    pub fn defect_class(&self) -> &str {
        match self {
            ParseFailure::MissingTags { .. } => "missing_tags",
            ParseFailure::InvalidJson { .. } => "invalid_json",
            ParseFailure::Schema { class, .. } => class,
        }
    }
}

/// Extracts the content of the last well-formed `<tag>...</tag>` pair.
/// Nested openings resolve to the innermost span before the final close.
pub fn extract_tagged<'a>(text: &'a str, tag: &str) -> Result<&'a str, ParseFailure> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let close_pos = text.rfind(&close).ok_or_else(|| ParseFailure::MissingTags {
        tag: tag.to_string(),
    })?;
    let open_pos = text[..close_pos]
        .rfind(&open)
        .ok_or_else(|| ParseFailure::MissingTags {
            tag: tag.to_string(),
        })?;
    Ok(&text[open_pos + open.len()..close_pos])
}

fn parse_json(span: &str) -> Result<Value, ParseFailure> {
    serde_json::from_str(span.trim()).map_err(|e| ParseFailure::InvalidJson {
        detail: e.to_string(),
    })
}

fn as_object(value: &Value) -> Result<&serde_json::Map<String, Value>, ParseFailure> {
    value
        .as_object()
        .ok_or_else(|| ParseFailure::schema("bad_field", "payload is not a JSON object"))
}

fn string_field(
    obj: &serde_json::Map<String, Value>,
    name: &str,
    warnings: &mut Vec<String>,
) -> Result<String, ParseFailure> {
    match obj.get(name) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(ParseFailure::schema(
            "bad_field",
            format!("{name} must be a string, got {other}"),
        )),
        None => {
            warnings.push(format!("missing field {name}, defaulted to empty"));
            Ok(String::new())
        }
    }
}

fn usize_field(value: &Value, name: &str, class: &'static str) -> Result<usize, ParseFailure> {
    value
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| ParseFailure::schema(class, format!("{name} must be a non-negative integer, got {value}")))
}

/// A parsed plan plus non-fatal validation warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPlan {
    pub plan: Plan,
    pub warnings: Vec<String>,
}

/// Parses the planner payload inside `<planner_output>` tags.
///
/// Link types must be lowercase `continue`/`derive`/`expand`; `source_id`
/// non-negative; `target_k` at least 1; Derive/Expand require text while
/// Continue text is ignored. Continuing the root is rejected here. Subquery
/// counts outside 1..=8 are soft-validated (warning only) on incomplete
/// plans; an empty plan is the planner's convergence signal, not a defect.
pub fn parse_plan(raw: &str) -> Result<ParsedPlan, ParseFailure> {
    let span = extract_tagged(raw, "planner_output")?;
    let value = parse_json(span)?;
    let obj = as_object(&value)?;
    let mut warnings = Vec::new();

    let items = obj
        .get("subqueries")
        .ok_or_else(|| ParseFailure::schema("bad_field", "missing subqueries array"))?
        .as_array()
        .ok_or_else(|| ParseFailure::schema("bad_field", "subqueries must be an array"))?;

    let mut subqueries = Vec::with_capacity(items.len());
    for (pos, item) in items.iter().enumerate() {
        let item = item
            .as_object()
            .ok_or_else(|| ParseFailure::schema("bad_field", format!("subquery {pos} is not an object")))?;
        let link_raw = item
            .get("link_type")
            .and_then(Value::as_str)
            .ok_or_else(|| ParseFailure::schema("bad_link_type", format!("subquery {pos}: missing link_type")))?;
        let link_type = match link_raw {
            "continue" => LinkType::Continue,
            "derive" => LinkType::Derive,
            "expand" => LinkType::Expand,
            other => {
                return Err(ParseFailure::schema(
                    "bad_link_type",
                    format!("subquery {pos}: unknown link_type {other:?}"),
                ))
            }
        };
        let source_id = usize_field(
            item.get("source_id")
                .ok_or_else(|| ParseFailure::schema("bad_source_id", format!("subquery {pos}: missing source_id")))?,
            "source_id",
            "bad_source_id",
        )?;
        let target_k = usize_field(
            item.get("target_k")
                .ok_or_else(|| ParseFailure::schema("bad_target_k", format!("subquery {pos}: missing target_k")))?,
            "target_k",
            "bad_target_k",
        )?;
        if target_k == 0 {
            return Err(ParseFailure::schema(
                "bad_target_k",
                format!("subquery {pos}: target_k must be >= 1"),
            ));
        }
        let text = match (link_type, item.get("text")) {
            (LinkType::Continue, _) => None,
            (_, Some(Value::String(s))) if !s.trim().is_empty() => Some(s.clone()),
            (_, _) => {
                return Err(ParseFailure::schema(
                    "missing_text",
                    format!("subquery {pos}: {link_type} requires non-empty text"),
                ))
            }
        };
        if link_type == LinkType::Continue && source_id == 0 {
            return Err(ParseFailure::schema(
                "continue_root",
                format!("subquery {pos}: the root query (id=0) cannot be continued"),
            ));
        }
        subqueries.push(PlanItem {
            link_type,
            source_id,
            text,
            target_k,
        });
    }

    let checklist = string_field(obj, "checklist", &mut warnings)?;
    let experience_replay = string_field(obj, "experience_replay", &mut warnings)?;
    let is_complete = match obj.get("is_complete") {
        Some(Value::Bool(b)) => *b,
        Some(other) => {
            return Err(ParseFailure::schema(
                "bad_field",
                format!("is_complete must be a boolean, got {other}"),
            ))
        }
        None => {
            warnings.push("missing is_complete, defaulted to false".into());
            false
        }
    };

    let n = subqueries.len();
    if !is_complete && n > 0 && !(1..=8).contains(&n) {
        warnings.push(format!("subquery count {n} outside soft bounds 1..=8"));
    }

    Ok(ParsedPlan {
        plan: Plan {
            subqueries,
            checklist,
            experience_replay,
            is_complete,
        },
        warnings,
    })
}

/// A parsed assessment, ids outside the presented set dropped with a count.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAssessment {
    pub assessment: Assessment,
    /// Ids the model referenced that were never presented (hallucination
    /// tolerance: dropped, counted, never fatal).
    pub dropped_ids: Vec<PaperId>,
    pub warnings: Vec<String>,
}

fn id_list(
    obj: &serde_json::Map<String, Value>,
    name: &str,
    required: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<PaperId>, ParseFailure> {
    match obj.get(name) {
        Some(Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                let s = item.as_str().ok_or_else(|| {
                    ParseFailure::schema("bad_field", format!("{name} entries must be strings"))
                })?;
                out.push(PaperId::new(s));
            }
            Ok(out)
        }
        Some(other) => Err(ParseFailure::schema(
            "bad_field",
            format!("{name} must be an array, got {other}"),
        )),
        None if required => Err(ParseFailure::schema(
            "bad_field",
            format!("missing {name} array"),
        )),
        None => {
            warnings.push(format!("missing field {name}, defaulted to empty"));
            Ok(Vec::new())
        }
    }
}

/// Resolves a model-echoed id against the presented set, tolerating version
/// suffixes and whitespace.
fn resolve_presented(raw: &PaperId, presented: &BTreeSet<PaperId>) -> Option<PaperId> {
    if presented.contains(raw) {
        return Some(raw.clone());
    }
    let normalized = normalize_paper_id(raw.as_str())?;
    presented.contains(&normalized).then_some(normalized)
}

/// Parses the assessor payload inside `<selector_output>` tags.
///
/// Referenced ids outside `presented` are dropped with a warning counter. In
/// Abstract-only mode `to_browse` is forced empty. Ids in `already_browsed`
/// may not reappear in `to_browse`; that violation is a parse failure because
/// it would loop the browse round.
pub fn parse_assessment(
    raw: &str,
    mode: AssessMode,
    presented: &BTreeSet<PaperId>,
    already_browsed: &BTreeSet<PaperId>,
) -> Result<ParsedAssessment, ParseFailure> {
    let span = extract_tagged(raw, "selector_output")?;
    let value = parse_json(span)?;
    let obj = as_object(&value)?;
    let mut warnings = Vec::new();
    let mut dropped = Vec::new();

    let keep_presented = |ids: Vec<PaperId>, dropped: &mut Vec<PaperId>| -> Vec<PaperId> {
        let mut kept = Vec::with_capacity(ids.len());
        for id in ids {
            match resolve_presented(&id, presented) {
                Some(resolved) => {
                    if !kept.contains(&resolved) {
                        kept.push(resolved);
                    }
                }
                None => dropped.push(id),
            }
        }
        kept
    };

    let selected_raw = id_list(obj, "selected", true, &mut warnings)?;
    let discarded_raw = id_list(obj, "discarded", false, &mut warnings)?;
    let selected = keep_presented(selected_raw, &mut dropped);
    let discarded = keep_presented(discarded_raw, &mut dropped);

    if let Some(conflict) = selected.iter().find(|id| discarded.contains(id)) {
        return Err(ParseFailure::schema(
            "decision_conflict",
            format!("{conflict} appears in both selected and discarded"),
        ));
    }

    let mut to_browse = BTreeMap::new();
    match obj.get("to_browse") {
        Some(Value::Object(map)) => {
            for (key, goal) in map {
                let goal = goal.as_str().ok_or_else(|| {
                    ParseFailure::schema("bad_field", "to_browse goals must be strings")
                })?;
                if goal.trim().is_empty() {
                    return Err(ParseFailure::schema(
                        "bad_field",
                        format!("empty extraction goal for {key}"),
                    ));
                }
                let raw_id = PaperId::new(key.as_str());
                match resolve_presented(&raw_id, presented) {
                    Some(resolved) => {
                        if already_browsed.contains(&resolved) {
                            return Err(ParseFailure::schema(
                                "rebrowse",
                                format!("{resolved} already carries browser evidence"),
                            ));
                        }
                        to_browse.insert(resolved, goal.to_string());
                    }
                    None => dropped.push(raw_id),
                }
            }
        }
        Some(Value::Null) | None => {}
        Some(other) => {
            return Err(ParseFailure::schema(
                "bad_field",
                format!("to_browse must be an object, got {other}"),
            ))
        }
    }
    if mode == AssessMode::AbstractOnly && !to_browse.is_empty() {
        warnings.push(format!(
            "abstract-only mode: dropped {} to_browse entries",
            to_browse.len()
        ));
        to_browse.clear();
    }

    let mut reasons = BTreeMap::new();
    match obj.get("reasons") {
        Some(Value::Object(map)) => {
            for (key, reason) in map {
                if let Some(reason) = reason.as_str() {
                    reasons.insert(PaperId::new(key.as_str()), reason.to_string());
                }
            }
        }
        Some(Value::Null) | None => warnings.push("missing field reasons, defaulted to empty".into()),
        Some(other) => {
            return Err(ParseFailure::schema(
                "bad_field",
                format!("reasons must be an object, got {other}"),
            ))
        }
    }

    let overview = string_field(obj, "overview", &mut warnings)?;
    if !dropped.is_empty() {
        warnings.push(format!("dropped {} unpresented id(s)", dropped.len()));
    }

    Ok(ParsedAssessment {
        assessment: Assessment {
            selected,
            discarded,
            to_browse,
            reasons,
            overview,
        },
        dropped_ids: dropped,
        warnings,
    })
}

/// Splits text into sentences at terminal punctuation followed by
/// whitespace; crude but deterministic.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((idx, ch)) = chars.next() {
        if matches!(ch, '.' | '!' | '?') {
            if let Some((_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = idx + ch.len_utf8();
                    let s = text[start..end].trim();
                    if !s.is_empty() {
                        sentences.push(s);
                    }
                    start = end;
                }
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

/// Joins the first `cap` sentences of `text`.
pub fn cap_sentences(text: &str, cap: usize) -> String {
    let sentences = split_sentences(text);
    if sentences.len() <= cap {
        text.trim().to_string()
    } else {
        sentences[..cap].join(" ")
    }
}

/// Parses the extractor payload inside `<extractor_output>` tags.
/// All three fields must be present, non-empty strings; summaries longer
/// than three sentences are trimmed to the first three.
pub fn parse_extraction(raw: &str) -> Result<Extraction, ParseFailure> {
    let span = extract_tagged(raw, "extractor_output")?;
    let value = parse_json(span)?;
    let obj = as_object(&value)?;
    let field = |name: &str| -> Result<String, ParseFailure> {
        match obj.get(name) {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            Some(Value::String(_)) | None => Err(ParseFailure::schema(
                "bad_field",
                format!("{name} must be a non-empty string"),
            )),
            Some(other) => Err(ParseFailure::schema(
                "bad_field",
                format!("{name} must be a string, got {other}"),
            )),
        }
    };
    let rational = field("rational")?;
    let evidence = field("evidence")?;
    let summary = cap_sentences(&field("summary")?, 3);
    Ok(Extraction {
        rational,
        evidence,
        summary,
    })
}
