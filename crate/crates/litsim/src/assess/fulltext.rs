//! Full-text documents for adaptive browsing.
//!
//! A local store of pre-parsed section files is consulted first; an optional
//! HTTP fetcher kicks in only when enabled. Stop-word sections (references,
//! acknowledgments) are filtered everywhere; math text passes through
//! verbatim.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::PaperId;
use crate::{Error, Result};

/// Where a full-text document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FullTextSource {
    LocalStore,
    Fetched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// Sectioned full text of one paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullTextDoc {
    pub paper_id: PaperId,
    pub sections: Vec<Section>,
    pub source: FullTextSource,
}

impl FullTextDoc {
    /// Text rendered for the extractor prompt: `## name` blocks in order.
    pub fn rendered(&self) -> String {
        self.sections
            .iter()
            .map(|s| format!("## {}\n{}", s.name, s.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn is_empty(&self) -> bool {
        self.sections.iter().all(|s| s.text.trim().is_empty())
    }
}

/// Sections dropped from every document.
pub fn is_stop_section(name: &str) -> bool {
    let n = name.trim().to_lowercase();
    n == "references" || n == "bibliography" || n.starts_with("acknowledg")
}

fn filter_sections(sections: Vec<Section>) -> Vec<Section> {
    sections
        .into_iter()
        .filter(|s| !is_stop_section(&s.name))
        .collect()
}

/// Ids may contain `/` (old-style arXiv); encode for use as a file name.
pub fn store_file_name(id: &PaperId) -> String {
    format!("{}.json", id.as_str().replace('/', "_"))
}

#[derive(Deserialize)]
struct StoredDoc {
    paper_id: String,
    sections: Vec<Section>,
}

/// Directory of per-paper JSON files `{paper_id, sections: [{name, text}]}`.
#[derive(Debug, Clone)]
pub struct LocalStore {
    dir: PathBuf,
}

impl LocalStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        LocalStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn load(&self, id: &PaperId) -> Result<Option<FullTextDoc>> {
        let path = self.dir.join(store_file_name(id));
        let raw = match std::fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let stored: StoredDoc = serde_json::from_str(&raw)?;
        Ok(Some(FullTextDoc {
            paper_id: PaperId::new(stored.paper_id),
            sections: filter_sections(stored.sections),
            source: FullTextSource::LocalStore,
        }))
    }
}

/// Tolerant HTML-to-sections parser.
///
/// Headings (h1..h6) open sections; everything else contributes text with
/// tags stripped. `alttext` attributes (math elements) are injected verbatim
/// into the text stream. Script and style bodies are skipped.
pub fn parse_html_sections(html: &str) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    let mut current_name = "body".to_string();
    let mut current_text = String::new();
    let mut rest = html;
    let mut in_heading: Option<String> = None;
    let mut heading_text = String::new();
    let mut skip_until: Option<&str> = None;

    fn decode_entities(s: &str) -> String {
        s.replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&#39;", "'")
            .replace("&nbsp;", " ")
    }

    fn push_section(sections: &mut Vec<Section>, name: &str, text: &str) {
        let trimmed = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if !trimmed.is_empty() {
            sections.push(Section {
                name: name.to_string(),
                text: trimmed,
            });
        }
    }

    while let Some(lt) = rest.find('<') {
        let text_before = &rest[..lt];
        if skip_until.is_none() {
            let decoded = decode_entities(text_before);
            if in_heading.is_some() {
                heading_text.push_str(&decoded);
            } else {
                current_text.push_str(&decoded);
            }
        }
        let Some(gt_rel) = rest[lt..].find('>') else {
            rest = "";
            break;
        };
        let tag = &rest[lt + 1..lt + gt_rel];
        rest = &rest[lt + gt_rel + 1..];

        let tag_name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        let closing = tag.starts_with('/');

        if let Some(waiting) = skip_until {
            if closing && tag_name == waiting {
                skip_until = None;
            }
            continue;
        }
        match tag_name.as_str() {
            "script" if !closing => skip_until = Some("script"),
            "style" if !closing => skip_until = Some("style"),
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                if closing {
                    if in_heading.take().is_some() {
                        push_section(&mut sections, &current_name, &current_text);
                        current_text = String::new();
                        current_name = heading_text.split_whitespace().collect::<Vec<_>>().join(" ");
                        if current_name.is_empty() {
                            current_name = "section".into();
                        }
                        heading_text = String::new();
                    }
                } else {
                    in_heading = Some(tag_name.clone());
                }
            }
            _ => {
                // Math elements carry their source text in alttext.
                if let Some(pos) = tag.find("alttext=\"") {
                    let after = &tag[pos + "alttext=\"".len()..];
                    if let Some(end) = after.find('"') {
                        current_text.push(' ');
                        current_text.push_str(&decode_entities(&after[..end]));
                        current_text.push(' ');
                    }
                }
                // Block-level separators keep words apart after stripping.
                if matches!(tag_name.as_str(), "p" | "div" | "br" | "li" | "section") {
                    current_text.push(' ');
                }
            }
        }
    }
    if skip_until.is_none() {
        current_text.push_str(&decode_entities(rest));
    }
    push_section(&mut sections, &current_name, &current_text);
    filter_sections(sections)
}

/// HTTP fetcher for full texts; the URL template substitutes `{id}`.
pub struct HttpFetcher {
    url_template: String,
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(url_template: impl Into<String>, timeout: std::time::Duration) -> Self {
        HttpFetcher {
            url_template: url_template.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .expect("reqwest client builds"),
        }
    }

    fn fetch(&self, id: &PaperId) -> Result<Option<FullTextDoc>> {
        let url = self.url_template.replace("{id}", id.as_str());
        let response = match self.client.get(&url).send() {
            Ok(r) => r,
            Err(e) => {
                log::warn!("fetch {url} failed: {e}");
                return Ok(None);
            }
        };
        if !response.status().is_success() {
            return Ok(None);
        }
        let html = response.text().map_err(|e| Error::Corpus(e.to_string()))?;
        let sections = parse_html_sections(&html);
        if sections.is_empty() {
            return Ok(None);
        }
        Ok(Some(FullTextDoc {
            paper_id: id.clone(),
            sections,
            source: FullTextSource::Fetched,
        }))
    }
}

/// Resolution order: local store, then the fetcher when enabled.
#[derive(Default)]
pub struct FullTextProvider {
    store: Option<LocalStore>,
    fetcher: Option<HttpFetcher>,
}

impl FullTextProvider {
    pub fn new(store: Option<LocalStore>, fetcher: Option<HttpFetcher>) -> Self {
        FullTextProvider { store, fetcher }
    }

    pub fn with_store(store: LocalStore) -> Self {
        FullTextProvider {
            store: Some(store),
            fetcher: None,
        }
    }
}

/// Looks a paper's full text up; `Err(FullTextNotFound)` drives the caller's
/// discard-with-reason path.
pub fn fetch_fulltext(provider: &FullTextProvider, id: &PaperId) -> Result<FullTextDoc> {
    if let Some(store) = &provider.store {
        if let Some(doc) = store.load(id)? {
            return Ok(doc);
        }
    }
    if let Some(fetcher) = &provider.fetcher {
        if let Some(doc) = fetcher.fetch(id)? {
            return Ok(doc);
        }
    }
    Err(Error::FullTextNotFound(id.to_string()))
}
