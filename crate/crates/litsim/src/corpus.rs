//! Static paper corpus and benchmark query set.
//!
//! Everything downstream reads immutable [`CorpusSnapshot`]s built here.
//! Ingestion is single-writer; a built snapshot is safely shareable across
//! concurrent readers. The corpus file format is line-delimited JSON, one
//! record per line, with fields `{id, title, abstract, date, authors,
//! categories}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Canonical paper identifier: arXiv-style, version suffix stripped.
///
/// New-style ids (`1503.02045`) and old-style ids (`math/0101001`) are both
/// accepted; a trailing `v<digits>` is removed during normalization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(String);

impl PaperId {
    /// Wraps an already-normalized id. Use [`normalize_paper_id`] for raw input.
    pub fn new(id: impl Into<String>) -> Self {
        PaperId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PaperId {
    fn from(s: &str) -> Self {
        PaperId(s.to_string())
    }
}

/// Strips a trailing `v<digits>` version suffix and surrounding whitespace.
/// Returns `None` when the remainder is empty (invalid id).
pub fn normalize_paper_id(raw: &str) -> Option<PaperId> {
    let trimmed = raw.trim();
    let stripped = match trimmed.rfind('v') {
        Some(pos) if pos > 0 && trimmed[pos + 1..].chars().all(|c| c.is_ascii_digit()) && !trimmed[pos + 1..].is_empty() => {
            &trimmed[..pos]
        }
        _ => trimmed,
    };
    if stripped.is_empty() {
        None
    } else {
        Some(PaperId(stripped.to_string()))
    }
}

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: PaperId,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    /// Publication date, day precision.
    pub date: NaiveDate,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl Paper {
    /// Title and abstract joined for indexing and embedding.
    pub fn searchable_text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }
}

/// Inclusive validity window for publication dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateWindow { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl Default for DateWindow {
    /// 1990-01-01 ..= 2024-12-31, both ends inclusive.
    fn default() -> Self {
        DateWindow {
            start: NaiveDate::from_ymd_opt(1990, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
        }
    }
}

/// Build parameters and content digest of a snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// SHA-256 over the canonical serialization of all papers in id order
    /// plus the build parameters. Identical inputs + parameters yield an
    /// identical digest.
    pub digest: String,
    pub window: DateWindow,
    pub paper_count: usize,
}

/// Immutable corpus snapshot: id-ordered papers plus their manifest.
#[derive(Debug, Clone)]
pub struct CorpusSnapshot {
    papers: BTreeMap<PaperId, Paper>,
    manifest: Manifest,
}

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

impl CorpusSnapshot {
    fn build(papers: BTreeMap<PaperId, Paper>, window: DateWindow) -> Self {
        let digest = snapshot_digest(&papers, window);
        let manifest = Manifest {
            format_version: SNAPSHOT_FORMAT_VERSION,
            digest,
            window,
            paper_count: papers.len(),
        };
        CorpusSnapshot { papers, manifest }
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn digest(&self) -> &str {
        &self.manifest.digest
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &PaperId) -> Option<&Paper> {
        self.papers.get(id)
    }

    pub fn contains(&self, id: &PaperId) -> bool {
        self.papers.contains_key(id)
    }

    /// Papers in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Paper> {
        self.papers.values()
    }

    /// Full-scan assertion of the per-paper invariants: unique non-empty id,
    /// non-empty abstract, date inside the window.
    pub fn validate(&self) -> Result<()> {
        for (key, paper) in &self.papers {
            if paper.id.as_str().is_empty() {
                return Err(Error::Corpus("empty paper id".into()));
            }
            if key != &paper.id {
                return Err(Error::Corpus(format!("key/id mismatch for {}", paper.id)));
            }
            if paper.abstract_text.trim().is_empty() {
                return Err(Error::Corpus(format!("{}: empty abstract", paper.id)));
            }
            if !self.manifest.window.contains(paper.date) {
                return Err(Error::Corpus(format!(
                    "{}: date {} outside window",
                    paper.id, paper.date
                )));
            }
        }
        Ok(())
    }

    /// Serializes the snapshot as line-delimited JSON: a header line with the
    /// manifest followed by one paper per line in id order.
    pub fn write_to<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.manifest)?;
        w.write_all(b"\n")?;
        for paper in self.papers.values() {
            serde_json::to_writer(&mut w, paper)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Loads a snapshot written by [`CorpusSnapshot::write_to`], recomputing
    /// and verifying the content digest.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Corpus("empty snapshot file".into()))??;
        let manifest: Manifest = serde_json::from_str(&header)?;
        if manifest.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(Error::Corpus(format!(
                "unsupported snapshot format version {}",
                manifest.format_version
            )));
        }
        let mut papers = BTreeMap::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let paper: Paper = serde_json::from_str(&line)?;
            papers.insert(paper.id.clone(), paper);
        }
        let rebuilt = CorpusSnapshot::build(papers, manifest.window);
        if rebuilt.manifest.digest != manifest.digest {
            return Err(Error::Corpus(format!(
                "snapshot digest mismatch: header {} vs content {}",
                manifest.digest, rebuilt.manifest.digest
            )));
        }
        Ok(rebuilt)
    }
}

fn snapshot_digest(papers: &BTreeMap<PaperId, Paper>, window: DateWindow) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!(
        "v{} window {}..={}\n",
        SNAPSHOT_FORMAT_VERSION, window.start, window.end
    ));
    for paper in papers.values() {
        hasher.update(serde_json::to_string(paper).expect("paper serializes"));
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Per-reason exclusion counts for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub invalid_id: usize,
    pub empty_abstract: usize,
    pub invalid_date: usize,
    pub date_out_of_window: usize,
}

/// A line that failed to parse; ingestion continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    pub error: String,
}

/// Outcome summary of [`ingest`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: usize,
    pub valid: usize,
    pub duplicates_merged: usize,
    pub excluded: ExclusionCounts,
    pub malformed: Vec<MalformedLine>,
}

#[derive(Deserialize)]
struct RawPaperRecord {
    id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    date: String,
    #[serde(default)]
    authors: Vec<String>,
    #[serde(default)]
    categories: Vec<String>,
}

/// Accepts an ISO-8601 date or datetime, truncated to day precision.
pub fn parse_record_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.date());
        }
    }
    None
}

/// Builds a [`CorpusSnapshot`] from a stream of line-delimited JSON records.
///
/// Duplicates (same version-stripped id) are merged keeping the record with
/// the longest abstract; equal lengths keep the record with the
/// lexicographically smaller raw-line digest, so the result is independent of
/// record order. Malformed lines are recorded with their line number and
/// skipped. Zero valid papers is a hard error.
pub fn ingest<R: BufRead>(reader: R, window: DateWindow) -> Result<(CorpusSnapshot, IngestReport)> {
    let mut report = IngestReport::default();
    // id -> (paper, abstract length in chars, raw line digest)
    let mut kept: BTreeMap<PaperId, (Paper, usize, String)> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines_read += 1;

        let raw: RawPaperRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.malformed.push(MalformedLine {
                    line: line_no,
                    error: e.to_string(),
                });
                continue;
            }
        };

        let id = match normalize_paper_id(&raw.id) {
            Some(id) => id,
            None => {
                report.excluded.invalid_id += 1;
                continue;
            }
        };
        if raw.abstract_text.trim().is_empty() {
            report.excluded.empty_abstract += 1;
            continue;
        }
        let date = match parse_record_date(&raw.date) {
            Some(d) => d,
            None => {
                report.excluded.invalid_date += 1;
                continue;
            }
        };
        if !window.contains(date) {
            report.excluded.date_out_of_window += 1;
            continue;
        }

        let paper = Paper {
            id: id.clone(),
            title: raw.title,
            abstract_text: raw.abstract_text,
            date,
            authors: raw.authors,
            categories: raw.categories,
        };
        let abs_len = paper.abstract_text.chars().count();
        let line_digest = hex::encode(Sha256::digest(line.as_bytes()));

        match kept.get(&id) {
            None => {
                kept.insert(id, (paper, abs_len, line_digest));
            }
            Some((_, cur_len, cur_digest)) => {
                report.duplicates_merged += 1;
                let wins = abs_len > *cur_len || (abs_len == *cur_len && line_digest < *cur_digest);
                if wins {
                    kept.insert(id, (paper, abs_len, line_digest));
                }
            }
        }
    }

    if kept.is_empty() {
        return Err(Error::EmptyIngest(Box::new(report)));
    }
    report.valid = kept.len();
    let papers = kept.into_iter().map(|(id, (p, _, _))| (id, p)).collect();
    Ok((CorpusSnapshot::build(papers, window), report))
}

/// Origin of a benchmark query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuerySource {
    AutoScholar,
    RealScholar,
    LitSearch,
    Other,
}

/// One research query with expert-annotated ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkQuery {
    pub qid: String,
    pub text: String,
    /// Inclusive upper bound on candidate publication dates.
    pub date_constraint: NaiveDate,
    /// Ground-truth ids that resolve in the corpus snapshot.
    pub ground_truth: BTreeSet<PaperId>,
    pub source: QuerySource,
}

/// A ground-truth id that did not resolve in the snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedGroundTruth {
    pub qid: String,
    pub paper_id: PaperId,
}

/// Summary statistics over the usable queries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchmarkStats {
    pub query_count: usize,
    pub usable_count: usize,
    /// Mean resolvable ground-truth papers per usable query.
    pub avg_ground_truth: f64,
    /// Mean query length in characters over usable queries.
    pub avg_query_chars: f64,
}

/// Outcome of [`load_benchmark`]: nothing is silently dropped.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchmarkLoadReport {
    pub unresolved: Vec<UnresolvedGroundTruth>,
    /// Queries with zero resolvable ground truth, excluded from metric
    /// denominators and from the returned query list.
    pub unusable_qids: Vec<String>,
    pub malformed: Vec<MalformedLine>,
    pub stats: BenchmarkStats,
}

#[derive(Deserialize)]
struct RawBenchmarkRecord {
    qid: String,
    text: String,
    #[serde(default)]
    date_constraint: Option<String>,
    ground_truth: Vec<String>,
    #[serde(default)]
    source: Option<String>,
}

fn parse_source(raw: Option<&str>) -> QuerySource {
    match raw.map(str::trim) {
        Some("AutoScholar") => QuerySource::AutoScholar,
        Some("RealScholar") => QuerySource::RealScholar,
        Some("LitSearch") => QuerySource::LitSearch,
        _ => QuerySource::Other,
    }
}

/// Loads the benchmark file (line-delimited JSON, fields `{qid, text,
/// date_constraint?, ground_truth, source}`) against a snapshot.
///
/// Queries without an explicit date constraint receive the maximum
/// publication date over their resolvable ground truth. Unresolved ids are
/// listed in the report; queries with zero resolvable ground truth are
/// flagged unusable.
pub fn load_benchmark<R: BufRead>(
    reader: R,
    snapshot: &CorpusSnapshot,
) -> Result<(Vec<BenchmarkQuery>, BenchmarkLoadReport)> {
    let mut report = BenchmarkLoadReport::default();
    let mut queries = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawBenchmarkRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.malformed.push(MalformedLine {
                    line: line_no,
                    error: e.to_string(),
                });
                continue;
            }
        };
        report.stats.query_count += 1;

        let mut resolved = BTreeSet::new();
        for gt in &raw.ground_truth {
            match normalize_paper_id(gt) {
                Some(id) if snapshot.contains(&id) => {
                    resolved.insert(id);
                }
                Some(id) => report.unresolved.push(UnresolvedGroundTruth {
                    qid: raw.qid.clone(),
                    paper_id: id,
                }),
                None => report.unresolved.push(UnresolvedGroundTruth {
                    qid: raw.qid.clone(),
                    paper_id: PaperId::new(gt.trim()),
                }),
            }
        }
        if resolved.is_empty() {
            report.unusable_qids.push(raw.qid);
            continue;
        }

        let explicit = match raw.date_constraint.as_deref() {
            Some(s) => match parse_record_date(s) {
                Some(d) => Some(d),
                None => {
                    return Err(Error::Benchmark(format!(
                        "{}: unparseable date_constraint {s:?}",
                        raw.qid
                    )))
                }
            },
            None => None,
        };
        let date_constraint = explicit.unwrap_or_else(|| {
            resolved
                .iter()
                .filter_map(|id| snapshot.get(id).map(|p| p.date))
                .max()
                .expect("resolved set is non-empty")
        });

        report.stats.usable_count += 1;
        report.stats.avg_ground_truth += resolved.len() as f64;
        report.stats.avg_query_chars += raw.text.chars().count() as f64;
        queries.push(BenchmarkQuery {
            qid: raw.qid,
            text: raw.text,
            date_constraint,
            ground_truth: resolved,
            source: parse_source(raw.source.as_deref()),
        });
    }

    if report.stats.usable_count > 0 {
        let n = report.stats.usable_count as f64;
        report.stats.avg_ground_truth /= n;
        report.stats.avg_query_chars /= n;
    }
    Ok((queries, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, title: &str, abs: &str, date: &str) -> String {
        serde_json::json!({
            "id": id, "title": title, "abstract": abs, "date": date,
            "authors": ["A. Author"], "categories": ["cs.IR"]
        })
        .to_string()
    }

    fn ingest_str(s: &str) -> Result<(CorpusSnapshot, IngestReport)> {
        ingest(s.as_bytes(), DateWindow::default())
    }

    #[test]
    fn version_suffixes_merge_to_one_paper() {
        let input = [
            record("1503.02045v1", "t", "short", "2015-03-06"),
            record("1503.02045v2", "t", "a longer abstract", "2015-03-06"),
        ]
        .join("\n");
        let (snap, report) = ingest_str(&input).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(report.duplicates_merged, 1);
        let paper = snap.get(&PaperId::new("1503.02045")).unwrap();
        assert_eq!(paper.abstract_text, "a longer abstract");
    }

    #[test]
    fn old_style_ids_pass_through() {
        let input = record("math/0101001", "t", "abs", "2001-01-05");
        let (snap, _) = ingest_str(&input).unwrap();
        assert!(snap.contains(&PaperId::new("math/0101001")));
    }

    #[test]
    fn empty_abstract_excluded() {
        let input = [
            record("1111.0001", "t", "", "2012-01-01"),
            record("1111.0002", "t", "ok", "2012-01-01"),
        ]
        .join("\n");
        let (snap, report) = ingest_str(&input).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(report.excluded.empty_abstract, 1);
    }

    #[test]
    fn out_of_window_date_counted() {
        // 5 valid records, 1 dated 1985.
        let mut lines: Vec<String> = (1..=5)
            .map(|i| record(&format!("2001.0000{i}"), "t", "abs", "2020-01-01"))
            .collect();
        lines.push(record("8501.00001", "t", "abs", "1985-06-01"));
        let (snap, report) = ingest_str(&lines.join("\n")).unwrap();
        assert_eq!(snap.len(), 5);
        assert_eq!(report.excluded.date_out_of_window, 1);
    }

    #[test]
    fn malformed_line_recorded_and_skipped() {
        let input = format!("{}\nnot json\n{}", record("1.1", "t", "a", "2010-01-01"), record("1.2", "t", "a", "2010-01-01"));
        let (snap, report) = ingest_str(&input).unwrap();
        assert_eq!(snap.len(), 2);
        assert_eq!(report.malformed.len(), 1);
        assert_eq!(report.malformed[0].line, 2);
    }

    #[test]
    fn zero_valid_papers_is_hard_error() {
        assert!(ingest_str(&record("x", "t", "", "2010-01-01")).is_err());
    }

    #[test]
    fn ingest_is_byte_deterministic() {
        let input = [
            record("1503.02045", "t1", "abs1", "2015-03-06"),
            record("1601.00001", "t2", "abs2", "2016-01-01"),
        ]
        .join("\n");
        let (a, _) = ingest_str(&input).unwrap();
        let (b, _) = ingest_str(&input).unwrap();
        assert_eq!(a.digest(), b.digest());

        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_to(&mut buf_a).unwrap();
        b.write_to(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn dedup_is_order_insensitive() {
        let r1 = record("1503.02045", "t", "same length!", "2015-03-06");
        let r2 = record("1503.02045", "u", "same length!", "2015-03-07");
        let (a, _) = ingest_str(&format!("{r1}\n{r2}")).unwrap();
        let (b, _) = ingest_str(&format!("{r2}\n{r1}")).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(
            a.get(&PaperId::new("1503.02045")).unwrap().title,
            b.get(&PaperId::new("1503.02045")).unwrap().title,
        );
    }

    #[test]
    fn datetime_truncates_to_day() {
        let input = record("1503.02045", "t", "abs", "2015-03-06T14:30:00Z");
        let (snap, _) = ingest_str(&input).unwrap();
        let p = snap.get(&PaperId::new("1503.02045")).unwrap();
        assert_eq!(p.date, NaiveDate::from_ymd_opt(2015, 3, 6).unwrap());
    }

    #[test]
    fn snapshot_roundtrip_verifies_digest() {
        let input = [
            record("1503.02045", "t1", "abs1", "2015-03-06"),
            record("1601.00001", "t2", "abs2", "2016-01-01"),
        ]
        .join("\n");
        let (snap, _) = ingest_str(&input).unwrap();
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let loaded = CorpusSnapshot::read_from(buf.as_slice()).unwrap();
        assert_eq!(loaded.digest(), snap.digest());
        loaded.validate().unwrap();

        // Corrupting a paper line must be caught by digest verification.
        let text = String::from_utf8(buf).unwrap();
        let tampered = text.replace("abs1", "absX");
        assert!(CorpusSnapshot::read_from(tampered.as_bytes()).is_err());
    }

    fn bench_record(qid: &str, text: &str, constraint: Option<&str>, gt: &[&str]) -> String {
        let mut v = serde_json::json!({
            "qid": qid, "text": text, "ground_truth": gt, "source": "LitSearch"
        });
        if let Some(c) = constraint {
            v["date_constraint"] = serde_json::json!(c);
        }
        v.to_string()
    }

    fn small_snapshot() -> CorpusSnapshot {
        let input = [
            record("1905.00001", "paper a", "abs", "2019-05-01"),
            record("2103.00002", "paper b", "abs", "2021-03-02"),
        ]
        .join("\n");
        ingest_str(&input).unwrap().0
    }

    #[test]
    fn missing_constraint_gets_max_ground_truth_date() {
        let snap = small_snapshot();
        let line = bench_record("q1", "find things", None, &["1905.00001", "2103.00002"]);
        let (queries, _) = load_benchmark(line.as_bytes(), &snap).unwrap();
        assert_eq!(
            queries[0].date_constraint,
            NaiveDate::from_ymd_opt(2021, 3, 2).unwrap()
        );
    }

    #[test]
    fn unresolved_ids_listed_never_dropped() {
        let snap = small_snapshot();
        let line = bench_record("q1", "x", Some("2022-01-01"), &["1905.00001", "9999.99999"]);
        let (queries, report) = load_benchmark(line.as_bytes(), &snap).unwrap();
        assert_eq!(queries[0].ground_truth.len(), 1);
        assert_eq!(report.unresolved.len(), 1);
        assert_eq!(report.unresolved[0].paper_id, PaperId::new("9999.99999"));
    }

    #[test]
    fn zero_resolvable_ground_truth_is_unusable() {
        let snap = small_snapshot();
        let line = bench_record("q_bad", "x", Some("2022-01-01"), &["9999.99999"]);
        let (queries, report) = load_benchmark(line.as_bytes(), &snap).unwrap();
        assert!(queries.is_empty());
        assert_eq!(report.unusable_qids, vec!["q_bad".to_string()]);
    }

    #[test]
    fn stats_cover_gt_size_and_query_length() {
        let snap = small_snapshot();
        let lines = [
            bench_record("q1", "ab", None, &["1905.00001"]),
            bench_record("q2", "abcd", None, &["1905.00001", "2103.00002"]),
        ]
        .join("\n");
        let (_, report) = load_benchmark(lines.as_bytes(), &snap).unwrap();
        assert_eq!(report.stats.usable_count, 2);
        assert!((report.stats.avg_ground_truth - 1.5).abs() < 1e-12);
        assert!((report.stats.avg_query_chars - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_ids_are_version_stripped() {
        let snap = small_snapshot();
        let line = bench_record("q1", "x", None, &["1905.00001v3"]);
        let (queries, report) = load_benchmark(line.as_bytes(), &snap).unwrap();
        assert!(queries[0].ground_truth.contains(&PaperId::new("1905.00001")));
        assert!(report.unresolved.is_empty());
    }
}
