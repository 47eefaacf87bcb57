//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use litsim::config::{PolicyConfig, RunConfig};
use litsim::corpus::{
    self, parse_record_date, BenchmarkQuery, CorpusSnapshot, DateWindow, PaperId,
};
use litsim::metrics::{self, BenchmarkReport, MetricsRow};
use litsim::policy::{
    HeuristicPolicy, HttpChatClient, LlmPolicy, LlmPolicyConfig, MockPolicy, MockScript, Policy,
};
use litsim::retrieval::{
    build_dense_index, build_sparse_index, peek_index_header, read_dense_index, read_sparse_index,
    write_dense_index, write_sparse_index, Backend, BackendKind, Bm25Params, Embedder,
    HashEmbedder,
};
use litsim::workflow::{
    read_trajectory, read_trajectory_header, run_batch, with_parallelism, write_trajectory,
    SearchEnv, Trajectory,
};
use litsim::assess::{FullTextProvider, HttpFetcher, LocalStore};

use crate::{IngestArgs, IndexArgs, ReportArgs, RunArgs};

const OK: i32 = 0;
const TOTAL_FAILURE: i32 = 2;

fn open_reader(path: &str) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {path}"))?,
    ))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn parse_date_arg(raw: &str, what: &str) -> Result<chrono::NaiveDate> {
    parse_record_date(raw).ok_or_else(|| anyhow!("{what}: unparseable date {raw:?}"))
}

pub fn ingest(args: IngestArgs) -> Result<i32> {
    let window = DateWindow::new(
        parse_date_arg(&args.window_start, "--window-start")?,
        parse_date_arg(&args.window_end, "--window-end")?,
    );
    let reader = open_reader(&args.input)?;
    match corpus::ingest(reader, window) {
        Ok((snapshot, report)) => {
            let mut w = create_writer(Path::new(&args.snapshot))?;
            snapshot.write_to(&mut w)?;
            w.flush()?;
            if let Some(report_path) = &args.report {
                let mut w = create_writer(Path::new(report_path))?;
                serde_json::to_writer_pretty(&mut w, &report)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
            println!(
                "ingested {} papers ({} duplicates merged, {} malformed lines)",
                report.valid,
                report.duplicates_merged,
                report.malformed.len()
            );
            println!("snapshot digest {}", snapshot.digest());
            Ok(OK)
        }
        Err(litsim::Error::EmptyIngest(report)) => {
            // Hard failure still writes the report so the exclusions are
            // inspectable.
            if let Some(report_path) = &args.report {
                let mut w = create_writer(Path::new(report_path))?;
                serde_json::to_writer_pretty(&mut w, &*report)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
            Err(anyhow!("no valid papers after ingestion"))
        }
        Err(e) => Err(e.into()),
    }
}

fn load_snapshot(path: &str) -> Result<CorpusSnapshot> {
    let snapshot = CorpusSnapshot::read_from(open_reader(path)?)
        .with_context(|| format!("loading snapshot {path}"))?;
    snapshot.validate()?;
    Ok(snapshot)
}

pub fn index(args: IndexArgs) -> Result<i32> {
    let snapshot = load_snapshot(&args.snapshot)?;
    let out = Path::new(&args.output);
    match args.backend.as_str() {
        "sparse" => {
            let index = build_sparse_index(&snapshot, Bm25Params { k1: args.k1, b: args.b })?;
            let mut w = create_writer(out)?;
            write_sparse_index(&index, &mut w)?;
            w.flush()?;
            println!("sparse index over {} docs, digest {}", index.doc_count(), index.digest());
        }
        "dense" => {
            let embedder = HashEmbedder::new(args.dim);
            let index = build_dense_index(&snapshot, &embedder)?;
            let mut w = create_writer(out)?;
            write_dense_index(&index, &mut w)?;
            w.flush()?;
            println!(
                "dense index over {} docs (embedder {}), digest {}",
                index.doc_count(),
                index.embedder_id(),
                index.digest()
            );
        }
        other => bail!("unknown backend {other}"),
    }
    Ok(OK)
}

fn apply_overrides(config: &mut RunConfig, args: &RunArgs) -> Result<()> {
    if let Some(v) = &args.corpus {
        config.corpus = v.clone();
    }
    if let Some(v) = &args.benchmark {
        config.benchmark = v.clone();
    }
    if let Some(v) = &args.index {
        config.index = v.clone();
    }
    if let Some(v) = &args.backend {
        config.backend = match v.as_str() {
            "sparse" => BackendKind::Sparse,
            _ => BackendKind::Dense,
        };
    }
    if let Some(v) = &args.mode {
        config.mode = match v.as_str() {
            "adaptive" => litsim::policy::AssessMode::Adaptive,
            _ => litsim::policy::AssessMode::AbstractOnly,
        };
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.parallelism {
        config.parallelism = v;
    }
    if let Some(v) = &args.output_dir {
        config.output_dir = v.clone();
    }
    Ok(())
}

fn build_backend(config: &RunConfig, snapshot: &CorpusSnapshot) -> Result<Backend> {
    let reader = open_reader(&config.index)?;
    let header = peek_index_header(open_reader(&config.index)?)?;
    if header.kind != config.backend {
        bail!(
            "index file {} holds a {} index but the run wants {}",
            config.index,
            header.kind,
            config.backend
        );
    }
    match config.backend {
        BackendKind::Sparse => {
            let index = read_sparse_index(reader)?;
            if index.snapshot_digest() != snapshot.digest() {
                bail!(
                    "index was built over snapshot {} but the loaded snapshot is {}",
                    index.snapshot_digest(),
                    snapshot.digest()
                );
            }
            Ok(Backend::Sparse(Arc::new(index)))
        }
        BackendKind::Dense => {
            let index = read_dense_index(reader)?;
            if index.snapshot_digest() != snapshot.digest() {
                bail!(
                    "index was built over snapshot {} but the loaded snapshot is {}",
                    index.snapshot_digest(),
                    snapshot.digest()
                );
            }
            let embedder = HashEmbedder::new(config.embedder_dim);
            if embedder.id() != index.embedder_id() {
                bail!(
                    "configured embedder {} does not match index embedder {}",
                    embedder.id(),
                    index.embedder_id()
                );
            }
            Ok(Backend::Dense {
                index: Arc::new(index),
                embedder: Arc::new(embedder),
            })
        }
    }
}

fn build_fulltext(config: &RunConfig) -> FullTextProvider {
    let store = config
        .fulltext
        .store_dir
        .as_ref()
        .map(|dir| LocalStore::new(dir.clone()));
    let fetcher = if config.fulltext.fetch_enabled {
        config
            .fulltext
            .fetch_url_template
            .as_ref()
            .map(|tpl| HttpFetcher::new(tpl.clone(), std::time::Duration::from_secs(30)))
    } else {
        None
    };
    FullTextProvider::new(store, fetcher)
}

enum PolicyFactory {
    Mock(MockScript),
    Heuristic { target_k: usize, min_shared_tokens: usize },
    Http {
        endpoint: String,
        model: String,
        api_key: Option<String>,
        llm: LlmPolicyConfig,
    },
}

impl PolicyFactory {
    fn from_config(config: &RunConfig) -> Result<Self> {
        Ok(match &config.policy {
            PolicyConfig::Mock { script } => {
                let raw = std::fs::read_to_string(script)
                    .with_context(|| format!("reading mock script {script}"))?;
                PolicyFactory::Mock(serde_json::from_str(&raw)?)
            }
            PolicyConfig::Heuristic {
                target_k,
                min_shared_tokens,
            } => PolicyFactory::Heuristic {
                target_k: *target_k,
                min_shared_tokens: *min_shared_tokens,
            },
            PolicyConfig::Http {
                endpoint,
                model,
                auth_env,
            } => PolicyFactory::Http {
                endpoint: endpoint.clone(),
                model: model.clone(),
                api_key: std::env::var(auth_env).ok(),
                llm: LlmPolicyConfig {
                    max_parse_retries: config.max_parse_retries,
                    decoding: config.decoding,
                    retry: config.retry,
                    max_results_per_request: config.max_results_per_request,
                    selector_recipe: litsim::policy::DEFAULT_SELECTOR_RECIPE.to_string(),
                    strict_subquery_bounds: config.strict_subquery_bounds,
                },
            },
        })
    }

    fn make(&self) -> Box<dyn Policy> {
        match self {
            PolicyFactory::Mock(script) => Box::new(MockPolicy::new(script.clone())),
            PolicyFactory::Heuristic {
                target_k,
                min_shared_tokens,
            } => Box::new(HeuristicPolicy::new(*target_k, *min_shared_tokens)),
            PolicyFactory::Http {
                endpoint,
                model,
                api_key,
                llm,
            } => Box::new(LlmPolicy::new(
                HttpChatClient::new(
                    endpoint.clone(),
                    model.clone(),
                    api_key.clone(),
                    std::time::Duration::from_secs(120),
                ),
                llm.clone(),
            )),
        }
    }
}

fn trajectory_file_name(qid: &str) -> String {
    let sanitized: String = qid
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{sanitized}.jsonl")
}

/// Full JSON report written by both `run` and `report`.
#[derive(serde::Serialize)]
struct ReportFile<'a> {
    format_version: u32,
    config_digest: String,
    baseline: bool,
    query_count: usize,
    excluded_queries: usize,
    failures: &'a [(String, String)],
    aggregate: &'a BenchmarkReport,
    per_query: &'a [MetricsRow],
}

#[allow(clippy::too_many_arguments)]
fn write_reports(
    out_dir: &Path,
    config_digest: &str,
    baseline: bool,
    excluded: usize,
    failures: &[(String, String)],
    rows: &[MetricsRow],
    aggregate: &BenchmarkReport,
) -> Result<()> {
    let report = ReportFile {
        format_version: 1,
        config_digest: config_digest.to_string(),
        baseline,
        query_count: rows.len(),
        excluded_queries: excluded,
        failures,
        aggregate,
        per_query: rows,
    };
    let mut w = create_writer(&out_dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let mut w = create_writer(&out_dir.join("report.txt"))?;
    w.write_all(metrics::render_text_table(aggregate).as_bytes())?;
    w.flush()?;

    let mut w = create_writer(&out_dir.join("curves.csv"))?;
    w.write_all(metrics::curves_csv(rows).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn metric_rows(
    trajectories: &[Trajectory],
    gt_by_qid: &BTreeMap<String, std::collections::BTreeSet<PaperId>>,
) -> Result<(Vec<MetricsRow>, usize)> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for t in trajectories {
        match gt_by_qid.get(&t.qid) {
            Some(gt) if !gt.is_empty() => {
                rows.push(metrics::per_iteration(t, gt, t.config.rank_cutoff)?);
            }
            _ => {
                log::warn!("{}: no usable ground truth, excluded from metrics", t.qid);
                skipped += 1;
            }
        }
    }
    Ok((rows, skipped))
}

pub fn run(args: RunArgs) -> Result<i32> {
    let raw = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config))?;
    let mut config: RunConfig = toml::from_str(&raw).context("parsing config TOML")?;
    apply_overrides(&mut config, &args)?;
    config.validate()?;
    let config_digest = config.digest();

    let snapshot = Arc::new(load_snapshot(&config.corpus)?);
    let (queries, bench_report) = corpus::load_benchmark(open_reader(&config.benchmark)?, &snapshot)?;
    if !bench_report.unresolved.is_empty() {
        log::warn!(
            "{} unresolved ground-truth ids across {} queries",
            bench_report.unresolved.len(),
            bench_report.stats.query_count
        );
    }
    if queries.is_empty() {
        bail!("benchmark holds no usable queries");
    }
    let backend = build_backend(&config, &snapshot)?;
    let env = SearchEnv::new(snapshot, backend).with_fulltext(build_fulltext(&config));
    let factory = PolicyFactory::from_config(&config)?;

    let trajectory_dir = Path::new(&config.output_dir).join("trajectories");
    std::fs::create_dir_all(&trajectory_dir)?;

    // Resume: split queries into already-done (matching digest) and pending.
    let mut done: BTreeMap<String, Trajectory> = BTreeMap::new();
    let mut pending: Vec<BenchmarkQuery> = Vec::new();
    for query in &queries {
        let path = trajectory_dir.join(trajectory_file_name(&query.qid));
        if args.resume && path.exists() {
            let header = read_trajectory_header(open_reader(path.to_str().unwrap())?)?;
            if header.config_digest == config_digest && header.baseline == args.baseline {
                let trajectory = read_trajectory(open_reader(path.to_str().unwrap())?)?;
                done.insert(query.qid.clone(), trajectory);
                continue;
            }
            log::warn!("{}: existing trajectory has a different config, recomputing", query.qid);
        }
        pending.push(query.clone());
    }
    let resumed = done.len();

    let outcome = with_parallelism(config.parallelism, || {
        run_batch(&pending, &env, |_q| factory.make(), &config, args.baseline)
    });
    for trajectory in &outcome.trajectories {
        let path = trajectory_dir.join(trajectory_file_name(&trajectory.qid));
        let mut w = create_writer(&path)?;
        write_trajectory(trajectory, &mut w)?;
        w.flush()?;
    }
    if !outcome.failures.is_empty() {
        for (qid, error) in &outcome.failures {
            log::error!("{qid}: {error}");
        }
    }
    if outcome.trajectories.is_empty() && done.is_empty() {
        eprintln!("error: every query failed");
        return Ok(TOTAL_FAILURE);
    }

    // Metric rows in benchmark order, mixing resumed and fresh trajectories.
    let mut by_qid: BTreeMap<String, Trajectory> = done;
    for t in outcome.trajectories {
        by_qid.insert(t.qid.clone(), t);
    }
    let ordered: Vec<Trajectory> = queries
        .iter()
        .filter_map(|q| by_qid.get(&q.qid).cloned())
        .collect();
    let gt_by_qid: BTreeMap<String, std::collections::BTreeSet<PaperId>> = queries
        .iter()
        .map(|q| (q.qid.clone(), q.ground_truth.clone()))
        .collect();
    let (rows, no_gt) = metric_rows(&ordered, &gt_by_qid)?;
    let excluded = bench_report.unusable_qids.len() + no_gt;
    let aggregate = metrics::aggregate(&rows, excluded)?;
    write_reports(
        Path::new(&config.output_dir),
        &config_digest,
        args.baseline,
        excluded,
        &outcome.failures,
        &rows,
        &aggregate,
    )?;

    println!(
        "ran {} queries ({} resumed, {} failed, {} excluded)",
        ordered.len(),
        resumed,
        outcome.failures.len(),
        excluded
    );
    print!("{}", metrics::render_text_table(&aggregate));
    Ok(OK)
}

pub fn report(args: ReportArgs) -> Result<i32> {
    let dir = Path::new(&args.trajectories);
    if !dir.is_dir() {
        bail!("trajectory directory {} does not exist", dir.display());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no trajectory files in {}", dir.display());
    }

    let mut trajectories = Vec::with_capacity(paths.len());
    for path in &paths {
        let reader = BufReader::new(File::open(path)?);
        trajectories.push(read_trajectory(reader).with_context(|| format!("{}", path.display()))?);
    }

    // Ground truth comes from the benchmark + snapshot recorded in the run
    // config unless overridden.
    let run_config = &trajectories[0].config;
    let snapshot_path = args.snapshot.clone().unwrap_or_else(|| run_config.corpus.clone());
    let benchmark_path = args
        .benchmark
        .clone()
        .unwrap_or_else(|| run_config.benchmark.clone());
    let snapshot = load_snapshot(&snapshot_path)?;
    let (queries, bench_report) = corpus::load_benchmark(open_reader(&benchmark_path)?, &snapshot)?;
    let gt_by_qid: BTreeMap<String, std::collections::BTreeSet<PaperId>> = queries
        .iter()
        .map(|q| (q.qid.clone(), q.ground_truth.clone()))
        .collect();

    let digests: std::collections::BTreeSet<&str> = trajectories
        .iter()
        .map(|t| t.config_digest.as_str())
        .collect();
    let config_digest = if digests.len() == 1 {
        digests.iter().next().unwrap().to_string()
    } else {
        "mixed".to_string()
    };
    let baseline = trajectories.iter().all(|t| t.baseline);

    let (rows, no_gt) = metric_rows(&trajectories, &gt_by_qid)?;
    let excluded = bench_report.unusable_qids.len() + no_gt;
    let aggregate = metrics::aggregate(&rows, excluded)?;
    write_reports(
        Path::new(&args.output_dir),
        &config_digest,
        baseline,
        excluded,
        &[],
        &rows,
        &aggregate,
    )?;
    println!(
        "recomputed metrics for {} trajectories ({} excluded)",
        rows.len(),
        excluded
    );
    print!("{}", metrics::render_text_table(&aggregate));
    Ok(OK)
}
