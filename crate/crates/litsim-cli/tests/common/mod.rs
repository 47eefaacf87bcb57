//! Shared fixture builders for the CLI test targets.

use std::path::Path;

pub fn write_lines(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n")).unwrap();
}

pub fn paper_record(id: &str, title: &str, abstract_text: &str, date: &str) -> String {
    serde_json::json!({
        "id": id, "title": title, "abstract": abstract_text, "date": date,
        "authors": [], "categories": []
    })
    .to_string()
}

pub fn bench_record(qid: &str, text: &str, gt: &[&str]) -> String {
    serde_json::json!({
        "qid": qid, "text": text, "ground_truth": gt, "source": "LitSearch"
    })
    .to_string()
}

/// Ten documents: seven "alpha" docs with identical token statistics and
/// three "beta" docs, all dated inside the default window.
pub fn ten_doc_records() -> Vec<String> {
    let mut lines = Vec::new();
    for i in 1..=7 {
        lines.push(paper_record(
            &format!("1111.0000{i}"),
            "alpha",
            "filler one two",
            "2020-06-01",
        ));
    }
    for i in 1..=3 {
        lines.push(paper_record(
            &format!("2222.0000{i}"),
            "beta",
            "filler one two",
            "2020-06-01",
        ));
    }
    lines
}

/// Two-iteration mock script over the ten-doc fixture:
/// iteration 1 derives "alpha" (k=5) and "beta" (k=5); iteration 2 continues
/// the alpha node onto page 1. Assessments select a fixed hand-picked set.
pub fn two_iteration_script_json() -> String {
    serde_json::json!({
        "plans": [
            {"subqueries": [
                {"link_type": "derive", "source_id": 0, "text": "alpha", "target_k": 5},
                {"link_type": "derive", "source_id": 0, "text": "beta", "target_k": 5}
             ],
             "checklist": "c1", "experience_replay": "e1", "is_complete": false},
            {"subqueries": [
                {"link_type": "continue", "source_id": 1, "target_k": 5}
             ],
             "checklist": "c2", "experience_replay": "e2", "is_complete": false}
        ],
        "assessments": [
            {"selected": ["1111.00001", "1111.00003"], "reasons": {}, "overview": "o1"},
            {"selected": ["2222.00002"], "reasons": {}, "overview": "o2"},
            {"selected": ["1111.00006"], "reasons": {}, "overview": "o3"}
        ],
        "assessment_fallback": "select_none"
    })
    .to_string()
}

pub fn run_config_toml(output_dir: &str) -> String {
    format!(
        r#"corpus = "snapshot.jsonl"
benchmark = "bench.jsonl"
index = "index.json"
backend = "sparse"
mode = "abstract_only"
iterations = 5
output_dir = "{output_dir}"
parallelism = 1

[policy]
kind = "mock"
script = "script.json"
"#
    )
}

/// Runs the compiled binary in `dir` with the given arguments.
pub fn run_cli(dir: &Path, args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_litsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn assert_cli_ok(out: &std::process::Output) {
    assert!(
        out.status.success(),
        "cli failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Builds the standard 3-query fixture (corpus, benchmark, script, config)
/// inside `dir`, then ingests and indexes via the binary.
pub fn build_three_query_fixture(dir: &Path) {
    write_lines(&dir.join("records.jsonl"), &ten_doc_records());
    write_lines(
        &dir.join("bench.jsonl"),
        &[
            bench_record("q1", "alpha", &["1111.00001", "1111.00006"]),
            bench_record("q2", "beta", &["2222.00002"]),
            bench_record("q3", "alpha beta", &["1111.00002"]),
        ],
    );
    std::fs::write(dir.join("script.json"), two_iteration_script_json()).unwrap();
    std::fs::write(dir.join("run.toml"), run_config_toml("out")).unwrap();

    assert_cli_ok(&run_cli(
        dir,
        &[
            "ingest",
            "--input",
            "records.jsonl",
            "--snapshot",
            "snapshot.jsonl",
        ],
    ));
    assert_cli_ok(&run_cli(
        dir,
        &[
            "index",
            "--snapshot",
            "snapshot.jsonl",
            "--output",
            "index.json",
            "--backend",
            "sparse",
        ],
    ));
}
