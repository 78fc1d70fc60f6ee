mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use common::fixture;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(dir: &Path, args: &[&str]) -> Run {
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(env!("CARGO_BIN_EXE_leakprobe"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    Run {
        code: status.code().unwrap(),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn ok(dir: &Path, args: &[&str]) -> Run {
    let r = run(dir, args);
    assert_eq!(r.code, 0, "{args:?}\n{}", r.stderr);
    r
}

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

fn jsonl(path: PathBuf) -> Vec<Value> {
    std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn records<'a>(lines: &'a [Value], tag: &str) -> Vec<&'a Value> {
    lines.iter().filter(|v| v["record"] == tag).collect()
}

fn guess_report(dir: &Path, model: &str, extra: &[&str]) -> Value {
    let mut args = vec![
        "guess",
        "--benchmark",
        &fx("benchmark.jsonl"),
        "--schema",
        "multichoice",
        "--prefilter",
        "general",
        "--mode",
        "multichoice",
        "--model",
        model,
        "--profiles",
        &fx("profiles.toml"),
        "--out",
        "g.jsonl",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(dir, &refs);
    ok(dir, &["report", "--in", "g.jsonl", "--out", "r.json"]);
    serde_json::from_str(&std::fs::read_to_string(dir.join("r.json")).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(dir.path(), &["--help"]);
    assert!(r.stdout.contains("guess"));
    let r = ok(dir.path(), &["--version"]);
    assert!(r.stdout.contains(leakprobe::VERSION));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &[]).code, 1);
    assert_eq!(run(d, &["index", "search", "--query", "x"]).code, 1);
    assert_eq!(run(d, &["frobnicate"]).code, 1);
    let r = run(
        d,
        &[
            "guess",
            "--benchmark",
            &fx("truthfulqa.jsonl"),
            "--mode",
            "multichoice",
            "--hint",
            "url",
            "--model",
            "memorizer",
            "--profiles",
            &fx("profiles.toml"),
            "--out",
            "g.jsonl",
        ],
    );
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("--hint"));
    let r = run(
        d,
        &[
            "filter",
            "--benchmark",
            &fx("benchmark.jsonl"),
            "--kind",
            "general",
            "--rouge-threshold",
            "1.5",
            "--decisions-out",
            "d.jsonl",
        ],
    );
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r = run(
        d,
        &["index", "search", "--idx", "missing.idx", "--query", "x"],
    );
    assert_eq!(r.code, 2);
    assert!(
        r.stderr.contains("loading index missing.idx"),
        "{}",
        r.stderr
    );
    let r = run(
        d,
        &[
            "guess",
            "--benchmark",
            &fx("benchmark.jsonl"),
            "--schema",
            "multichoice",
            "--mode",
            "multichoice",
            "--model",
            "nope",
            "--profiles",
            &fx("profiles.toml"),
            "--out",
            "g.jsonl",
        ],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn index_build_and_search() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r = ok(
        d,
        &[
            "--log-level",
            "info",
            "index",
            "build",
            "--corpus",
            &fx("corpus.jsonl"),
            "--out",
            "c.idx",
        ],
    );
    assert!(
        r.stderr
            .lines()
            .any(|l| l.starts_with("level=INFO target=")),
        "{}",
        r.stderr
    );
    let r = ok(
        d,
        &[
            "index",
            "search",
            "--idx",
            "c.idx",
            "--query",
            "Where did fortune cookies originate?",
            "-k",
            "3",
        ],
    );
    let hits: Vec<Value> = r
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // zero-score documents are never returned
    assert!((1..=3).contains(&hits.len()));
    assert_eq!(hits[0]["doc_id"], "leak-tq-fortune");
    assert_eq!(hits[0]["rank"], 1);
    ok(
        d,
        &[
            "index",
            "search",
            "--idx",
            "c.idx",
            "--query",
            "capital of Poland",
            "--out",
            "hits.jsonl",
        ],
    );
    assert!(!jsonl(d.join("hits.jsonl")).is_empty());
}

#[test]
fn filter_writes_header_decisions_and_kept_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "filter",
            "--benchmark",
            &fx("benchmark.jsonl"),
            "--schema",
            "multichoice",
            "--kind",
            "general",
            "--decisions-out",
            "d.jsonl",
            "--kept-out",
            "kept.jsonl",
        ],
    );
    let lines = jsonl(d.join("d.jsonl"));
    assert_eq!(lines[0]["record"], "header");
    assert_eq!(lines[0]["tool"], "leakprobe");
    assert_eq!(lines[0]["command"], "filter");
    let decisions = records(&lines, "decision");
    assert_eq!(decisions.len(), 104);
    let removed: Vec<(&str, &str)> = decisions
        .iter()
        .filter(|v| v["kept"] == false)
        .map(|v| {
            (
                v["instance_id"].as_str().unwrap(),
                v["reason"].as_str().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        removed,
        [
            ("geo-bool-1", "boolean_options"),
            ("geo-bool-2", "boolean_options"),
            ("geo-sym-1", "symbolic_options"),
            ("geo-overlap-1", "option_overlap"),
        ]
    );
    // the kept file is itself a loadable benchmark
    let kept = leakprobe::bench::load_benchmark(
        &d.join("kept.jsonl"),
        leakprobe::bench::Schema::Multichoice,
        "kept",
    )
    .unwrap();
    assert_eq!(kept.instances.len(), 100);
    assert!(kept.errors.is_empty());

    ok(
        d,
        &[
            "filter",
            "--benchmark",
            &fx("truthfulqa.jsonl"),
            "--kind",
            "truthfulqa",
            "--decisions-out",
            "tq.jsonl",
        ],
    );
    let lines = jsonl(d.join("tq.jsonl"));
    let removed = records(&lines, "decision")
        .into_iter()
        .filter(|v| v["kept"] == false)
        .count();
    assert_eq!(removed, 6);
}

#[test]
fn overlap_scores_planted_documents() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "index",
            "build",
            "--corpus",
            &fx("corpus.jsonl"),
            "--out",
            "c.idx",
        ],
    );
    ok(
        d,
        &[
            "overlap",
            "--idx",
            "c.idx",
            "--benchmark",
            &fx("benchmark.jsonl"),
            "--schema",
            "multichoice",
            "-k",
            "2",
            "--metrics",
            "bm25,rouge_l,bleu,gpt_score",
            "--judge",
            "judge",
            "--profiles",
            &fx("profiles.toml"),
            "--out",
            "o.jsonl",
        ],
    );
    let lines = jsonl(d.join("o.jsonl"));
    assert_eq!(lines[0]["record"], "header");
    let reports = records(&lines, "overlap");
    assert_eq!(reports.len(), 104);
    let france = reports
        .iter()
        .find(|v| v["instance_id"] == "geo-capital-france")
        .unwrap();
    assert_eq!(france["hits"][0]["doc_id"], "leak-geo-capital-france");
    assert_eq!(france["metric_scores"]["rouge_l"]["value"], 1.0);
    assert_eq!(france["metric_scores"]["bleu"]["value"], 100.0);
    assert_eq!(france["metric_scores"]["gpt_score"]["value"], 6.0);
    assert!(france["metric_scores"]["bm25"]["best_chunk"].is_null());

    let r = run(
        d,
        &[
            "overlap",
            "--idx",
            "c.idx",
            "--benchmark",
            &fx("benchmark.jsonl"),
            "--metrics",
            "gpt_score",
            "--out",
            "o2.jsonl",
        ],
    );
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn memorizer_scores_everything_and_never_gold_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let hot = guess_report(d, "memorizer", &["--seed", "3"]);
    assert_eq!(hot["n_total"], 104);
    assert_eq!(hot["n_filtered"], 4);
    assert_eq!(hot["n_scored"], 100);
    assert_eq!(hot["n_skipped"], 0);
    assert_eq!(hot["em_rate"], 1.0);
    assert_eq!(hot["config_snapshot"]["seed"], 3);
    assert!(hot["config_snapshot"].get("out").is_none());

    let cold = guess_report(d, "never-gold", &["--seed", "3"]);
    assert_eq!(cold["em_rate"], 0.0);
    assert_ne!(cold["run_id"], hot["run_id"]);

    let jobs = guess_report(d, "memorizer", &["--seed", "3", "--jobs", "4"]);
    assert_eq!(jobs, hot);
}

#[test]
fn question_mode_with_hint_and_report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "guess",
            "--benchmark",
            &fx("truthfulqa.jsonl"),
            "--prefilter",
            "truthfulqa",
            "--mode",
            "question",
            "--hint",
            "url",
            "--model",
            "scripted-guesser",
            "--profiles",
            &fx("profiles.toml"),
            "--out",
            "q.jsonl",
        ],
    );
    let lines = jsonl(d.join("q.jsonl"));
    assert_eq!(lines[0]["config"]["hint"], "url");
    assert_eq!(
        records(&lines, "guess").len() + records(&lines, "skipped").len(),
        12
    );

    ok(
        d,
        &[
            "report", "--in", "q.jsonl", "--format", "markdown", "--out", "q.md",
        ],
    );
    let md = std::fs::read_to_string(d.join("q.md")).unwrap();
    assert!(md.contains("| Benchmark | Model | Mode | Hint | Scored | EM | Rouge-L |"));
    assert!(md.contains("## Reference values"));

    ok(
        d,
        &[
            "report", "--in", "q.jsonl", "--format", "csv", "--out", "q.csv",
        ],
    );
    let csv = std::fs::read_to_string(d.join("q.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + records(&lines, "guess").len());
}

#[test]
fn unreachable_model_aborts_with_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    std::fs::write(
        d.join("p.toml"),
        format!(
            "[[profile]]\nname = \"down\"\nendpoint = \"http://127.0.0.1:{port}/v1/chat/completions\"\nmax_retries = 0\nrequests_per_minute = 100000\ntimeout_secs = 2\n"
        ),
    )
    .unwrap();
    let r = run(
        d,
        &[
            "guess",
            "--benchmark",
            &fx("benchmark.jsonl"),
            "--schema",
            "multichoice",
            "--mode",
            "multichoice",
            "--model",
            "down",
            "--profiles",
            "p.toml",
            "--out",
            "g.jsonl",
        ],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("aborted"));
    let lines = jsonl(d.join("g.jsonl"));
    let skipped = records(&lines, "skipped");
    assert_eq!(skipped.len(), 104);
    assert_eq!(
        skipped
            .iter()
            .filter(|v| v["reason"] == "not attempted: run aborted")
            .count(),
        99
    );
    ok(d, &["report", "--in", "g.jsonl", "--out", "r.json"]);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!(report["em_rate"].is_null());
}

#[test]
fn agree_prints_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(
        dir.path(),
        &["agree", "--annotations", &fx("annotations.csv")],
    );
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["krippendorff_alpha"], 0.872727);
    assert_eq!(v["metric"], "nominal");
}
