#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn lexent_bin() -> &'static str {
    env!("CARGO_BIN_EXE_lexent")
}

pub fn stub_scorer_bin() -> &'static str {
    env!("CARGO_BIN_EXE_lexent-stub-scorer")
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(lexent_bin())
        .args(args)
        .output()
        .expect("lexent binary runs")
}

pub fn run_cli_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(lexent_bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("lexent binary runs")
}

pub fn assert_ok(output: &Output, context: &str) {
    assert!(
        output.status.success(),
        "{context} failed ({}):\nstdout: {}\nstderr: {}",
        output.status,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited")
}

pub fn stdout_str(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

pub fn stderr_str(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

/// Run the ingest -> index -> retrieve -> silver -> train -> fuse -> eval
/// pipeline on the bundled fixture into `work`, with a fixed seed.
/// Returns the list of produced files.
pub fn run_toy_pipeline(work: &Path, seed: &str) -> Vec<PathBuf> {
    let fixtures = fixtures_dir();
    std::fs::create_dir_all(work).unwrap();
    let path = |name: &str| work.join(name).display().to_string();
    let cases_src = fixtures.join("cases").display().to_string();
    let queries_src = fixtures.join("queries").display().to_string();
    let gold = fixtures.join("annotations.jsonl").display().to_string();

    let steps: Vec<Vec<String>> = vec![
        vec![
            "ingest".into(),
            "--input".into(),
            cases_src,
            "--kind".into(),
            "case".into(),
            "--filter-language".into(),
            "--output".into(),
            path("cases.jsonl"),
        ],
        vec![
            "ingest".into(),
            "--input".into(),
            queries_src,
            "--kind".into(),
            "case".into(),
            "--output".into(),
            path("queries.jsonl"),
        ],
        vec![
            "index".into(),
            "--corpus".into(),
            path("cases.jsonl"),
            "--output".into(),
            path("index.bm25"),
        ],
        vec![
            "retrieve".into(),
            "--index".into(),
            path("index.bm25"),
            "--queries".into(),
            path("queries.jsonl"),
            "--k".into(),
            "20".into(),
            "--output".into(),
            path("retrieve.tsv"),
        ],
        vec![
            "--seed".into(),
            seed.into(),
            "silver".into(),
            "--corpus".into(),
            path("cases.jsonl"),
            "--output".into(),
            path("silver.jsonl"),
        ],
        vec![
            "--seed".into(),
            seed.into(),
            "train".into(),
            "--stage".into(),
            format!("{}:2:0.5", path("silver.jsonl")),
            "--dim".into(),
            "16384".into(),
            "--output".into(),
            path("model.logreg"),
        ],
        vec![
            "fuse".into(),
            "--queries".into(),
            path("queries.jsonl"),
            "--candidates".into(),
            path("cases.jsonl"),
            "--run".into(),
            path("retrieve.tsv"),
            "--model".into(),
            path("model.logreg"),
            "--alpha".into(),
            "0.3".into(),
            "--decide".into(),
            "relative:0.95".into(),
            "--output".into(),
            path("selected.tsv"),
            "--full-output".into(),
            path("full.tsv"),
        ],
        vec![
            "eval".into(),
            "--run".into(),
            path("selected.tsv"),
            "--gold".into(),
            gold,
            "--output".into(),
            path("report.json"),
            "--plot-tsv".into(),
            path("plot.tsv"),
        ],
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let output = run_cli(&args);
        assert_ok(&output, &format!("pipeline step {:?}", &args[..2.min(args.len())]));
    }
    [
        "cases.jsonl",
        "queries.jsonl",
        "index.bm25",
        "retrieve.tsv",
        "silver.jsonl",
        "model.logreg",
        "selected.tsv",
        "full.tsv",
        "report.json",
        "plot.tsv",
    ]
    .iter()
    .map(|name| work.join(name))
    .collect()
}
