use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kleval"));
    c.env_remove("KLEVAL_DATA_DIR").env_remove("KLEVAL_WORDNET_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, questions: usize) -> PathBuf {
    let d = dir.join("data");
    ok(&["synth", "--dir", d.to_str().unwrap(), "--questions", &questions.to_string()]);
    d
}

fn wordnet_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/wordnet")
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn self_evaluation_with_human_clusters_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 5);
    let gp = d.join("gold_predictions.jsonl");
    let out = json(&ok(&[
        "eval",
        "--data-dir",
        d.to_str().unwrap(),
        "--predictions",
        gp.to_str().unwrap(),
        "--clustering",
        "human",
    ]));
    assert_eq!(out["aggregates"]["mean_kl"], 0.0);
    assert_eq!(out["aggregates"]["n_questions"], 5);
    for q in out["questions"].as_array().unwrap() {
        assert_eq!(q["kl"], 0.0);
    }
}

#[test]
fn empty_predictions_are_fully_unmatched() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 3);
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = json(&ok(&[
        "eval",
        "--data-dir",
        d.to_str().unwrap(),
        "--predictions",
        empty.to_str().unwrap(),
    ]));
    assert_eq!(out["aggregates"]["unmatched_rate"], 1.0);
    assert_eq!(out["questions"].as_array().unwrap().len(), 3);
}

#[test]
fn data_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 2);
    let out = bin().args(["eval"]).env("KLEVAL_DATA_DIR", &d).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&String::from_utf8(out.stdout).unwrap())["aggregates"]["n_questions"], 2);
}

#[test]
fn missing_inputs_fail() {
    let out = run(&["eval"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["eval", "--gold", "/nonexistent/gold.jsonl"]);
    assert!(!out.status.success());
}

#[test]
fn unscorable_questions_are_skipped_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 3);
    let human = d.join("human_clusters.jsonl");
    let text = fs::read_to_string(&human).unwrap();
    let kept: Vec<&str> = text.lines().skip(1).collect();
    fs::write(&human, kept.join("\n")).unwrap();
    let out = json(&ok(&["eval", "--data-dir", d.to_str().unwrap(), "--clustering", "human"]));
    assert_eq!(out["questions"].as_array().unwrap().len(), 2);
    assert_eq!(out["skipped"][0]["question_id"], "q000");
}

#[test]
fn bound_value_sweep_and_target() {
    let v: f64 = ok(&["bound", "--k", "8", "--eps", "0.2", "--n", "100"]).trim().parse().unwrap();
    assert!(v < 0.05, "{v}");
    let sweep = ok(&["bound", "--k", "8", "--eps", "0.2", "--sweep", "10..500"]);
    let rows: Vec<(u64, f64)> = sweep
        .lines()
        .skip(1)
        .map(|l| {
            let (n, b) = l.split_once(',').unwrap();
            (n.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 491);
    assert_eq!(rows[0].0, 10);
    assert_eq!(rows[490].0, 500);
    let n: u64 = ok(&["bound", "--k", "8", "--eps", "0.2", "--target", "0.05"]).trim().parse().unwrap();
    assert!(n <= 100);
    let at = |m: u64| rows.iter().find(|r| r.0 == m).unwrap().1;
    assert!(at(n) <= 0.05 && at(n - 1) > 0.05);
}

#[test]
fn bound_rejects_invalid_parameters() {
    for args in [
        &["bound", "--k", "1", "--eps", "0.2", "--n", "10"][..],
        &["bound", "--k", "8", "--eps", "0", "--n", "10"],
        &["bound", "--k", "8", "--eps", "0.2", "--sweep", "5..1"],
        &["bound", "--k", "8", "--eps", "0.2", "--target", "0"],
        &["bound", "--k", "8", "--eps", "0.2"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn validation_grid_has_nine_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 2);
    let agg = tmp.path().join("agg.csv");
    ok(&[
        "validate",
        "--data-dir",
        d.to_str().unwrap(),
        "--wordnet",
        wordnet_dir().to_str().unwrap(),
        "--grid",
        "--samplers",
        "MA",
        "--samples",
        "5",
        "--aggregate-csv",
        agg.to_str().unwrap(),
        "-o",
        tmp.path().join("v.json").to_str().unwrap(),
    ]);
    let text = fs::read_to_string(agg).unwrap();
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn gold_pipeline_correlates_perfectly_and_ma_beats_ws() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 20);
    let out = json(&ok(&[
        "validate",
        "--data-dir",
        d.to_str().unwrap(),
        "--pipelines",
        "gold,hac-cosine",
        "--samplers",
        "diverse,MA,WS",
    ]));
    let mean = |pipeline: &str, sampler: &str| {
        out["aggregates"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["pipeline"] == pipeline && r["sampler"] == sampler)
            .unwrap()["mean_spearman"]
            .as_f64()
            .unwrap()
    };
    for row in out["rows"].as_array().unwrap() {
        if row["pipeline"] == "gold" {
            assert_eq!(row["spearman"], 1.0);
        }
    }
    assert!(mean("hac-cosine", "MissingAnswer") > mean("hac-cosine", "WrongScore"));
}

#[test]
fn reports_are_reproducible_and_seed_only_affects_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 4);
    let dd = d.to_str().unwrap();
    let eval = |seed: &str| ok(&["eval", "--data-dir", dd, "--clustering", "gmeans", "--seed", seed]);
    let validate = |seed: &str| {
        ok(&["validate", "--data-dir", dd, "--samplers", "MA,WR", "--samples", "10", "--seed", seed])
    };
    assert_eq!(eval("1"), eval("1"));
    assert_eq!(validate("1"), validate("1"));
    assert_ne!(validate("1"), validate("2"));

    let scored = |seed: &str| json(&eval(seed));
    let (a, b) = (scored("1"), scored("2"));
    assert_ne!(a["config_digest"], b["config_digest"]);
    assert_eq!(b["seed"], 2);
    let kls = |v: &Value| {
        v["questions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|q| q["kl"].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(kls(&a), kls(&b));

    let clustered = |s: &str| ok(&["cluster", "--data-dir", dd, "--clustering", "xmeans", "--cluster-seed", s]);
    assert_eq!(clustered("3"), clustered("3"));
}

#[test]
fn cluster_output_round_trips_as_human_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 3);
    let clusters = tmp.path().join("auto.jsonl");
    ok(&["cluster", "--data-dir", d.to_str().unwrap(), "-o", clusters.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(&clusters).unwrap().lines().count(), 3);
    let out = json(&ok(&[
        "eval",
        "--data-dir",
        d.to_str().unwrap(),
        "--clustering",
        "human",
        "--human-clusters",
        clusters.to_str().unwrap(),
    ]));
    let auto = json(&ok(&["eval", "--data-dir", d.to_str().unwrap()]));
    assert_eq!(out["questions"], auto["questions"]);
}

#[test]
fn csv_tables_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), 2);
    let per_q = tmp.path().join("q.csv");
    ok(&["eval", "--data-dir", d.to_str().unwrap(), "--csv", per_q.to_str().unwrap(), "-o", "/dev/null"]);
    let text = fs::read_to_string(per_q).unwrap();
    assert!(text.starts_with("question_id,slot,kl,maxanswer_at_10,"));
    assert_eq!(text.lines().count(), 3);

    let table = tmp.path().join("t.csv");
    let scatter = tmp.path().join("s.csv");
    ok(&[
        "validate",
        "--data-dir",
        d.to_str().unwrap(),
        "--samplers",
        "WS",
        "--samples",
        "4",
        "--table",
        table.to_str().unwrap(),
        "--scatter",
        scatter.to_str().unwrap(),
        "-o",
        "/dev/null",
    ]);
    // 2 pipelines × 2 questions, and 4 samples each.
    assert_eq!(fs::read_to_string(table).unwrap().lines().count(), 5);
    assert_eq!(fs::read_to_string(scatter).unwrap().lines().count(), 17);
}
