mod common;

use std::fs;

use common::{corpus_fixture, p, xmr};
use xmr::rules::load_store;

fn mine_args<'a>(fx: &'a common::Fixture, out: &'a str) -> Vec<&'a str> {
    vec![
        "mine",
        "--features",
        p(&fx.features),
        "--annotations",
        p(&fx.annotations),
        "--feature-dim",
        "64",
        "--top-k",
        "4",
        "--min-count",
        "2",
        "--out",
        out,
    ]
}

#[test]
fn mine_infer_eval_round() {
    let fx = corpus_fixture(7, 60);
    let rules = fx.path("rules.xmr");
    let out = xmr(mine_args(&fx, p(&rules)));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let store = load_store(&rules).unwrap();
    assert!(!store.is_empty());
    assert_eq!(store.feature_dim(), 64);

    let concepts = fx.path("concepts.jsonl");
    let out = xmr([
        "infer",
        "--rules",
        p(&rules),
        "--features",
        p(&fx.features),
        "--annotations",
        p(&fx.annotations),
        "--top-k",
        "4",
        "--provenance",
        "--out",
        p(&concepts),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&concepts).unwrap();
    assert_eq!(text.lines().count(), 60);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["concepts"].is_array());
    assert!(first["provenance"].is_object());

    let report = fx.path("report.json");
    let out = xmr([
        "eval",
        "--rules",
        p(&rules),
        "--features",
        p(&fx.features),
        "--annotations",
        p(&fx.annotations),
        "--min-count",
        "2",
        "--top-k",
        "4",
        "--out",
        p(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let row = &rows[0];
    assert!(row["supp_min"].is_null());
    let f1 = row["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    // planted concepts are recoverable from their activation dims
    assert!(f1 > 0.3, "f1 {f1}");
}

#[test]
fn infer_without_annotations_emits_one_line_per_image() {
    let fx = corpus_fixture(8, 20);
    let rules = fx.path("rules.xmr");
    assert!(xmr(mine_args(&fx, p(&rules))).status.success());
    let concepts = fx.path("c.jsonl");
    let out = xmr([
        "infer",
        "--rules",
        p(&rules),
        "--features",
        p(&fx.features),
        "--top-k",
        "4",
        "--out",
        p(&concepts),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n_images = fs::read_to_string(&fx.features).unwrap().lines().count();
    assert_eq!(fs::read_to_string(&concepts).unwrap().lines().count(), n_images);
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let fx = corpus_fixture(9, 40);
    let report = fx.path("sweep.json");
    let out = xmr([
        "sweep",
        "--features",
        p(&fx.features),
        "--annotations",
        p(&fx.annotations),
        "--feature-dim",
        "64",
        "--top-k",
        "4",
        "--min-count",
        "2",
        "--grid",
        "2:0.5,3:0.5,3:3/4",
        "--sample",
        "10",
        "--seed",
        "3",
        "--out",
        p(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["conf_min"], serde_json::json!([3, 4]));
    let counts: Vec<u64> = rows.iter().map(|r| r["rule_count"].as_u64().unwrap()).collect();
    assert!(counts[0] >= counts[1] && counts[1] >= counts[2], "{counts:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Prec"));
}

#[test]
fn build_then_mine_from_transactions() {
    let fx = corpus_fixture(10, 30);
    let db = fx.path("tx.jsonl");
    let vocab = fx.path("vocab.json");
    let out = xmr([
        "build-transactions",
        "--features",
        p(&fx.features),
        "--annotations",
        p(&fx.annotations),
        "--feature-dim",
        "64",
        "--top-k",
        "4",
        "--min-count",
        "2",
        "--vocab-out",
        p(&vocab),
        "--out",
        p(&db),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let direct = fx.path("direct.xmr");
    assert!(xmr(mine_args(&fx, p(&direct))).status.success());
    let staged = fx.path("staged.xmr");
    let out = xmr([
        "mine",
        "--transactions",
        p(&db),
        "--vocab",
        p(&vocab),
        "--out",
        p(&staged),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&direct).unwrap(), fs::read(&staged).unwrap());
}

#[test]
fn merge_cli_is_idempotent() {
    let fx = corpus_fixture(11, 30);
    let rules = fx.path("r.xmr");
    assert!(xmr(mine_args(&fx, p(&rules))).status.success());
    let merged = fx.path("m.xmr");
    let out = xmr(["merge", "--in", p(&rules), "--in", p(&rules), "--out", p(&merged)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_store(&merged).unwrap().len(), load_store(&rules).unwrap().len());
}

#[test]
fn exit_codes() {
    assert_eq!(xmr(["no-such-command"]).status.code(), Some(2));
    assert_eq!(xmr(["mine", "--min-confidence", "banana", "--out", "x"]).status.code(), Some(2));

    let fx = corpus_fixture(12, 10);
    let out_path = fx.path("never.xmr");
    // confidence above one is a config error, caught before any output
    let mut args = mine_args(&fx, p(&out_path));
    args.extend(["--min-confidence", "3/2"]);
    let out = xmr(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_path.exists());

    let out = xmr(["merge", "--in", "/nonexistent.xmr", "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_path.exists());
}

#[test]
fn corrupt_rule_file_reports_offset() {
    let fx = corpus_fixture(13, 10);
    let bad = fx.path("bad.xmr");
    fs::write(
        &bad,
        "{\"format\":\"xmr-rules\",\"version\":1,\"feature_dim\":64,\"vocab_size\":5}\n{\"antecedent\":[1],",
    )
    .unwrap();
    let out = xmr(["merge", "--in", p(&bad), "--out", p(&fx.path("o.xmr"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("byte"), "{stderr}");
}
