mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::data_path;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehr-priority"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_tree(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read_to_string(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn cluster_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "cluster",
        "--ratings",
        s(&data_path("ratings.csv")),
        "--k",
        "5",
        "--seed",
        "42",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.md").is_file());
    for t in ["descriptive", "center_distances", "anova", "clusters", "wcss_trajectory"] {
        assert!(out.join("tables").join(format!("{t}.csv")).is_file(), "{t}");
    }
    assert!(!out.join("tables/factor_weights.csv").exists());
}

#[test]
fn k_larger_than_rows_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["cluster", "--ratings", s(&data_path("ratings.csv")), "--k", "25", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("k exceeds row count"));
    assert!(!out.exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "pipeline",
            "--ratings",
            s(&data_path("ratings.csv")),
            "--ranks",
            s(&data_path("ranks.csv")),
            "--out",
            s(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read_tree(&a), read_tree(&b));
}

#[test]
fn prioritize_weights_sum_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["prioritize", "--ranks", s(&data_path("ranks.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("tables/factor_weights.csv")).unwrap();
    let total: f64 = r
        .records()
        .map(|rec| rec.unwrap()[3].parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(format!("{total:.3}"), "1.000");
    assert!(!out.join("tables/clusters.csv").exists());
}

#[test]
fn single_expert_leave_one_out_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ranks = tmp.path().join("one.csv");
    let text = fs::read_to_string(data_path("ranks.csv")).unwrap();
    let one: String = text
        .lines()
        .enumerate()
        .filter(|(i, l)| *i == 0 || l.starts_with("1,"))
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    fs::write(&ranks, one).unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "prioritize",
        "--ranks",
        s(&ranks),
        "--sensitivity-mode",
        "leave-one-out",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient panel"));

    let o = run(&[
        "prioritize",
        "--ranks",
        s(&ranks),
        "--sensitivity-mode",
        "adjacent-swap",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("tables/uncertainty.csv").exists());
}

#[test]
fn missing_ranks_fail_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "pipeline",
        "--ratings",
        s(&data_path("ratings.csv")),
        "--ranks",
        s(&tmp.path().join("nope.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn pca_setting_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "pipeline",
        "--ratings",
        s(&data_path("ratings.csv")),
        "--ranks",
        s(&data_path("ranks.csv")),
        "--pca-dims",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let prov: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["pca_dims"], 2);
    assert_eq!(prov["seed"], 42);
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("- PCA dimensions: 2"));
}

#[test]
fn malformed_input_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "expert_id,concept_id,criterion,score\n1,1,AS,11\n").unwrap();
    let o = run(&["cluster", "--ratings", s(&bad), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).contains("panicked"));

    fs::write(&bad, "not,a,header\n").unwrap();
    let o = run(&["prioritize", "--ranks", s(&bad), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["cluster", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_subcommand_rerenders_the_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "pipeline",
        "--ratings",
        s(&data_path("ratings.csv")),
        "--ranks",
        s(&data_path("ranks.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["report", "--bundle", s(&out.join("bundle.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(o.stdout, fs::read(out.join("report.md")).unwrap());

    let again = tmp.path().join("again");
    let o = run(&["report", "--bundle", s(&out.join("bundle.json")), "--out", s(&again)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_tree(&out), read_tree(&again));
}

#[test]
fn foreign_output_directory_is_left_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "mine").unwrap();
    let o = run(&["prioritize", "--ranks", s(&data_path("ranks.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "mine");
}

#[test]
fn dump_lp_writes_the_program() {
    let tmp = tempfile::tempdir().unwrap();
    let lp = tmp.path().join("opa.lp");
    let o = run(&[
        "prioritize",
        "--ranks",
        s(&data_path("ranks.csv")),
        "--dump-lp",
        s(&lp),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(lp).unwrap();
    assert!(text.starts_with("maximize: 1 Z\n"));
    // 7 experts x 3 criteria x 5 items ordinal rows, plus the weight total
    assert_eq!(text.lines().filter(|l| l.starts_with("  c")).count(), 106);
    assert!(text.contains("W[e1,Efficacy,F2]"));
}

#[test]
fn any_items_allows_other_item_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let ranks = tmp.path().join("ranks.csv");
    let text = fs::read_to_string(data_path("ranks.csv")).unwrap().replace(",F", ",G");
    fs::write(&ranks, text).unwrap();
    let ratings = data_path("ratings.csv");
    let base = [
        "pipeline",
        "--ratings",
        s(&ratings),
        "--ranks",
        s(&ranks),
        "--out",
    ];
    let out = tmp.path().join("out");
    let mut args = base.to_vec();
    args.push(s(&out));
    assert_eq!(run(&args).status.code(), Some(2));
    args.push("--any-items");
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("tables/factor_weights.csv")).unwrap().contains("G2"));
}
