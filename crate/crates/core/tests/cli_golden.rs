//! End-to-end tests of the `irgeom` binary against files in `fixtures/`.
//!
//! Set `IRGEOM_UPDATE_GOLDEN=1` to rewrite the golden files after an
//! intended output change.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn irgeom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irgeom"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn check_golden(name: &str, actual: &str) {
    let path = fixture(&format!("golden/{name}"));
    if std::env::var_os("IRGEOM_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert!(expected == actual, "{name} differs from golden file");
}

fn simulate_seed42() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    stdout_ok(&irgeom(&["simulate", "--seed", "42", "--output", "."], dir.path()));
    dir
}

const RUNS: [&str; 5] = ["sys1.run", "sys2.run", "sys3.run", "sys4.run", "sys5.run"];

fn with_runs<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(RUNS.iter()).chain(tail).copied().collect()
}

#[test]
fn worked_example_curves() {
    let dir = fixture("worked_example");
    let out = stdout_ok(&irgeom(
        &["analyze", "system1.run", "system2.run", "--qrels", "qrels.txt", "--depth", "7", "--curves"],
        &dir,
    ));
    assert_eq!(
        out,
        "topic,r,a1,a2,a12\n1,1,1,1,0\n1,2,2,1,1\n1,3,3,2,1\n1,4,4,2,1\n1,5,4,3,1\n1,6,5,4,3\n1,7,5,4,3\n"
    );
}

#[test]
fn seed42_goldens() {
    let dir = simulate_seed42();
    let p = dir.path();
    check_golden("truth_seed42.csv", &std::fs::read_to_string(p.join("truth.csv")).unwrap());
    let analyze = stdout_ok(&irgeom(&with_runs(&["analyze"], &["--qrels", "qrels.txt"]), p));
    check_golden("analyze_seed42.csv", &analyze);
    let estimate = stdout_ok(&irgeom(&with_runs(&["estimate"], &["--qrels", "qrels.txt"]), p));
    check_golden("estimate_seed42.csv", &estimate);
    let evaluate = stdout_ok(&irgeom(&with_runs(&["evaluate"], &["--qrels", "qrels.txt"]), p));
    check_golden("evaluate_seed42.csv", &evaluate);
}

#[test]
fn estimate_from_saved_stats_matches_direct_estimate() {
    let dir = simulate_seed42();
    let p = dir.path();
    let analyze = stdout_ok(&irgeom(&with_runs(&["analyze"], &["--qrels", "qrels.txt"]), p));
    std::fs::write(p.join("stats.csv"), analyze).unwrap();
    let via_stats = stdout_ok(&irgeom(
        &["estimate", "--stats", "stats.csv", "--n1", "70", "--order", "sys1,sys2,sys3,sys4,sys5", "--topics", "1"],
        p,
    ));
    let last = via_stats.lines().last().unwrap();
    assert!(last.starts_with("1,70,"), "{via_stats}");
    assert_eq!(last.split(',').count(), 7);
}

fn estimate_row(fixture_name: &str) -> (Vec<f64>, String) {
    let out = stdout_ok(&irgeom(
        &["estimate", "--stats", fixture_name, "--n1", "1"],
        &fixture("estimate"),
    ));
    let line = out.lines().last().unwrap().to_string();
    let fields: Vec<&str> = line.split(',').collect();
    let values = fields[1..fields.len() - 1].iter().map(|v| v.parse().unwrap()).collect();
    (values, fields.last().unwrap().to_string())
}

#[test]
fn disjoint_triple_row() {
    let (values, diag) = estimate_row("disjoint_triple.csv");
    for (v, want) in values.iter().zip([1.0, 2.0, 3.0]) {
        assert!((v - want).abs() < 1e-9, "{values:?}");
    }
    assert_eq!(diag, "antiparallel@3");
}

#[test]
fn clone_ensemble_row() {
    let (values, diag) = estimate_row("clone_ensemble.csv");
    assert_eq!(values, [1.0, 1.0, 1.0]);
    assert_eq!(diag, "parallel@2;parallel@3");
}

#[test]
fn geometric_inconsistency_exits_nonzero_and_names_pairs() {
    let out = irgeom(&["estimate", "--stats", "inconsistent.csv", "--n1", "10"], &fixture("estimate"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[geometry]:"), "{err}");
    assert!(err.contains("a/b"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn errors_carry_a_category() {
    let dir = fixture("worked_example");
    let missing = irgeom(&["analyze", "system1.run", "nope.run", "--qrels", "qrels.txt"], &dir);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error[io]:"));

    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.run"), "1 Q0 D1 one 2.0 x\n").unwrap();
    let bad = irgeom(&["fuse", "bad.run"], tmp.path());
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error[parse]:"));

    // second run lacks topic 2
    std::fs::write(tmp.path().join("a.run"), "1 Q0 D1 1 2 a\n2 Q0 D2 1 2 a\n").unwrap();
    std::fs::write(tmp.path().join("b.run"), "1 Q0 D1 1 2 b\n").unwrap();
    std::fs::write(tmp.path().join("q.txt"), "1 0 D1 1\n2 0 D2 1\n").unwrap();
    let gap = irgeom(&["analyze", "a.run", "b.run", "--qrels", "q.txt"], tmp.path());
    assert!(!gap.status.success());
    let err = String::from_utf8_lossy(&gap.stderr);
    assert!(err.starts_with("error[input]:") && err.contains('2'), "{err}");
}

#[test]
fn undefined_pairs_are_reported_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("a.run"), "1 Q0 D1 1 2 a\n1 Q0 D2 2 1 a\n").unwrap();
    std::fs::write(tmp.path().join("b.run"), "1 Q0 D3 1 2 b\n").unwrap();
    std::fs::write(tmp.path().join("q.txt"), "1 0 D1 1\n1 0 D3 0\n").unwrap();
    let out = stdout_ok(&irgeom(&["analyze", "a.run", "b.run", "--qrels", "q.txt"], tmp.path()));
    assert!(out.contains("1,a,b,,,,,undefined"), "{out}");
}

#[test]
fn json_and_fuse_outputs_are_well_formed() {
    let dir = fixture("worked_example");
    let json = stdout_ok(&irgeom(
        &["analyze", "system1.run", "system2.run", "--qrels", "qrels.txt", "--depth", "7", "--format", "json"],
        &dir,
    ));
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let fused = stdout_ok(&irgeom(&["fuse", "system1.run", "system2.run", "--take", "3"], &dir));
    let run = irgeom::trec_io::parse_run(&fused).unwrap();
    let docs: Vec<&str> = run.list(&"1".into()).unwrap().iter().map(|e| e.doc_id.as_str()).collect();
    // totals: F345 99 + 100, F1789 96 + 99, F4 98 + 95; F234 appears once
    assert_eq!(docs, ["F345", "F1789", "F4"]);
}

#[test]
fn reference_tables_parse() {
    for (name, rows, cols) in [
        ("geometric_estimates.csv", 7, 6),
        ("true_counts.csv", 7, 6),
        ("fusion_table.csv", 47, 6),
    ] {
        let text = std::fs::read_to_string(fixture(&format!("reference/{name}"))).unwrap();
        assert!(text.starts_with("# reference fixture: not regenerable without TREC 6 data"));
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap().len(), cols);
        let records: Vec<_> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(records.len(), rows, "{name}");
    }
}

#[test]
fn clone_runs_fit_unit_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(fixture("worked_example/system1.run")).unwrap();
    std::fs::write(tmp.path().join("copy.run"), src.replace("system1", "copy")).unwrap();
    std::fs::copy(fixture("worked_example/system1.run"), tmp.path().join("orig.run")).unwrap();
    std::fs::copy(fixture("worked_example/qrels.txt"), tmp.path().join("q.txt")).unwrap();
    let out = stdout_ok(&irgeom(&["analyze", "orig.run", "copy.run", "--qrels", "q.txt", "--depth", "7"], tmp.path()));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows, ["1,system1,copy,1,1,1,1,0", "1,copy,system1,1,1,1,1,0"]);
}

#[test]
fn fusing_one_run_reproduces_its_top_100() {
    let dir = simulate_seed42();
    let fused = stdout_ok(&irgeom(&["fuse", "sys3.run"], dir.path()));
    let fused = irgeom::trec_io::parse_run(&fused).unwrap();
    let original = irgeom::trec_io::read_run(dir.path().join("sys3.run")).unwrap();
    for (topic, list) in original.lists() {
        let want: Vec<&str> = list.iter().take(100).map(|e| e.doc_id.as_str()).collect();
        let got: Vec<&str> = fused.list(topic).unwrap().iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(got, want, "topic {topic}");
    }
}

#[test]
fn simulate_seed7_twice_is_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        stdout_ok(&irgeom(&["simulate", "--seed", "7", "--output", "."], d.path()));
    }
    for name in ["sys1.run", "sys5.run", "qrels.txt", "truth.csv", "profile.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn reads_runs_from_standard_input() {
    use std::io::Write;
    let dir = fixture("worked_example");
    let mut child = Command::new(env!("CARGO_BIN_EXE_irgeom"))
        .args(["analyze", "-", "system2.run", "--qrels", "qrels.txt", "--depth", "7"])
        .current_dir(&dir)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let run = std::fs::read(dir.join("system1.run")).unwrap();
    child.stdin.take().unwrap().write_all(&run).unwrap();
    let piped = stdout_ok(&child.wait_with_output().unwrap());
    let direct = stdout_ok(&irgeom(&["analyze", "system1.run", "system2.run", "--qrels", "qrels.txt", "--depth", "7"], &dir));
    assert_eq!(piped, direct);
}
