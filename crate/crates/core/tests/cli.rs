use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neumann-hole"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn tiny_with(from: &str, to: &str) -> String {
    let text = fs::read_to_string(data("tiny.json")).unwrap();
    assert!(text.contains(from));
    text.replace(from, to)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.json");
    let o = run(&["sweep", "--config", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(missing.to_str().unwrap()));
}

#[test]
fn increasing_epsilons_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_with("[0.24, 0.2, 0.16]", "[0.16, 0.2, 0.24]"));
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epsilons"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_with("\"hole\"", "\"holes\""));
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("holes"));
}

#[test]
fn sweep_matches_golden_csv_for_any_thread_count() {
    let golden = fs::read_to_string(data("tiny_sweep.csv")).unwrap();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let o = run(&["sweep", "--config", data("tiny.json").to_str().unwrap(), "--out", out, "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv, golden);
        for f in ["summary.txt", "dbar.svg", "delta.svg", "sweep.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}

#[test]
fn property_star_reports_split_ring_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["property-star", "--config", data("tiny.json").to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("violated"));
    let cfg = write_config(
        dir.path(),
        &tiny_with(r#"{"kind": "disk", "segments": 32}"#, r#"{"kind": "split-ring", "gap": 0.1}"#),
    );
    let o = run(&["property-star", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("property_star.txt")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.contains("violated") && l.contains("witness")));
}

#[test]
fn mesh_and_solve_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = data("tiny.json");
    assert_eq!(run(&["mesh", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("mesh_summary.txt")).unwrap();
    assert!(summary.starts_with("omega: 676 nodes"));
    assert_eq!(summary.lines().count(), 4);
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(0));
    let eig = fs::read_to_string(dir.path().join("eigenvalues.txt")).unwrap();
    assert_eq!(eig.lines().count(), 4);
}

#[test]
fn lemmas_subcommand_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["lemmas", "--config", data("tiny.json").to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for name in ["delta omega", "comp omega", "ball-c1", "ball-c5", "ball-c6", "trace", "line", "marchenko"] {
        assert!(stdout.contains(name), "{name} missing from\n{stdout}");
    }
    let csv = fs::read_to_string(dir.path().join("lemmas.csv")).unwrap();
    assert!(csv.starts_with("lemma,sample,left,right,implied,pass"));
}

#[test]
fn closeness_subcommand_writes_all_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["closeness", "--config", data("tiny.json").to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("closeness.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').count(), 10);
    assert!(lines[1].starts_with("0.24,0.04,20240611,0,"));
}
