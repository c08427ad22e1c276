use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvm-repair"))
        .args(args)
        .env_remove("MVM_FIXED_TIMESTAMP")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn repair_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fix-report.log");
    let result = dir.path().join("result.txt");
    let f = fixture("whitespace_width.mvm");
    let o = run(&[
        "repair",
        f.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--result",
        result.to_str().unwrap(),
        "--fixed-timestamp",
        "Mon Jan 01 00:00:00 UTC 2024",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(&out).unwrap();
    assert!(report.starts_with("mvm-repair Fix Report - Mon Jan 01 00:00:00 UTC 2024\n"));
    assert!(report.contains("Number of Plausible Fixes: 2\n"));
    assert!(report
        .contains("1. Mutator = CONDITIONAL (removed conditional - replaced equality check with false),"));
    assert!(report.contains("File Name = whitespace_width.mvm,"));
    assert!(fs::read_to_string(&result)
        .unwrap()
        .starts_with("mvm-repair-result"));
}

#[test]
fn timestamp_from_environment() {
    let f = fixture("zone_offset.mvm");
    let o = Command::new(env!("CARGO_BIN_EXE_mvm-repair"))
        .args(["repair", f.to_str().unwrap()])
        .env("MVM_FIXED_TIMESTAMP", "T-fixed")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("mvm-repair Fix Report - T-fixed\n"));
}

#[test]
fn passing_subject_has_nothing_to_repair() {
    let o = run(&["repair", fixture("mutation_score.mvm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nothing to repair"));
}

#[test]
fn mutation_score_output() {
    let o = run(&["mutation-score", fixture("mutation_score.mvm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "killed = 6, total = 10, equivalent = 2\nMS = 0.75\n");
}

#[test]
fn jobs_do_not_change_output() {
    let f = fixture("economy.mvm");
    let f = f.to_str().unwrap();
    let one = run(&["repair", f, "--machine-readable", "--jobs", "1"]);
    let four = run(&["repair", f, "--machine-readable", "--jobs", "4"]);
    assert_eq!(one.status.code(), Some(0));
    assert!(!one.stdout.is_empty());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn original_mask_finds_no_accessor_fix() {
    let f = fixture("bugs/accessor.mvm");
    let o = run(&[
        "repair",
        f.to_str().unwrap(),
        "--mutators",
        "original",
        "--machine-readable",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "");
}

#[test]
fn bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.mvm");
    fs::write(&broken, ".class A\n.method static int f()\n  frobnicate\n.end\n").unwrap();
    let o = run(&["verify", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.mvm:"));

    let missing = dir.path().join("missing.mvm");
    assert_eq!(run(&["verify", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(
        run(&["repair", "x.mvm", "--mutators", "ZZ"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["repair", "x.mvm", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn render_is_stable() {
    let f = fixture("local_value.mvm");
    let first = stdout(&run(&["render", f.to_str().unwrap()]));
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy.mvm");
    fs::write(&copy, &first).unwrap();
    assert_eq!(stdout(&run(&["render", copy.to_str().unwrap()])), first);
}

#[test]
fn mutants_listing() {
    let f = fixture("catalog/IN.mvm");
    let o = run(&["mutants", f.to_str().unwrap(), "--mutators", "IN"]);
    assert_eq!(stdout(&o), "Cat.m(int)int:3:IN:0\tremoved integer negation\n");
}
