//! End-to-end runs of the `twistgeo` binary against the shipped geometries.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SHIPPED: [&str; 4] = ["moyal_plane", "moyal_perturbed", "nc_torus", "classical"];

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn geometry(name: &str) -> PathBuf {
    root().join("geometries").join(format!("{name}.geo"))
}

fn golden(file: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(file);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistgeo")).args(args).output().expect("binary runs")
}

fn check(name: &str) -> Output {
    let path = geometry(name);
    run(&["check", path.to_str().unwrap(), "--suite", "all", "--seed", "0"])
}

#[test]
fn check_matches_golden_reports_byte_for_byte() {
    for name in SHIPPED {
        let first = check(name);
        assert_eq!(first.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&first.stderr));
        let second = check(name);
        assert_eq!(first.stdout, second.stdout, "{name}: reports differ between runs");
        assert_eq!(String::from_utf8(first.stdout).unwrap(), golden(&format!("{name}.check.json")), "{name}");
    }
}

#[test]
fn eval_prints_canonical_star_product() {
    let path = geometry("moyal_plane");
    let out = run(&["eval", path.to_str().unwrap(), "--expr", "star(x1,x2)"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "x1*x2 + h\n");
}

#[test]
fn eval_reports_truncation_and_errors() {
    let path = geometry("moyal_perturbed");
    let out = run(&["eval", path.to_str().unwrap(), "--expr", "x1 + h^2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "x1\n");
    assert!(String::from_utf8(out.stderr).unwrap().contains("truncated"));

    let out = run(&["eval", path.to_str().unwrap(), "--expr", "x1 + x7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 1, column 6: unknown generator"));
}

#[test]
fn levi_civita_writes_report_file() {
    let dir = std::env::temp_dir().join(format!("twistgeo-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("lc.json");
    let path = geometry("moyal_perturbed");
    let out = run(&["levi-civita", path.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text, golden("moyal_perturbed.levi_civita.json"));
    assert!(text.contains("\"1,1,1\": \"1/2*h\""));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn spec_errors_exit_with_code_two() {
    let dir = std::env::temp_dir().join(format!("twistgeo-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.geo");
    std::fs::write(&bad, "[geometry]\nname = broken\norder = 1\n").unwrap();
    let out = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("missing section [algebra]"));
    let out = run(&["check", dir.join("absent.geo").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn seed_flag_changes_only_sampled_sections() {
    let path = geometry("moyal_plane");
    let out = run(&["check", path.to_str().unwrap(), "--suite", "cartan", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"seed\": 7"));
    assert!(text.contains("\"status\": \"pass\""));
    assert!(!text.contains("\"riemann\""));
}
