use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dvpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvpp")).args(args).output().unwrap()
}

fn scenario_file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_traces_and_metrics() {
    let dir = TempDir::new().unwrap();
    let file = scenario_file(&dir, "step.dvpp", "preset case1\n[events]\nload 1 2 -0.28\n");
    let out = dir.path().join("out");
    let res = dvpp(&["run", arg(&file), "--out", arg(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,") && header.contains("f_coi") && header.contains("f_agg"));
    assert_eq!(csv.lines().count(), 30002);
    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("steady_state = ") && metrics.contains("PASS stable"));
}

#[test]
fn run_honours_overrides_and_output_selection() {
    let dir = TempDir::new().unwrap();
    let file = scenario_file(&dir, "sel.dvpp", "preset case1\n[outputs]\nf_coi p:bess\n");
    let res = dvpp(&["run", arg(&file), "--dt", "0.01", "--tend", "2"]);
    assert_eq!(res.status.code(), Some(0));
    let csv = String::from_utf8(res.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("t,f_coi,p:bess"));
    assert_eq!(csv.lines().count(), 202);

    let text = "preset case1\n[events]\nload 0.5 2 -0.1\n";
    let late = dvpp(&["run", arg(&scenario_file(&dir, "late.dvpp", text)), "--tend", "0.2"]);
    assert_eq!(late.status.code(), Some(2));
}

#[test]
fn verify_exit_status_follows_the_conditions() {
    let dir = TempDir::new().unwrap();
    let ok = dvpp(&["verify", arg(&scenario_file(&dir, "c1.dvpp", "preset case1\n"))]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");

    let hybrid = dvpp(&[
        "verify",
        arg(&scenario_file(&dir, "c2.dvpp", "preset case2 epsilon=0.25\n")),
    ]);
    assert_eq!(hybrid.status.code(), Some(1));
    let text = String::from_utf8(hybrid.stdout).unwrap();
    assert!(text.contains("FAIL hybrid_freq") && text.contains("INFO freq_above_pll"));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let file = scenario_file(&dir, "bad.dvpp", "preset case1\n[system]\ndt = fast\n");
    let res = dvpp(&["verify", arg(&file)]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("3:6"), "{err}");
}

#[test]
fn simulation_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let text = "preset case2 epsilon=0\n[events]\noutage 1 sg1\noutage 2 sg3\n";
    let res = dvpp(&["run", arg(&scenario_file(&dir, "lost.dvpp", text))]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8(res.stderr).unwrap().contains("no forming device"));
}

#[test]
fn bode_emits_one_row_per_point() {
    let dir = TempDir::new().unwrap();
    let file = scenario_file(&dir, "c1.dvpp", "preset case1\n");
    let res = dvpp(&["bode", arg(&file), "--wmin", "0.1", "--wmax", "100", "--points", "31"]);
    assert_eq!(res.status.code(), Some(0));
    let csv = String::from_utf8(res.stdout).unwrap();
    assert_eq!(csv.lines().count(), 32);
    assert!(csv.starts_with("omega,"));
}

#[test]
fn montecarlo_writes_a_summary_and_one_file_per_sample() {
    let dir = TempDir::new().unwrap();
    let file = scenario_file(&dir, "c3.dvpp", "preset case3\n");
    let out = dir.path().join("mc");
    let res = dvpp(&[
        "montecarlo",
        arg(&file),
        "--samples",
        "3",
        "--seed",
        "5",
        "--out",
        arg(&out),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("sample,stable,max_dev_f_poc,peak_p:wind"));
    for k in 0..3 {
        assert!(out.join(format!("sample_{k:03}.csv")).exists());
    }
    assert!(out.join("baseline.csv").exists());

    let plain = dvpp(&["montecarlo", arg(&scenario_file(&dir, "c1.dvpp", "preset case1\n"))]);
    assert_eq!(plain.status.code(), Some(2));
}
