use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cacc_dsrc_core::scenario::run_replication;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cacc-dsrc"));
    c.env_remove("CACC_OUTPUT_DIR");
    c
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(file)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV written by the tool: drops the version comment and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn short_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("short.toml");
    std::fs::write(
        &path,
        format!("[scenario]\nhorizon_s = 400\nwarmup_s = 100\nmpr = 0.4\n{body}"),
    )
    .unwrap();
    path
}

#[test]
fn curves_grid() {
    let o = bin()
        .args(["curves", "--xi", "500,1500,3000", "--phi", "300", "--xmax", "300", "--dx", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# cacc-dsrc curves v1"));
    assert!(text.lines().nth(1).unwrap().starts_with("xi,x_m,p,raw"));
    let r = rows(&text);
    assert_eq!(r.len(), 3 * 301);
    assert_eq!(r[0][..3], ["500", "0", "1"]);
    assert_eq!(r[902][..2], ["3000", "300"]);
}

#[test]
fn curves_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("fig.csv");
    let o = bin()
        .args(["curves", "--xi", "0", "--xmax", "10", "--dx", "2.5", "--output"])
        .arg(&dest)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&std::fs::read_to_string(&dest).unwrap()).len(), 5);
}

#[test]
fn missing_config_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.toml"))
        .arg("--output-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.toml"));
    assert!(!out.exists());
}

#[test]
fn invalid_values_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = short_config(dir.path(), "replications = 1\n[demand]\nvolume_vph = -5\n");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    std::fs::write(&cfg, "[scenario]\npolcy = \"DL\"\n").unwrap();
    let o = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("polcy"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = bin().args(["run", "--frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_lists_flags() {
    let o = bin().args(["run", "--help"]).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    for flag in [
        "--config",
        "--output-dir",
        "--seed",
        "--replications",
        "--reception-log",
        "--fallback-log",
        "--trajectory",
        "--jobs",
        "--verbose",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn run_dl_writes_summary_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", "--replications", "1", "--reception-log", "--fallback-log", "--config"])
        .arg(repo("configs/dl.toml"))
        .arg("--output-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let r = rows(&summary);
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][..3], ["DL", "0.4", "0"]);
    assert_eq!(r[1][2], "pooled");
    assert!(r[0][3].parse::<u64>().unwrap() > 0);

    let reception = std::fs::read_to_string(out.join("reception_DL_mpr0.40_rep0.csv")).unwrap();
    assert!(reception.lines().nth(1).unwrap().starts_with("time_s,vehicle_id,x_m,delta,xi,p"));
    assert!(rows(&reception).len() > 1000);
    assert!(out.join("fallback_DL_mpr0.40_rep0.csv").exists());
    // No leftover temporary files.
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 3);
}

#[test]
fn sweep_matrix_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = short_config(dir.path(), "replications = 2\n");
    let o = bin()
        .args(["sweep", "--policies", "UML,MML,DL,DLA", "--mprs", "0.4", "--jobs", "3", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&std::fs::read_to_string(out.join("summary.csv")).unwrap());
    let labels: Vec<(&str, &str)> = r.iter().map(|row| (row[0].as_str(), row[2].as_str())).collect();
    let mut expected = Vec::new();
    for p in ["UML", "MML", "DL", "DLA"] {
        expected.extend([(p, "0"), (p, "1"), (p, "pooled")]);
    }
    assert_eq!(labels, expected);
}

#[test]
fn sweep_rows_match_library_replications() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = short_config(dir.path(), "replications = 1\nbase_seed = 9\n");
    let o = bin()
        .args(["sweep", "--policies", "DL", "--mprs", "0.4", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&std::fs::read_to_string(out.join("summary.csv")).unwrap());

    let run = cacc_dsrc::config::load_run_config(&cfg).unwrap();
    let config = run.cell(cacc_dsrc_core::traffic::LanePolicy::Dl, 0.4);
    let m = run_replication(&config, 9, &mut ()).unwrap().metrics();
    assert_eq!(r[0][3], m.trials.to_string());
    assert_eq!(r[0][4], m.successes.to_string());
    assert_eq!(r[0][6], m.xi.unwrap().mean.to_string());
    assert_eq!(r[0][15], m.throughput_vph.to_string());
}

#[test]
fn replication_seeds_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "policy = \"DLA\"\n");
    let summary = |seed: &str, reps: &str, name: &str| {
        let out = dir.path().join(name);
        let o = bin()
            .args(["run", "--seed", seed, "--replications", reps, "--config"])
            .arg(&cfg)
            .arg("--output-dir")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        rows(&std::fs::read_to_string(out.join("summary.csv")).unwrap())
    };
    let three = summary("40", "3", "a");
    let single = summary("42", "1", "b");
    // Replication 2 of a run seeded at 40 uses seed 42.
    assert_eq!(three[2][3..], single[0][3..]);
    assert_ne!(three[0][3..], three[1][3..]);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let cfg = short_config(dir.path(), "replications = 1\n");
    let o = bin()
        .env("CACC_OUTPUT_DIR", &out)
        .args(["run", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("summary.csv").exists());
}

#[test]
fn validate_coefficients_against_files() {
    let o = bin()
        .args(["validate-coefficients", "--expect"])
        .arg(data("coefficients_oracle.txt"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with('h')).count(), 60);
    assert!(text.contains("sha256"));

    let o = bin()
        .args(["validate-coefficients", "--expect"])
        .arg(data("coefficients_as_printed.txt"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("2 of 60 differ"), "{}", stdout(&o));

    // Loading the printed table reproduces its defects: the sanity suite fails.
    let o = bin()
        .args(["validate-coefficients", "--coefficients"])
        .arg(data("coefficients_as_printed.txt"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}
