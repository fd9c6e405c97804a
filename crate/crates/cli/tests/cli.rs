use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use myo_core::datastore::read_session_file;
use myo_core::dsp::FilterVariant;
use myo_core::evalkit::{dof_sweep, sweep_table_csv, tost_min_bounds};
use myo_core::runtime::record_training_session;
use myo_core::synthemg::{make_profile, MovementSchedule, SynergyModel};

const SCHEDULE: &str = r#"
movements = ["D1-flex/ext", "D2-flex/ext", "D3-flex/ext", "D4-flex/ext", "D5-flex/ext", "D1-abd/add"]
rise_s = 0.2
hold_s = 0.6
rest_s = 0.4
repetitions = 2
"#;

fn myo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myo"))
        .current_dir(dir)
        .env_remove("MYO_OUT_DIR")
        .args(args)
        .output()
        .expect("run myo")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path) {
    fs::write(dir.join("schedule.toml"), SCHEDULE).unwrap();
    ok(&myo(
        dir,
        &[
            "synth",
            "--schedule",
            "schedule.toml",
            "--seed",
            "7",
            "--out",
            ".",
        ],
    ));
}

#[test]
fn synth_matches_library_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let first = fs::read(dir.path().join("session.csv")).unwrap();
    synth(dir.path());
    assert_eq!(first, fs::read(dir.path().join("session.csv")).unwrap());

    let profile = make_profile(&MovementSchedule::from_toml(SCHEDULE).unwrap()).unwrap();
    let lib_path = dir.path().join("lib.csv");
    record_training_session(
        &profile,
        &SynergyModel::forearm_default(),
        FilterVariant::LowCost,
        7,
        Some(&lib_path),
    )
    .unwrap();
    assert_eq!(first, fs::read(&lib_path).unwrap());
}

#[test]
fn default_seed_is_fixed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        fs::write(d.path().join("schedule.toml"), SCHEDULE).unwrap();
        ok(&myo(d.path(), &["synth", "--schedule", "schedule.toml"]));
    }
    assert_eq!(
        fs::read(a.path().join("session.csv")).unwrap(),
        fs::read(b.path().join("session.csv")).unwrap()
    );
    let meta = fs::read_to_string(a.path().join("session.csv.meta")).unwrap();
    assert!(meta.contains("seed=42"));
}

#[test]
fn sweep_reports_every_dof_count() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(&myo(dir.path(), &["sweep", "session.csv", "--seed", "3"]));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let counts: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(counts, ["6", "15", "20", "15", "6", "1"]);

    let session = read_session_file(&dir.path().join("session.csv"))
        .unwrap()
        .labeled();
    let reports: Vec<_> = (1..=6)
        .map(|k| dof_sweep(&session, k, 3).unwrap())
        .collect();
    assert_eq!(csv, sweep_table_csv(&reports));
}

#[test]
fn tost_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let diffs: Vec<f64> = (0..18)
        .map(|i| ((i * 7919) % 23) as f64 / 10.0 - 1.1)
        .collect();
    let mut text = String::from("# paired differences\n");
    for d in &diffs {
        text.push_str(&format!("{d}\n"));
    }
    fs::write(dir.path().join("diffs.txt"), text).unwrap();
    ok(&myo(dir.path(), &["tost", "diffs.txt", "--alpha", "0.05"]));
    let expected = tost_min_bounds(&diffs, 0.05).unwrap().to_csv();
    assert_eq!(
        fs::read_to_string(dir.path().join("tost.csv")).unwrap(),
        expected
    );
}

#[test]
fn decode_with_missing_model_is_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = myo(
        dir.path(),
        &[
            "decode",
            "session.csv",
            "--model",
            "absent.txt",
            "--out",
            "results",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn train_then_decode_writes_trace_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(&myo(dir.path(), &["train", "session.csv"]));
    let out_dir = dir.path().join("env_out");
    let out = Command::new(env!("CARGO_BIN_EXE_myo"))
        .current_dir(dir.path())
        .env("MYO_OUT_DIR", &out_dir)
        .args(["decode", "session.csv", "--model", "model.txt"])
        .output()
        .unwrap();
    ok(&out);
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let rows = read_session_file(&dir.path().join("session.csv"))
        .unwrap()
        .len();
    assert_eq!(trace.lines().count(), rows + 1);
    assert!(trace.starts_with("t_ms,kin0,"));
    let timing = fs::read_to_string(out_dir.join("timing.txt")).unwrap();
    assert!(timing.contains(&format!("cycles {rows}")));
    assert!(timing.contains("dropped_samples 0"));
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "0.1\nzero\n").unwrap();
    assert_eq!(myo(dir.path(), &["tost", "bad.txt"]).status.code(), Some(3));
    fs::write(dir.path().join("one.txt"), "0.1\n").unwrap();
    assert_eq!(myo(dir.path(), &["tost", "one.txt"]).status.code(), Some(2));
    assert_eq!(myo(dir.path(), &["sweep"]).status.code(), Some(2));
    assert_eq!(
        myo(dir.path(), &["synth", "--filter", "fancy"])
            .status
            .code(),
        Some(2)
    );

    synth(dir.path());
    ok(&myo(dir.path(), &["train", "session.csv"]));
    // zero innovation noise and zero process noise make the update singular
    let model = fs::read_to_string(dir.path().join("model.txt")).unwrap();
    let mut zeroing = false;
    let broken: Vec<String> = model
        .lines()
        .map(|l| {
            if l.starts_with("matrix") || l.starts_with("vector") {
                zeroing = l.starts_with("matrix W") || l.starts_with("matrix Q");
                l.to_string()
            } else if zeroing {
                l.split_whitespace()
                    .map(|_| "0")
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                l.to_string()
            }
        })
        .collect();
    fs::write(dir.path().join("broken.txt"), broken.join("\n") + "\n").unwrap();
    let out = myo(
        dir.path(),
        &[
            "decode",
            "session.csv",
            "--model",
            "broken.txt",
            "--out",
            "o",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
