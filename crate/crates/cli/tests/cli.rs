use std::fs;
use std::path::Path;
use std::process::Command;

use jamguard::orchestrator::SweepAxis;
use jamguard::Setup;
use jamguard_cli::{load_summary, parse_args, write_atomic, CliError, Mode, ScenarioSource, EXIT_CONFIG};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jamguard"))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn parses_run_with_setup_and_seed() {
    let spec = parse_args(["jamguard", "run", "--setup", "b", "--seed", "7"]).unwrap();
    assert_eq!(spec.mode, Mode::Run);
    assert_eq!(spec.source, ScenarioSource::Preset(Setup::B));
    assert_eq!(spec.seed, Some(7));
    assert!(spec.irs);
}

#[test]
fn parses_no_irs_with_defaults() {
    let spec = parse_args(["jamguard", "run", "--no-irs"]).unwrap();
    assert_eq!(spec.source, ScenarioSource::Preset(Setup::A));
    assert!(!spec.irs);
    assert_eq!(spec.out_dir, Path::new("out"));
    assert!(!spec.config().unwrap().irs.enabled);
}

#[test]
fn parses_sweep_values() {
    let spec = parse_args(["jamguard", "sweep", "--axis", "M", "--values", "50,100,150"]).unwrap();
    match spec.mode {
        Mode::Sweep { axis, values, benchmark } => {
            assert_eq!(axis, SweepAxis::M);
            assert_eq!(values, vec![50.0, 100.0, 150.0]);
            assert!(!benchmark);
        }
        Mode::Run => panic!("expected a sweep"),
    }
}

#[test]
fn rejects_bad_arguments_with_usage_code() {
    for argv in [
        vec!["jamguard", "run", "--bogus"],
        vec!["jamguard", "sweep", "--axis", "height", "--values", "1"],
        vec!["jamguard", "run", "--max-iter", "0"],
        vec!["jamguard", "run", "--scenario", "x.json", "--setup", "a"],
    ] {
        let err = parse_args(argv.clone()).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG, "{argv:?}");
    }
    let help = parse_args(["jamguard", "--help"]).unwrap_err();
    assert!(matches!(help, CliError::Usage(_)));
    assert_eq!(help.exit_code(), 0);
}

#[test]
fn run_writes_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let status = bin().args(["run", "--setup", "a", "--seed", "3", "--out-dir"]).arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(0));

    let summary = load_summary(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.self_checks.iter().all(|c| c.passed));
    assert_eq!(summary.variant, "irs");
    let n = summary.config.build().unwrap().num_slots;

    let traj = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(traj[0], ["n", "x", "y", "z"]);
    assert_eq!(traj.len(), n + 2);

    let slots = csv_rows(&out.join("slots.csv"));
    let col = slots[0].iter().position(|h| h == "rate_bits").unwrap();
    let total: f64 = slots[1..].iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
    let reported = summary.totals.throughput_bits.0.unwrap();
    assert!((total - reported).abs() <= 1e-6 * reported, "{total} vs {reported}");

    let trace = csv_rows(&out.join("trace.csv"));
    assert_eq!(trace[1][1], "init");
    let ees: Vec<f64> = trace[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(ees.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6)));
    assert!(fs::read_dir(&out).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .env("JAMGUARD_THREADS", threads)
            .args(["run", "--setup", "b", "--out-dir"])
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert_eq!(status.code(), Some(0));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "4"));
    for f in ["trajectory.csv", "slots.csv", "trace.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_writes_one_row_per_point_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let status = bin()
        .args(["sweep", "--axis", "pbar_dbm", "--values", "16,20", "--benchmark", "--max-iter", "3", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows[0], ["axis_value", "variant", "throughput", "energy", "ee"]);
    assert_eq!(rows.len(), 5);
    let variants: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(variants, ["irs", "no_irs", "irs", "no_irs"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().args(["run", "--scenario"]).arg(dir.path().join("nope.json")).output().unwrap().status;
    assert_eq!(missing.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"uav": {"dt": -1}}"#).unwrap();
    assert_eq!(bin().args(["run", "--scenario"]).arg(&bad).output().unwrap().status.code(), Some(2));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let io = bin().args(["run", "--out-dir"]).arg(blocker.join("sub")).output().unwrap().status;
    assert_eq!(io.code(), Some(1));

    assert_eq!(bin().args(["run", "--wat"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    let threads = bin().env("JAMGUARD_THREADS", "zero").arg("run").output().unwrap().status;
    assert_eq!(threads.code(), Some(2));
}

#[test]
fn scenario_file_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(&cfg, r#"{"setup": "b", "uav": {"T": 20, "dt": 1}, "irs": {"mx": 4, "mz": 2}}"#).unwrap();
    let out = dir.path().join("o");
    let status = bin().args(["run", "--seed", "11", "--scenario"]).arg(&cfg).arg("--out-dir").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    let summary = load_summary(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.meta.seed, Some(11));
    assert_eq!(csv_rows(&out.join("trajectory.csv")).len(), 22);
}

#[test]
fn atomic_write_replaces_contents() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.txt");
    write_atomic(&p, "one").unwrap();
    write_atomic(&p, "two").unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), "two");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}
