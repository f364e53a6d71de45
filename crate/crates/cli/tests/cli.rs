use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fenvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fenvm")).args(args).output().unwrap()
}

fn run_in(dir: &Path, config: Option<&str>, command: &str, seed: &str) -> Output {
    let out = dir.join("out");
    let mut args = vec!["--out", out.to_str().unwrap(), "--seed", seed, "--command", command];
    let cfg = dir.join("run.ini");
    if let Some(text) = config {
        fs::write(&cfg, text).unwrap();
        args.extend(["--config", cfg.to_str().unwrap()]);
    }
    fenvm(&args)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn unknown_command_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), None, "nope", "0");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn missing_command_flag_is_a_usage_error() {
    assert_eq!(fenvm(&["--seed", "1"]).status.code(), Some(1));
    assert_eq!(fenvm(&["--seed", "x", "--command", "iv"]).status.code(), Some(1));
    assert_eq!(fenvm(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("absent.ini");
    let o = fenvm(&["--config", cfg.to_str().unwrap(), "--command", "iv", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_config_reports_line_and_column() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), Some("[device]\nd_fe_nm = -1\n"), "iv", "0");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column 11"), "{err}");
    assert!(!d.path().join("out").join("iv.csv").exists());
}

#[test]
fn infeasible_calibration_is_a_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), Some("[device]\nselection_ratio = 1e9\n"), "iv", "0");
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = fenvm(&["--out", out.to_str().unwrap(), "--command", "iv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_in(a.path(), None, "bench", "7").status.success());
    assert!(run_in(b.path(), None, "bench", "7").status.success());
    for f in ["bench.csv", "run_meta.json"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn seed_changes_noisy_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_in(a.path(), None, "scheme", "1").status.success());
    assert!(run_in(b.path(), None, "scheme", "2").status.success());
    let x = fs::read(a.path().join("out/trace.csv")).unwrap();
    let y = fs::read(b.path().join("out/trace.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn zero_bias_grid_gives_zero_current() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "[iv]\nv_min_mv = 0\nv_max_mv = 0\ntemps_k = 300, 350\nstates_w = 0, 0.5, 1\n";
    let o = run_in(d.path(), Some(cfg), "iv", "0");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&d.path().join("out/iv.csv"));
    assert_eq!(r.len(), 6);
    for row in r {
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn current_density_is_area_independent() {
    let d = tempfile::tempdir().unwrap();
    assert!(run_in(d.path(), None, "scaling", "0").status.success());
    let r = rows(&d.path().join("out/scaling.csv"));
    let mut by_v = std::collections::BTreeMap::<String, Vec<f64>>::new();
    for row in &r {
        by_v.entry(row[1].clone()).or_default().push(row[3].parse().unwrap());
    }
    assert!(by_v.values().all(|js| js.len() == 3));
    for js in by_v.values() {
        for j in js {
            assert!((j - js[0]).abs() <= 1e-12 * js[0].abs().max(f64::MIN_POSITIVE), "{js:?}");
        }
    }
}

#[test]
fn config_file_is_left_untouched() {
    let d = tempfile::tempdir().unwrap();
    let text = "# comment\n[device]\nd_fe_nm = 5\n\n[d2d]\ndevices = 100\n";
    assert!(run_in(d.path(), Some(text), "d2d", "3").status.success());
    assert_eq!(fs::read_to_string(d.path().join("run.ini")).unwrap(), text);
}

#[test]
fn run_meta_records_the_run() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), Some("[retention]\npoints = 4\n"), "retention", "11");
    assert!(o.status.success());
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("out/run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "retention");
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    let files: Vec<&str> = meta["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(files.contains(&"retention.csv"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("retention.csv"));
}

#[test]
fn every_command_runs_on_defaults() {
    for c in fenvm_cli::COMMANDS {
        let d = tempfile::tempdir().unwrap();
        let cfg = "[d2d]\ndevices = 200\n[fitA]\nseeds = 5\n[mvm]\ntrials = 5\n";
        let o = run_in(d.path(), Some(cfg), c, "0");
        assert!(o.status.success(), "{c}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
