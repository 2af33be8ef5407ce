use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn decoctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decoctl"))
        .args(args)
        .env_remove("DECOCTL_JOBS")
        .output()
        .expect("binary runs")
}

fn run(name: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = config(name);
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    decoctl(&args)
}

#[test]
fn filter_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("filter_onoff.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("filter.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,F"));
    assert_eq!(lines.count(), 801);
    assert!(String::from_utf8_lossy(&out.stdout).contains("fluence"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert_eq!(run("multi_pn_cross.json", dir.path(), &[]).status.code(), Some(0));
    }
    let x = fs::read(a.path().join("multi-pn.csv")).unwrap();
    let y = fs::read(b.path().join("multi-pn.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("invalid_onoff.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("on_off requires 0 < on_time <= period"));

    let missing = decoctl(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"kind": "filter", "modulation": {"kind": "constant"}, "t": 1.0, "frequencies": {"low": 0, "high": 1, "points": 3}}"#).unwrap();
    let out = decoctl(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/modulation"));
}

#[test]
fn horizon_beyond_recurrence_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&fs::read_to_string(config("oracle_an.json")).unwrap()).unwrap();
    value["modes"] = 8.into();
    value["horizon"] = 500.0.into();
    let path = dir.path().join("long.json");
    fs::write(&path, value.to_string()).unwrap();
    let out = decoctl(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("recurrence"));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("multi_pn_cross.json");
        let out = decoctl(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--jobs",
            jobs,
            "--axis",
            "/modulations/qubits/1/envelope/shift=3:10:8",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read(dir.path().join("multi-pn.sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn bad_sweep_axis_exits_2() {
    let cfg = config("multi_pn_cross.json");
    for axis in ["/grid/t_final=1:2:0", "/no/such/field=1,2", "/grid/t_final"] {
        let dir = tempfile::tempdir().unwrap();
        let out = decoctl(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--axis",
            axis,
        ]);
        assert_eq!(out.status.code(), Some(2), "axis {axis}");
    }
}

#[test]
fn zero_jobs_rejected() {
    let cfg = config("filter_onoff.json");
    let out = decoctl(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
