use std::path::Path;
use std::process::{Command, Output};

fn tsnsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsnsim"))
        .args(args)
        .env("TSNSIM_OUT", out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn presets_list_names_all_seven() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsnsim(&["presets", "list"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for p in ["basic", "tsn-sp", "tsn-cbs", "tsn-tas", "tsn-fp", "upgrade", "enhanced"] {
        assert!(text.lines().any(|l| l.starts_with(p)), "{p} missing");
    }
}

#[test]
fn run_writes_reports_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsnsim(&["run", "--preset", "tsn-sp", "--horizon", "100ms"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["app_stats.csv", "requirements.csv", "ports.csv", "port_timeseries.csv", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn check_flag_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let fail = tsnsim(&["run", "--preset", "basic", "--horizon", "200ms", "--out", out, "--check"], dir.path());
    assert_eq!(fail.status.code(), Some(1));
    let pass = tsnsim(&["run", "--preset", "enhanced", "--horizon", "200ms", "--out", out, "--check"], dir.path());
    assert_eq!(pass.status.code(), Some(0));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["run", "--preset", "nope"],
        &["run", "--preset", "basic", "--override", "cbs_fraction=0.5"],
        &["run", "--preset", "tsn-cbs", "--override", "cbs_fraction=1.5"],
        &["validate", "--config", "/does/not/exist.toml"],
        &["sweep", "--preset", "tsn-cbs", "--param", "seed", "--values", "1,2"],
    ];
    for args in cases {
        assert_eq!(tsnsim(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_is_a_runtime_fault() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = tsnsim(&["run", "--preset", "tsn-sp", "--horizon", "10ms", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn expanded_preset_round_trips_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsnsim(&["presets", "expand", "tsn-tas", "--override", "horizon=50ms"], dir.path());
    assert!(o.status.success());
    let path = dir.path().join("tas.toml");
    std::fs::write(&path, &o.stdout).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = tsnsim(&["run", "--config", path.to_str().unwrap(), "--out", a.to_str().unwrap()], dir.path());
    let rb = tsnsim(&["run", "--preset", "tsn-tas", "--horizon", "50ms", "--out", b.to_str().unwrap()], dir.path());
    assert!(ra.status.success() && rb.status.success());
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());
    let cmp = tsnsim(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--check"], dir.path());
    assert_eq!(cmp.status.code(), Some(0));
    assert!(stdout(&cmp).contains("identical"));
}

#[test]
fn compare_reports_differences() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    tsnsim(&["run", "--preset", "tsn-sp", "--horizon", "50ms", "--out", a.to_str().unwrap()], dir.path());
    tsnsim(&["run", "--preset", "tsn-tas", "--horizon", "50ms", "--out", b.to_str().unwrap()], dir.path());
    let cmp = tsnsim(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--check"], dir.path());
    assert_eq!(cmp.status.code(), Some(1));
    assert!(stdout(&cmp).contains("RemoteControl"));
}

#[test]
fn sweep_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsnsim(
        &["sweep", "--preset", "tsn-cbs", "--horizon", "100ms", "--param", "cbs_fraction", "--values", "0.1,0.5,0.9"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("series.json").is_file());
}
