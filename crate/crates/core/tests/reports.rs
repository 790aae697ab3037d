mod common;

use factory_tsn::report;
use factory_tsn::scenario::PresetId;
use factory_tsn::sim::run;
use factory_tsn::sweep::{sweep, SweepBase};
use factory_tsn::{SimError, SimTime};

#[test]
fn empty_horizon_gives_zero_report() {
    let cfg = common::preset(PresetId::TsnFp, &["horizon=0s"]);
    let r = run(&cfg).unwrap();
    assert_eq!(r.events_executed, 0);
    assert!(r.apps.iter().all(|a| a.frames_sent == 0 && a.rdr_percent.is_none()));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(report::write_run(dir.path(), &cfg, &r).unwrap().len(), 5);
    let json: serde_json::Value = serde_json::from_slice(&report::report_json(&cfg, &r)).unwrap();
    assert_eq!(json["result"]["horizon"], "0s");
}

#[test]
fn unwritable_directory_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = common::preset(PresetId::TsnSp, &["horizon=1ms"]);
    let r = run(&cfg).unwrap();
    let err = report::write_run(&blocker.join("out"), &cfg, &r).unwrap_err();
    assert!(matches!(err, SimError::Io { .. }));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn rerun_is_byte_identical() {
    let cfg = common::preset(PresetId::TsnCbs, &["horizon=300ms", "seed=7"]);
    let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(a.trace_digest, b.trace_digest);
    assert_eq!(report::report_json(&cfg, &a), report::report_json(&cfg, &b));
    assert_eq!(report::timeseries_csv(&a), report::timeseries_csv(&b));
}

#[test]
fn seeds_change_the_trace() {
    let a = run(&common::preset(PresetId::TsnSp, &["horizon=100ms", "seed=1"])).unwrap();
    let b = run(&common::preset(PresetId::TsnSp, &["horizon=100ms", "seed=2"])).unwrap();
    assert_ne!(a.trace_digest, b.trace_digest);
}

#[test]
fn requirements_rows_follow_table() {
    let cfg = common::preset(PresetId::Enhanced, &["horizon=500ms"]);
    let text = String::from_utf8(report::requirements_csv(&cfg, &run(&cfg).unwrap())).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("app,max_latency_ms,min_rdr_percent,rdr,delay,passed"));
    assert_eq!(lines.next(), Some("RemoteControl,1.0,99.9,pass,pass,true"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn sweep_rows_match_standalone_runs() {
    let values: Vec<String> = ["0.2", "0.6"].map(String::from).to_vec();
    let base = SweepBase::Preset(PresetId::TsnCbs, vec!["horizon=200ms".parse().unwrap()]);
    let s = sweep(&base, "cbs_fraction", &values).unwrap();
    assert_eq!(s.rows.len(), 2);
    for row in &s.rows {
        let alone = run(&common::preset(PresetId::TsnCbs, &["horizon=200ms", &format!("cbs_fraction={}", row.value)])).unwrap();
        assert_eq!(row.result, alone);
    }
    assert_eq!(report::series_csv(&s).split(|&b| b == b'\n').filter(|l| !l.is_empty()).count(), 3);
}

#[test]
fn sweep_over_one_value_equals_run() {
    let base = SweepBase::Preset(PresetId::Enhanced, vec!["horizon=200ms".parse().unwrap()]);
    let s = sweep(&base, "compression_ratio", &["22".to_string()]).unwrap();
    assert_eq!(s.rows[0].result, run(&common::preset(PresetId::Enhanced, &["horizon=200ms"])).unwrap());
}

#[test]
fn sweep_rejects_other_parameters() {
    let base = SweepBase::Preset(PresetId::Basic, vec![]);
    for p in ["seed", "horizon", "bogus"] {
        assert!(matches!(sweep(&base, p, &["1".into()]), Err(SimError::Config(_))));
    }
    assert!(sweep(&base, "cbs_fraction", &["0.5".into()]).is_err());
}

#[test]
fn compression_ratio_knee() {
    let values: Vec<String> = ["1", "2", "11", "22", "44"].map(String::from).to_vec();
    let base = SweepBase::Preset(PresetId::Enhanced, vec!["horizon=1s".parse().unwrap()]);
    let s = sweep(&base, "compression_ratio", &values).unwrap();
    let ar: Vec<f64> = s.rows.iter().map(|r| r.result.app(factory_tsn::frame::ApplicationId::Ar).rdr_percent.unwrap()).collect();
    assert!(ar[0] < 20.0 && ar[2] < 99.9, "{ar:?}");
    assert!(ar[3] >= 99.9 && ar[4] >= 99.9, "{ar:?}");
}

#[test]
fn horizon_time_in_toml_round_trips() {
    let cfg = common::preset(PresetId::TsnTas, &["horizon=250ms"]);
    assert_eq!(cfg.horizon, SimTime::from_millis(250));
    let back = factory_tsn::scenario::ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}
