mod common;

use adaswitch::harness::config::load_config;
use adaswitch::harness::trace::{from_json_str, read_csv, to_csv_string, to_json_string, CSV_HEADER};
use adaswitch::harness::{evaluate_monitors, export_trace, parse_config, run_scenario, TraceFormat};
use adaswitch::Error;
use common::{impulses, quiet, scenario};
use serde_json::json;

fn minimal() -> serde_json::Value {
    json!({
        "horizon": 50,
        "plants": [{ "a": [-0.5], "b": [1.0] }],
        "reference": {
            "kind": "sinusoid_sum",
            "components": [{ "amplitude": 1.0, "frequency": 0.1 }],
            "nominal_sr_order": 2
        },
        "bus": { "d2": 2, "eth": 0.1, "minislots_per_cycle": 2 }
    })
}

#[test]
fn minimal_config_loads() {
    let cfg = parse_config(&minimal().to_string()).unwrap();
    assert_eq!(cfg.n_apps(), 1);
    assert_eq!(cfg.bus.d2, 2);
}

#[test]
fn non_minimum_phase_plant_names_root() {
    let mut c = minimal();
    c["plants"][0]["b"] = json!([1.0, 2.0]);
    let err = parse_config(&c.to_string()).unwrap_err();
    match &err {
        Error::NonMinimumPhase { re, im, modulus } => {
            assert!((re + 2.0).abs() < 1e-12 && im.abs() < 1e-12 && (modulus - 2.0).abs() < 1e-12);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("-2.000000"));
}

#[test]
fn gamma_of_one_is_rejected() {
    let mut c = minimal();
    c["gammas"] = json!([1.0, 0.5]);
    assert_eq!(parse_config(&c.to_string()).unwrap_err(), Error::InvalidGamma(1.0));
}

#[test]
fn parse_errors_carry_position() {
    let err = parse_config("{\n  \"horizon\": ,\n}").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn zero_horizon_gives_empty_trace() {
    let mut c = minimal();
    c["horizon"] = json!(0);
    let cfg = parse_config(&c.to_string()).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    assert!(trace.apps[0].rows.is_empty());
    assert!(trace.summary.aborted.is_none());
    assert_eq!(trace.summary.apps[0].switch_count, 0);
    assert_eq!(to_csv_string(&trace).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    assert!(evaluate_monitors(&trace, &cfg).passed());
}

#[test]
fn fixed_tt_run_settles() {
    let cfg = scenario("tt_only", 1, quiet());
    let trace = run_scenario(&cfg).unwrap();
    let s = &trace.summary.apps[0];
    assert!(s.settling_sample.unwrap() < cfg.horizon);
    let report = evaluate_monitors(&trace, &cfg);
    assert!(report.get("tracking", Some(0)).unwrap().passed);
    assert_eq!(report.get("regressor_rank", Some(0)).unwrap().measured, 2.0);
    assert!(report.passed(), "{:#?}", report);
}

#[test]
fn same_seed_same_bytes_other_seed_other_impulses() {
    let mut cfg = scenario("switching", 2, impulses());
    cfg.horizon = 1500;
    let a = to_csv_string(&run_scenario(&cfg).unwrap()).unwrap();
    let b = to_csv_string(&run_scenario(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    let c = to_csv_string(&run_scenario(&cfg).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn applications_do_not_interact_without_contention() {
    let plants = json!([
        { "a": [-1.2, 0.5], "b": [0.3, 0.1] },
        { "a": [-0.5], "b": [0.2], "disturbance": { "kind": "explicit", "times": [100, 700], "amplitudes": [1.0, -0.5], "min_gap": 500 } },
        { "a": [0.3, -0.2], "b": [1.0, 0.4, 0.1] }
    ]);
    let mut c = json!({
        "horizon": 1500,
        "plants": plants,
        "reference": { "kind": "square", "amplitude": 1.0, "period": 100 },
        "bus": { "d2": 3, "eth": 0.05, "minislots_per_cycle": 3 },
        "policy": "tt_only"
    });
    let joint = run_scenario(&parse_config(&c.to_string()).unwrap()).unwrap();
    for app in 0..3 {
        c["plants"] = json!([plants[app].clone()]);
        let alone = run_scenario(&parse_config(&c.to_string()).unwrap()).unwrap();
        let lhs: Vec<_> = joint.apps[app].rows.iter().map(|r| (r.k, r.y, r.u, r.e, r.v, r.theta_norm)).collect();
        let rhs: Vec<_> = alone.apps[0].rows.iter().map(|r| (r.k, r.y, r.u, r.e, r.v, r.theta_norm)).collect();
        assert_eq!(lhs, rhs, "application {app}");
    }
}

#[test]
fn json_export_has_per_app_rows_and_bus_log() {
    let mut cfg = scenario("switching", 2, impulses());
    cfg.horizon = 300;
    let trace = run_scenario(&cfg).unwrap();
    let text = to_json_string(&trace).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["apps"].as_array().unwrap().len(), 2);
    for app in v["apps"].as_array().unwrap() {
        assert_eq!(app["rows"].as_array().unwrap().len(), 300);
    }
    assert_eq!(v["bus_log"].as_array().unwrap().len(), 300);
    assert_eq!(from_json_str(&text).unwrap(), trace);
}

#[test]
fn files_round_trip_and_io_errors_name_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scenario("et_only", 1, quiet());
    cfg.horizon = 200;
    let trace = run_scenario(&cfg).unwrap();
    let csv = dir.path().join("t.csv");
    export_trace(&trace, &csv, TraceFormat::Csv).unwrap();
    let rows = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows, trace.apps[0].rows);
    let missing = dir.path().join("no/such/dir/t.json");
    let err = export_trace(&trace, &missing, TraceFormat::Json).unwrap_err();
    assert!(err.to_string().contains("no/such/dir"));
}

#[test]
fn file_reference_resolves_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<String> = (0..40).map(|k| format!("{}", (k as f64 * 0.2).sin())).collect();
    std::fs::write(dir.path().join("ref.txt"), format!("# reference\n{}\n", values.join("\n"))).unwrap();
    let mut c = minimal();
    c["horizon"] = json!(30);
    c["reference"] = json!({ "kind": "file", "path": "ref.txt" });
    let path = dir.path().join("scenario.json");
    std::fs::write(&path, c.to_string()).unwrap();
    let cfg = load_config(&path).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(trace.apps[0].rows[5].yref, (1.0f64).sin());

    c["horizon"] = json!(60);
    std::fs::write(&path, c.to_string()).unwrap();
    let cfg = load_config(&path).unwrap();
    assert!(matches!(run_scenario(&cfg), Err(Error::Reference(_))));
}

#[test]
fn short_dwell_time_is_named_in_boundedness_verdict() {
    let mut cfg = scenario("switching", 1, json!({ "kind": "random", "amplitudes": 5.0, "min_gap": 5 }));
    cfg.horizon = 2000;
    let cfg = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    let report = evaluate_monitors(&trace, &cfg);
    let v = report.get("boundedness", Some(0)).unwrap();
    assert!(v.detail.contains("dwell time 5"), "{v}");
}
