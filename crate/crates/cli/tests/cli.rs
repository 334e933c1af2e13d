use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn psns(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psns")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, doc: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, doc).unwrap();
    path.display().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{"profile":{"kind":"prouse","nu":0.1},"geometry":{"n":2},
    "integration":{"dt":0.01,"horizon":0.1,"seed":3,
        "initial_condition":{"kind":"random","amplitude":0.3,"bound":1}}}"#;

#[test]
fn simulate_with_zero_horizon_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"profile":{"kind":"linear","nu":0.1},"integration":{"horizon":0}}"#);
    let o = psns(&["simulate", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    assert_eq!(csv, "t,h_norm,v_norm,growth_norm,stopped\n");
    let m = read_json(&dir.path().join("run/manifest.json"));
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["partial"], false);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert!(files.contains(&"trajectory.csv") && files.contains(&"config.json"));
}

#[test]
fn simulate_writes_round_trip_csv_and_manifest_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let o = psns(&["simulate", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 5);
        for c in &cells[..4] {
            let mantissa = c.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{c}");
            let x: f64 = c.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), *c);
        }
        assert_eq!(cells[4], "0");
    }
    let m = read_json(&dir.path().join("run/manifest.json"));
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join("run").join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
    let echoed = std::fs::read_to_string(dir.path().join("run/config.json")).unwrap();
    let again = psns_core::io::parse_config(&echoed).unwrap();
    assert_eq!(psns_core::io::config_digest(&again), m["config_digest"].as_u64().unwrap());
}

#[test]
fn resumed_simulation_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = write_config(dir.path(), "full.json", SMALL);
    let half = write_config(dir.path(), "half.json", &SMALL.replace("\"horizon\":0.1", "\"horizon\":0.05"));
    assert_eq!(psns(&["simulate", "--config", &full, "--out", "a"], dir.path()).status.code(), Some(0));
    assert_eq!(psns(&["simulate", "--config", &half, "--out", "b"], dir.path()).status.code(), Some(0));
    let o = psns(&["simulate", "--config", &full, "--out", "c", "--resume", "b/checkpoint.bin"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = std::fs::read(dir.path().join("a/checkpoint.bin")).unwrap();
    let c = std::fs::read(dir.path().join("c/checkpoint.bin")).unwrap();
    assert_eq!(a, c);
    let tail_a: Vec<String> = std::fs::read_to_string(dir.path().join("a/trajectory.csv")).unwrap().lines().skip(6).map(String::from).collect();
    let tail_c: Vec<String> = std::fs::read_to_string(dir.path().join("c/trajectory.csv")).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(tail_a, tail_c);

    std::fs::write(dir.path().join("bad.bin"), b"XXXX0000").unwrap();
    let o = psns(&["simulate", "--config", &full, "--out", "d", "--resume", "bad.bin"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(read_json(&dir.path().join("d/manifest.json"))["partial"], true);
}

#[test]
fn periodic_checkpoints_do_not_change_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let plain = write_config(dir.path(), "p.json", SMALL);
    let chk = write_config(dir.path(), "k.json", &SMALL.replace("\"seed\":3", "\"seed\":3,\"checkpoint_every\":3"));
    assert_eq!(psns(&["simulate", "--config", &plain, "--out", "a"], dir.path()).status.code(), Some(0));
    assert_eq!(psns(&["simulate", "--config", &chk, "--out", "b"], dir.path()).status.code(), Some(0));
    for f in ["trajectory.csv", "checkpoint.bin"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn seed_flag_overrides_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    assert_eq!(psns(&["simulate", "--config", &cfg, "--out", "a", "--seed", "99"], dir.path()).status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("a/config.json"))["integration"]["seed"], 99);
    assert_eq!(read_json(&dir.path().join("a/manifest.json"))["seeds"][0], 99);
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let b3 = write_config(dir.path(), "b3.json", r#"{"profile":{"kind":"prouse","nu":0.1,"b":3}}"#);
    let o = psns(&["simulate", "--config", &b3, "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("b >= 4"), "{}", stderr(&o));

    let unknown = write_config(dir.path(), "u.json", r#"{"profile":{"kind":"linear","nu":0.1},"noize":{}}"#);
    let o = psns(&["simulate", "--config", &unknown, "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("noize"), "{}", stderr(&o));

    let dup = write_config(
        dir.path(),
        "d.json",
        r#"{"profile":{"kind":"linear","nu":0.1},"noise":{"modes":[{"k":[0,1,0],"j":2,"sigma":1},{"k":[0,1,0],"j":2,"sigma":1}]}}"#,
    );
    let o = psns(&["ensemble", "--config", &dup, "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));

    let o = psns(&["certify", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = psns(&["certify", "--config", "missing.json", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn certify_default_document_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"profile":{"kind":"prouse","nu":0.1}}"#);
    let o = psns(&["certify", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports = read_json(&dir.path().join("run/certify.json"));
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), psns_core::diagnostics::INEQUALITIES.len());
    for r in reports {
        assert_eq!(r["pass"], true, "{r}");
        assert_eq!(r["samples"], 1000);
    }
}

#[test]
fn uniqueness_with_identical_data_has_zero_functional() {
    let dir = tempfile::tempdir().unwrap();
    let doc = SMALL.replace(
        "\"geometry\":{\"n\":2},",
        "\"geometry\":{\"n\":2},\"diagnostics\":{\"uniqueness\":{\"pairs\":3,\"cb_trials\":100,\"identical\":true}},",
    );
    let cfg = write_config(dir.path(), "c.json", &doc);
    let o = psns(&["uniqueness", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&dir.path().join("run/uniqueness.json"));
    assert_eq!(r["verdict"]["lhs"], 0.0);
    assert_eq!(r["verdict"]["rhs"], 0.0);
    assert_eq!(r["verdict"]["pass"], true);
    assert_eq!(r["verdict"]["records"].as_array().unwrap().len(), 3);
    assert!(r["c_b"].as_f64().unwrap() >= 0.0);
}

#[test]
fn uniqueness_with_distinct_data_reports_the_functional() {
    let dir = tempfile::tempdir().unwrap();
    let doc = SMALL.replace("\"geometry\":{\"n\":2},", "\"geometry\":{\"n\":2},\"diagnostics\":{\"uniqueness\":{\"pairs\":2,\"cb_trials\":100}},");
    let cfg = write_config(dir.path(), "c.json", &doc);
    let o = psns(&["uniqueness", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&dir.path().join("run/uniqueness.json"));
    let (lhs, rhs) = (r["verdict"]["lhs"].as_f64().unwrap(), r["verdict"]["rhs"].as_f64().unwrap());
    assert!(rhs > 0.0 && lhs <= rhs, "{lhs} {rhs}");
}

#[test]
fn scaling_reports_first_order_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"profile":{"kind":"pure_power","nu":0.1},"geometry":{"n":2},
        "noise":{"sigma":0.2},
        "integration":{"dt":0.01,"horizon":0.1,"initial_condition":{"kind":"random","amplitude":0.3,"bound":1}},
        "diagnostics":{"members":2,"structure":{"points_per_axis":3}}}"#;
    let cfg = write_config(dir.path(), "c.json", doc);
    let o = psns(&["scaling", "--config", &cfg, "--out", "run"], dir.path());
    let r = read_json(&dir.path().join("run/scaling.json"));
    let ratio = r["discrepancy_ratio"].as_f64().unwrap();
    assert!((ratio - 2.0).abs() < 0.6, "{ratio}");
    assert_eq!(r["pathwise_pass"], true);
    assert_eq!(o.status.code(), Some(if r["moments_pass"] == true { 0 } else { 2 }));

    let prouse = write_config(dir.path(), "p.json", SMALL);
    assert_eq!(psns(&["scaling", "--config", &prouse, "--out", "p"], dir.path()).status.code(), Some(3));
}

#[test]
fn structure_writes_table_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"profile":{"kind":"prouse","nu":0.1},"geometry":{"n":2},
        "integration":{"dt":0.01,"horizon":0.2,"snapshot_every":5,
            "initial_condition":{"kind":"random","amplitude":0.3,"bound":1}},
        "diagnostics":{"members":2,"burn_in":0.1,"structure":{"points_per_axis":3,"orders":[2,3]}}}"#;
    let cfg = write_config(dir.path(), "c.json", doc);
    let o = psns(&["structure", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("run/structure.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "separation,order,mean,std_error,samples");
    assert_eq!(csv.lines().count(), 1 + 5 * 2);
    let fits = read_json(&dir.path().join("run/structure_fit.json"));
    assert_eq!(fits.as_array().unwrap().len(), 2);

    let short = write_config(dir.path(), "s.json", &doc.replace("\"burn_in\":0.1", "\"burn_in\":5"));
    assert_eq!(psns(&["structure", "--config", &short, "--out", "s"], dir.path()).status.code(), Some(3));
}

#[test]
fn ensemble_summary_has_moment_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let doc = SMALL.replace("\"geometry\":{\"n\":2},", "\"geometry\":{\"n\":2},\"diagnostics\":{\"members\":3},");
    let cfg = write_config(dir.path(), "c.json", &doc);
    let o = psns(&["ensemble", "--config", &cfg, "--out", "run", "--threads", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(&dir.path().join("run/summary.json"));
    assert_eq!(s["completed"], 3);
    assert_eq!(s["moments"]["sup_h_p"]["count"], 3);
    assert!(s["moments"]["int_v_sq"]["mean"].as_f64().unwrap() > 0.0);
}
