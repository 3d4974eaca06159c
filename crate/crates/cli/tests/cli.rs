mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn cfe(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cfe")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn optimize_toy_manifest() {
    let (_dir, manifest) = common::write(&common::toy_set());
    let (code, stdout, stderr) = cfe(&["optimize", "--manifest", path(&manifest), "--target", "0.7", "--alpha", "1"]);
    assert_eq!(code, 0, "{stderr}");
    let report: Value = serde_json::from_str(&stdout).unwrap();
    let w = report["weights"][0].as_f64().unwrap();
    assert!((w - 0.93333).abs() < 1e-3, "{w}");
    assert!((report["hourly_cost"].as_f64().unwrap() - 700.0).abs() < 0.7);
    assert_eq!(report["status"], "converged");
}

#[test]
fn precision_flag_controls_digits() {
    let (_dir, manifest) = common::write(&common::toy_set());
    let args = ["optimize", "--manifest", path(&manifest), "--target", "0.7", "--alpha", "1"];
    let (_, short, _) = cfe(&args);
    let mut full_args = args.to_vec();
    full_args.extend(["--precision", "full"]);
    let (_, full, _) = cfe(&full_args);
    let digits = |text: &str| -> usize {
        let v: Value = serde_json::from_str(text).unwrap();
        let s = v["weights"][0].to_string();
        s.trim_start_matches("0.").trim_start_matches('0').len()
    };
    assert!(digits(&short) <= 6);
    assert!(digits(&full) > 6);
}

#[test]
fn missing_manifest_exits_2_naming_the_path() {
    let (code, _, stderr) = cfe(&["optimize", "--manifest", "/no/such/manifest.json", "--target", "0.5", "--alpha", "0.9"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("/no/such/manifest.json"), "{stderr}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let (code, _, stderr) = cfe(&["optimize", "--bogus"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("Usage"), "{stderr}");
    let (code, _, _) = cfe(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn invalid_target_exits_2() {
    let (_dir, manifest) = common::write(&common::toy_set());
    let (code, _, stderr) = cfe(&["optimize", "--manifest", path(&manifest), "--target", "1.5", "--alpha", "1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("target"), "{stderr}");
}

#[test]
fn infeasible_target_exits_3_with_max_attainable() {
    let (_dir, manifest) = common::write(&common::toy_set());
    let (code, _, stderr) = cfe(&["optimize", "--manifest", path(&manifest), "--target", "1.0", "--alpha", "1"]);
    assert_eq!(code, 3);
    assert!(stderr.contains("0.750000"), "{stderr}");
}

#[test]
fn sweep_writes_timestamped_grid() {
    let (dir, manifest) = common::write(&common::small_set());
    let out = dir.path().join("reports");
    let (code, stdout, stderr) = cfe(&[
        "sweep", "--manifest", path(&manifest), "--alphas", "0.5,1.0", "--pcs", "0.3,0.5", "--out-dir", path(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let written = stdout.trim();
    let name = Path::new(written).file_name().unwrap().to_str().unwrap();
    assert!(name.starts_with("grid_") && name.ends_with(".csv"), "{name}");
    let text = fs::read_to_string(written).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("alpha,p_c,state"));
}

#[test]
fn multiload_marginal_and_frontier_run() {
    let (dir, manifest) = common::write(&common::small_set());
    let loads = dir.path().join("loads.json");
    fs::write(&loads, r#"[{"load": 0, "target": 0.4, "alpha": 0.75}, {"load": 1, "target": 0.3, "alpha": 0.75}]"#).unwrap();
    for strategy in ["sequential", "split", "joint"] {
        let (code, stdout, stderr) =
            cfe(&["multiload", "--manifest", path(&manifest), "--strategy", strategy, "--loads", path(&loads)]);
        assert_eq!(code, 0, "{strategy}: {stderr}");
        let v: Value = serde_json::from_str(&stdout).unwrap();
        assert_eq!(v["strategy"], strategy);
        assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    }
    let (code, _, _) = cfe(&["multiload", "--manifest", path(&manifest), "--strategy", "greedy", "--loads", path(&loads)]);
    assert_eq!(code, 2);

    let (code, stdout, stderr) =
        cfe(&["marginal", "--manifest", path(&manifest), "--target", "0.5", "--alpha", "0.75", "--epsilon", "0.02"]);
    assert_eq!(code, 0, "{stderr}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let total: f64 = v["shares"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-4);

    let out = dir.path().join("frontier.json");
    let (code, _, stderr) = cfe(&[
        "frontier", "--manifest", path(&manifest), "--target", "0.4", "--alpha", "0.75", "--beta", "0.9",
        "--subsets", "solar:1,wind:n@0..1", "--format", "json", "--out", path(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len() + v["skipped"].as_array().unwrap().len(), 2);

    let (code, _, _) = cfe(&[
        "frontier", "--manifest", path(&manifest), "--target", "0.4", "--alpha", "0.75", "--subsets", "solar:1",
    ]);
    assert_eq!(code, 2, "beta is required");
}

#[test]
fn simulate_writes_a_loadable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("synth.json");
    fs::write(
        &config,
        r#"{
            "scenarios": 2, "hours": 48, "seed": 1,
            "assets": [
                {"id": "s", "kind": "solar", "capacity": 100.0, "cost": 30.0, "capacity_factor": 0.25},
                {"id": "w", "kind": "wind", "capacity": 100.0, "cost": 50.0, "capacity_factor": 0.3}
            ],
            "loads": [{"id": "l", "mean": 80.0}],
            "correlation": {"entities": ["s", "w"], "matrix": [[1.0, -0.3], [-0.3, 1.0]]},
            "calibrate": false
        }"#,
    )
    .unwrap();
    let out = dir.path().join("scen");
    let (code, stdout, stderr) = cfe(&["simulate", "--config", path(&config), "--out", path(&out), "--seed", "9"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.trim().ends_with("manifest.json"));
    let set = cfe_core::scenario::load_scenarios(out.join("manifest.json")).unwrap();
    assert_eq!((set.asset_count(), set.scenarios(), set.hours()), (2, 2, 48));
    assert!(out.join("calibration.json").exists());
}

#[test]
fn optimize_writes_side_files() {
    let (dir, manifest) = common::write(&common::small_set());
    let report = dir.path().join("r.json");
    let weights = dir.path().join("w.csv");
    let heat = dir.path().join("h.csv");
    let (code, stdout, stderr) = cfe(&[
        "optimize", "--manifest", path(&manifest), "--load", "1", "--target", "0.5", "--alpha", "0.75",
        "--upper", "1,0.5,1", "--out", path(&report), "--weights-csv", path(&weights), "--heatmap", path(&heat),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["load"], 1);
    assert!(v["weights"][1].as_f64().unwrap() <= 0.5);
    assert_eq!(fs::read_to_string(&weights).unwrap().lines().count(), 4);
    let heat = fs::read_to_string(&heat).unwrap();
    assert_eq!(heat.lines().count(), 25);
    assert_eq!(heat.lines().next().unwrap(), "hour,d1,d2");
}
