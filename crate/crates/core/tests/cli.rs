//! The `hawc` binary driven end to end through temporary directories.

use std::path::Path;
use std::process::{Command, Output};

fn hawc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawc")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

#[test]
fn compress_writes_points_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pts.csv");
    let o = hawc(&["compress", "--target", "grid:", "--k", "48", "--seed", "3", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("dim0,dim1"));
    assert_eq!(text.lines().count(), 49);
    assert_eq!(data_rows(&dir.path().join("pts.loss.csv")).len(), 1000);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pts.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["k"], 48);
    assert_eq!(manifest["config"]["seed"], 3);
}

#[test]
fn missing_target_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let out = dir.path().join("pts.csv");
    let spec = format!("csv:{}", p(&missing));
    let o = hawc(&["compress", "--target", &spec, "--k", "4", "--out", p(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let o = hawc(&["compress", "--target", "gaussian:dim=0", "--k", "1", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hawc(&["compress", "--k", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_next_appends_to_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.csv");
    let args = ["sample-next", "--target", "gaussian:dim=2", "--history", p(&ledger), "--count", "5", "--iters", "200"];
    for _ in 0..2 {
        let o = hawc(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 5);
    }
    let rows = data_rows(&ledger);
    assert_eq!(rows.len(), 10);
    let indices: Vec<u64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(indices, (1..=10).collect::<Vec<_>>());
    assert_eq!(std::fs::read_to_string(&ledger).unwrap().lines().next(), Some("index,dim0,dim1"));
}

#[test]
fn corrupt_ledger_is_left_alone() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.csv");
    let corrupt = "index,dim0,dim1\n1,0.5,0.25\n2,oops,1.0\n";
    std::fs::write(&ledger, corrupt).unwrap();
    let o = hawc(&["sample-next", "--target", "gaussian:dim=2", "--history", p(&ledger), "--iters", "50"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ledger.csv"), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&ledger).unwrap(), corrupt);
}

#[test]
fn compress_manifest_replays_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pts.csv");
    let o = hawc(&["compress", "--target", "grid:", "--k", "12", "--iters", "300", "--seed", "8", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let replay = dir.path().join("replay.csv");
    let manifest = dir.path().join("pts.manifest.json");
    let o = hawc(&["compress", "--manifest", p(&manifest), "--out", p(&replay)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&replay).unwrap());
}

#[test]
fn sample_next_manifest_replays_from_restored_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.csv");
    let seed_rows = "index,dim0,dim1\n1,0,0\n";
    std::fs::write(&ledger, seed_rows).unwrap();
    let o = hawc(&["sample-next", "--target", "gaussian:dim=2", "--history", p(&ledger), "--count", "3", "--iters", "150"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read(&ledger).unwrap();
    let manifest = dir.path().join("ledger.manifest.json");

    // replay refuses a ledger in a different state
    let o = hawc(&["sample-next", "--manifest", p(&manifest)]);
    assert!(!o.status.success());
    assert_eq!(std::fs::read(&ledger).unwrap(), first);

    std::fs::write(&ledger, seed_rows).unwrap();
    let o = hawc(&["sample-next", "--manifest", p(&manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&ledger).unwrap(), first);
}

#[test]
fn evaluate_prints_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "dim0,dim1\n-1.5,-1.5\n1.5,1.5\n0.5,-0.5\n").unwrap();
    let o = hawc(&["evaluate", "--points", p(&pts), "--target", "grid:", "--samples", "5000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["energy_distance_sq"].as_f64().unwrap() > 0.0);
    assert!(v["min_pairwise_distance"].as_f64().unwrap() > 1.0);
    let counts: Vec<u64> = v["allocation_counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(counts.len(), 16);
    assert_eq!(counts.iter().sum::<u64>(), 3);
}

#[test]
fn evaluate_single_point_has_no_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("one.csv");
    std::fs::write(&pts, "dim0\n0.0\n").unwrap();
    let o = hawc(&["evaluate", "--points", p(&pts), "--target", "gaussian:dim=1", "--samples", "1000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["min_pairwise_distance"].is_null());
    assert!(v["allocation_counts"].is_null());
}

#[test]
fn evaluate_empirical_target_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    let body: String = (0..40).map(|i| format!("{},{}\n", (i % 7) as f64 * 0.3, (i / 7) as f64 * 0.2)).collect();
    std::fs::write(&pts, format!("dim0,dim1\n{body}")).unwrap();
    let spec = format!("csv:{}", p(&pts));
    let o = hawc(&["evaluate", "--points", p(&pts), "--target", &spec, "--samples", "20000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["energy_distance_sq"].as_f64().unwrap() < 5e-3, "{v}");
}

#[test]
fn plot_draws_centers_and_points() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    let o = hawc(&["compress", "--target", "grid:", "--k", "48", "--iters", "100", "--out", p(&pts)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = dir.path().join("plot.svg");
    let o = hawc(&["plot", "--points", p(&pts), "--target", "grid:", "--out", p(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert_eq!(text.matches(r#"class="center""#).count(), 16);
    assert_eq!(text.matches(r#"class="point""#).count(), 48);
    assert_eq!(text.matches(r#"fill="red""#).count(), 16);
    assert_eq!(text.matches(r#"fill="blue""#).count(), 48);
}

#[test]
fn plot_labels_ledger_indices() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.csv");
    let o = hawc(&["sample-next", "--target", "gaussian:dim=2", "--history", p(&ledger), "--count", "10", "--iters", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = dir.path().join("plot.svg");
    let o = hawc(&["plot", "--points", p(&ledger), "--labels", "--out", p(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches(r#"class="label""#).count(), 10);
    for i in 1..=10 {
        assert!(text.contains(&format!(">{i}</text>")), "label {i}");
    }
}

#[test]
fn plot_rejects_empty_points() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("empty.csv");
    std::fs::write(&pts, "").unwrap();
    let svg = dir.path().join("plot.svg");
    let o = hawc(&["plot", "--points", p(&pts), "--out", p(&svg)]);
    assert!(!o.status.success());
    assert!(!svg.exists());
}
