use std::fs;
use std::path::Path;

use cpte_cli::run_args;

fn run(args: &[&str]) -> serde_json::Value {
    let mut full = vec!["cpte"];
    full.extend_from_slice(args);
    run_args(full).unwrap_or_else(|e| panic!("{args:?}: {e:#}"))
}

fn synth(dir: &Path, a: &str, b: &str, channels: &str, samples: &str) -> String {
    let out = dir.join("cohort");
    let out = out.to_str().unwrap();
    run(&["synth", "--out", out, "--group-a", a, "--group-b", b, "--seed", "7", "--channels", channels, "--samples", samples]);
    format!("{out}/manifest.json")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# run_config={"));
    lines.skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn usage_errors() {
    assert!(run_args(["cpte", "synth", "--out", "x", "--group-a", "3:0.2", "--group-b", "3:0.6"]).is_err());
    assert!(run_args(["cpte", "synth", "--out", "x", "--group-a", "0:0.2", "--group-b", "3:0.6", "--seed", "1"]).is_err());
    assert!(run_args(["cpte", "classify", "--out", "x", "--manifest", "m.json"]).is_err());
}

#[test]
fn cpte_writes_one_file_per_epoch_and_group_means() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "1:0.2", "1:0.6", "4", "120000");
    let out = dir.path().join("out");
    let summary = run(&["cpte", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--seed", "1", "--bands", "all"]);
    assert_eq!(summary["matrix_files"], 300);
    let band = out.join("matrices/all");
    for s in ["A001", "B001"] {
        assert_eq!(fs::read_dir(band.join(s)).unwrap().count(), 150);
    }
    let mean: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(band.join("group_mean_GroupA.json")).unwrap()).unwrap();
    assert_eq!(mean["n_epochs"], 150);
    assert_eq!(mean["run_config"]["bands"][0]["high_hz"], 44.0);
    let epoch: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(band.join("B001/epoch_0007.json")).unwrap()).unwrap();
    assert_eq!(epoch["channel_names"].as_array().unwrap().len(), 4);
    assert_eq!(epoch["values"][2][2], 0.0);
    assert_eq!(epoch["values"][1][3], epoch["values"][3][1]);
}

#[test]
fn missing_recording_names_the_subject() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "1:0.2", "1:0.6", "3", "4000");
    fs::remove_file(dir.path().join("cohort/B001.bin")).unwrap();
    let err = run_args(["cpte", "cpte", "--manifest", &manifest, "--out", dir.path().join("o").to_str().unwrap(), "--seed", "1"])
        .unwrap_err();
    assert!(format!("{err:#}").contains("B001"), "{err:#}");
}

#[test]
fn density_stats_sweep_classify() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "10:0.2", "10:0.6", "19", "4000");
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();

    run(&["density", "--manifest", &manifest, "--out", o, "--seed", "1"]);
    let rows = csv_rows(&out.join("density.csv"));
    assert_eq!(rows.len(), 6 * 2 * 11);
    for chunk in rows.chunks(11) {
        let nd: Vec<f64> = chunk.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(nd.windows(2).all(|w| w[0] <= w[1]), "{nd:?}");
        assert_eq!(chunk[10][2], "1");
        assert_eq!(nd[10], 1.0);
    }

    run(&["stats", "--manifest", &manifest, "--out", o, "--seed", "1"]);
    let rows = csv_rows(&out.join("stats.csv"));
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r[6].parse::<f64>().unwrap())));

    let s = run(&[
        "sweep", "--manifest", &manifest, "--out", o, "--seed", "1", "--classifier", "knn", "--folds", "5", "--repeats", "1",
    ]);
    assert_eq!(s["best"][0]["points"], 11);
    assert_eq!(csv_rows(&out.join("sweep_all.csv")).len(), 11);

    let s = run(&[
        "classify", "--manifest", &manifest, "--out", o, "--seed", "3", "--folds", "5", "--repeats", "1", "--trees", "20",
    ]);
    assert_eq!(s["reports"][0]["n_features"], 57);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("classify_rf_all.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["n_features"], 57);
    assert_eq!(report["run_config"]["seed"], 3);
    assert_eq!(report["report"]["folds"].as_array().unwrap().len(), 5);
}

#[test]
fn classify_is_byte_reproducible_and_reuses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "6:0.2", "6:0.6", "6", "4000");
    let out = dir.path().join("out");
    let args = [
        "classify", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--seed", "5", "--folds", "3", "--repeats", "2",
        "--trees", "15",
    ];
    run(&args);
    let first_rf = fs::read(out.join("classify_rf_all.json")).unwrap();
    let first_knn = fs::read(out.join("classify_knn_all.json")).unwrap();
    let cached = fs::read_dir(out.join("cache")).unwrap().count();
    assert_eq!(cached, 12);
    run(&args);
    assert_eq!(first_rf, fs::read(out.join("classify_rf_all.json")).unwrap());
    assert_eq!(first_knn, fs::read(out.join("classify_knn_all.json")).unwrap());
    assert_eq!(fs::read_dir(out.join("cache")).unwrap().count(), cached);
}
