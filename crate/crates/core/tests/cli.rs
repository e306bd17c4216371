use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hybridcast(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridcast"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(String::from).collect()
}

const SMALL: &str = r#"
[data]
synthetic_hours = 400

[decomposition]
trials = 4

[train]
epochs = 2
batch_size = 64

[tcn]
channels = [4, 4, 4, 4]

[bpnn]
hidden = 4

[rnn]
hidden = 4
"#;

#[test]
fn synth_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = hybridcast(&["synth", "--hours", "2000", "--seed", "9", "--out", name], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(tmp.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b.csv")).unwrap());
    assert_eq!(data_lines(&tmp.path().join("a.csv")).len(), 2000);
}

#[test]
fn decompose_writes_components_and_metadata() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for out in ["d1", "d2"] {
        let o = hybridcast(&["decompose", "--config", &cfg, "--out", out], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(tmp.path().join("d1/decomposed.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("imf_1") && header.contains("residue"), "{header}");
    assert_eq!(csv.lines().count(), 401);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("d1/decomposition_meta.json")).unwrap()).unwrap();
    assert!(meta["reconstruction_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(meta["trials"], 4);
    assert!(meta["n_imfs"].as_u64().unwrap() >= 2);
    for f in ["decomposed.csv", "decomposition_meta.json"] {
        assert_eq!(fs::read(tmp.path().join("d1").join(f)).unwrap(), fs::read(tmp.path().join("d2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn single_model_run_writes_one_metrics_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[data]\nsynthetic_hours = 2000\n[models]\nnames = [\"LR\"]\nhorizons = [1]\n");
    let o = hybridcast(&["run", "--config", &cfg, "--out", "r", "--seed", "3"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r/report.json")).unwrap()).unwrap();
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["model"], "LR");
    assert_eq!(runs[0]["horizon"], 1);
    let rows = data_lines(&tmp.path().join("r/metrics.csv"));
    let criteria: Vec<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(criteria, ["MAPE", "MAE", "RMSE"]);
    assert!(rows.iter().all(|r| r.starts_with("LR,1,")));
    assert!(tmp.path().join("r/report.json").exists());
    assert!(tmp.path().join("r/traces/LR_h1_r0.csv").exists());

    let o = hybridcast(&["report", "--out", "r"], tmp.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("MAPE"));
}

#[test]
fn repeated_runs_fill_the_robustness_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("robustness_runs = 3\n{SMALL}\n[models]\nnames = [\"LR\", \"BPNN\"]\nhorizons = [1, 2]\n"),
    );
    let o = hybridcast(&["run", "--config", &cfg, "--out", "r", "--jobs", "2"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&tmp.path().join("r/runs.csv")).len(), 12);
    let table = fs::read_to_string(tmp.path().join("r/robustness.csv")).unwrap();
    assert!(table.contains("BPNN") && table.contains("LR"), "{table}");
    let cell = regex_like_mean_std(&table);
    assert!(cell, "{table}");
}

/// Finds at least one `0.123 (0.045)` style cell.
fn regex_like_mean_std(text: &str) -> bool {
    text.split([',', '\n', '\t']).any(|c| {
        let c = c.trim().trim_matches('"');
        match c.split_once(" (") {
            Some((m, s)) => m.parse::<f64>().is_ok() && s.trim_end_matches(')').parse::<f64>().is_ok() && m.split('.').nth(1).map(str::len) == Some(3),
            None => false,
        }
    })
}

#[test]
fn full_grid_produces_fifteen_dm_cells() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}\n[models]\nhorizons = [1]\n"));
    let o = hybridcast(&["run", "--config", &cfg, "--out", "r"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tsv = fs::read_to_string(tmp.path().join("r/dm_h1.tsv")).unwrap();
    let filled = tsv.lines().skip(1).flat_map(|l| l.split('\t').skip(1)).filter(|c| !c.trim().is_empty()).count();
    assert_eq!(filled, 15, "{tsv}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r/report.json")).unwrap()).unwrap();
    assert_eq!(report["improvements"].as_array().unwrap().len(), 5);
}

#[test]
fn a_diverging_cell_does_not_stop_the_others() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[data]\nsynthetic_hours = 300\n[models]\nnames = [\"LR\", \"BPNN\"]\nhorizons = [1]\n[train]\nepochs = 3\nlearning_rate = 1e307\n[bpnn]\nhidden = 4\n",
    );
    let o = hybridcast(&["run", "--config", &cfg, "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_lines(&tmp.path().join("r/metrics.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("LR,")));
    let failures = data_lines(&tmp.path().join("r/failures.csv"));
    assert_eq!(failures.len(), 1);
    assert!(failures[0].starts_with("BPNN/h1/r0"), "{failures:?}");
}

#[test]
fn bad_config_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[models]\nnames = [\"ARIMA\"]\n");
    let o = hybridcast(&["run", "--config", &cfg, "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}
