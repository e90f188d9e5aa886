//! End-to-end checks of the command-line interface and its exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ev-station"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    write(
        &path,
        "master_seed = 11\n\
         [training]\ndays = 6\nrepetitions = 2\n\
         [evaluation]\ndays = 3\n",
    );
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn compare_is_reproducible_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "compare",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let csv_a = std::fs::read(out_a.join("incomes.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("incomes.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b, "incomes.csv must be byte-identical");

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
    assert!(report["policies"]["learned"]["total"].is_f64());
    assert!(report["policies"]["myopic"]["total"].is_f64());
    assert!(report["policies"]["random"]["total"].is_f64());

    let snapshot = std::fs::read_to_string(out_a.join("qtable.evq")).unwrap();
    assert!(snapshot.starts_with("EVQTAB1\n"));
}

#[test]
fn train_then_evaluate_learned() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("run");
    let output = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let table = out.join("qtable.evq");
    assert!(table.exists());
    let trace = std::fs::read_to_string(out.join("train_trace.csv")).unwrap();
    assert!(trace.starts_with("episode,income_eur\n"));
    assert_eq!(trace.lines().count(), 1 + 6 * 2);

    let output = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--policy",
        "learned",
        "--table",
        table.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let incomes = std::fs::read_to_string(out.join("incomes.csv")).unwrap();
    assert!(incomes.starts_with("day,policy,income_eur\n"));
    assert_eq!(incomes.lines().count(), 1 + 3);
    assert!(incomes.contains(",learned,"));
}

#[test]
fn evaluate_learned_without_table_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let output = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--policy",
        "learned",
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    write(&path, "[station]\nm = 2\nk = 4\n");
    let output = run(&["compare", "--config", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn malformed_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write(&path, "day,hour,value\n0,0,-5.0\n");
    let output = run(&[
        "fit-levels",
        "--input",
        path.to_str().unwrap(),
        "--unit",
        "kwh",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn fit_levels_reports_the_codec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let mut csv = String::from("day,hour,value\n");
    for h in 0..24 {
        csv.push_str(&format!("0,{h},{}\n", if h < 12 { 1.0 } else { 9.0 }));
    }
    write(&path, &csv);
    let output = run(&[
        "fit-levels",
        "--input",
        path.to_str().unwrap(),
        "--unit",
        "eur-per-kwh",
        "--levels",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let levels: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("levels.json")).unwrap())
            .unwrap();
    assert_eq!(levels["thresholds"][0], 5.0);
    assert_eq!(levels["level_values"][0], 1.0);
    assert_eq!(levels["level_values"][1], 9.0);
}

#[test]
fn estimate_rates_from_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    // hour 9: 3 + 1 + 2 events over days 0..=2
    let mut csv = String::from("day,hour\n");
    for _ in 0..3 {
        csv.push_str("0,9\n");
    }
    csv.push_str("1,9\n2,9\n2,9\n");
    write(&path, &csv);
    let output = run(&[
        "estimate-rates",
        "--log",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let rates: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rates.json")).unwrap())
            .unwrap();
    assert_eq!(rates["lambda"][9], 2.0);
    assert_eq!(rates["lambda"][3], 0.0);
}

#[test]
fn missing_arrival_log_exits_3() {
    let output = run(&["estimate-rates", "--log", "/nonexistent/log.csv"]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn out_of_range_hour_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    write(&path, "day,hour\n0,24\n");
    let output = run(&[
        "estimate-rates",
        "--log",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(4), "{output:?}");
}
