//! End-to-end CLI behavior: exit codes, file outputs, and flag overrides.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn flowcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcast"))
        .arg("--config")
        .arg(dir.join("flowcast.toml"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) {
    std::fs::write(dir.join("flowcast.toml"), body).unwrap();
}

const SMALL_CONFIG: &str = "seed = 5\n\n[synth]\nn_days = 150\n\n[model]\nn_estimators = 60\n\n[rolling]\nfirst_origin = 110\nhorizon = 1\n";

#[test]
fn pipeline_smoke_produces_a_rolling_report() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    for args in [
        vec!["synth", "--seed", "7"],
        vec!["features", "--set", "FS5"],
        vec!["rolling", "--horizon", "1"],
    ] {
        let out = flowcast(dir.path(), &args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let report = std::fs::read_to_string(dir.path().join("reports/rolling_report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(parsed["report"]["r2"].is_number(), "report lacks an r2 field");
    assert_eq!(parsed["report"]["horizon"], 1);
}

#[test]
fn horizon_out_of_range_exits_2_citing_the_range() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    let out = flowcast(dir.path(), &["rolling", "--horizon", "8"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("1..7"), "stderr: {stderr}");
}

#[test]
fn missing_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = flowcast(dir.path(), &["synth"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_exits_2() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    // features before synth: flows.csv does not exist yet.
    let out = flowcast(dir.path(), &["features", "--set", "FS1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn remote_gateway_requires_confirmation() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "seed = 5\n\n[gateway]\nmode = \"remote\"\n\n[synth]\nn_days = 150\n",
    );
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    std::fs::write(
        dir.path().join("data/events_raw.jsonl"),
        "{\"event_id\":\"e1\",\"title\":\"t\",\"raw_time_text\":\"1 Jan 2024\",\"venue_text\":\"v\",\"raw_description\":\"d\",\"source\":\"dedicated-site\"}\n",
    )
    .unwrap();
    let out = flowcast(dir.path(), &["structure"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--yes"), "stderr: {stderr}");
    assert!(stderr.contains("requests"), "stderr: {stderr}");
}

#[test]
fn structure_builds_events_from_raw_text_with_the_mock() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    let raw = concat!(
        "{\"event_id\":\"e1\",\"title\":\"Star Voices 演唱会\",\"raw_time_text\":\"16-17 Dec 2023 8:00 pm - 8:10 pm\",\"venue_text\":\"Coliseum\",\"raw_description\":\"A live concert 演唱会 with a band\",\"source\":\"dedicated-site\"}\n",
        "{\"event_id\":\"e2\",\"title\":\"Weekend 市集 fair\",\"raw_time_text\":\"1 Jan 2024\",\"venue_text\":\"Park\",\"raw_description\":\"A weekend fair 市集 with food stalls\",\"source\":\"tourism-board\"}\n",
    );
    std::fs::write(dir.path().join("data/events_raw.jsonl"), raw).unwrap();
    let out = flowcast(dir.path(), &["structure"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let events: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("data/events.json")).unwrap())
            .unwrap();
    let list = events.as_array().unwrap();
    // The fair is filtered out by the default type rules; the concert stays.
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["event_id"], "e1");
    assert_eq!(list[0]["event_type"], "concert");
    assert_eq!(list[0]["sessions"].as_array().unwrap().len(), 2);
}

#[test]
fn relevance_and_popularity_commands_chain() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    assert!(flowcast(dir.path(), &["synth", "--days", "100"]).status.success());
    // Recompute relevance with the mock over the synthetic events and posts.
    let out = flowcast(dir.path(), &["relevance"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = flowcast(dir.path(), &["popularity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let popularity = std::fs::read_to_string(dir.path().join("data/popularity.csv")).unwrap();
    assert!(popularity.starts_with("event_id,sub_id,overall,promotional,womp"));
    assert!(popularity.lines().count() > 10);
}

#[test]
fn gridsearch_emits_one_row_per_combination() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "seed = 5\n\n[synth]\nn_days = 120\n\n[rolling]\nfirst_origin = 100\n\n[grid]\nlearning_rates = [0.05, 0.1]\nmax_depths = [2]\nn_estimators = [20, 40]\nweight_decays = [0.0, 0.005]\n",
    );
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    let out = flowcast(dir.path(), &["gridsearch"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("reports/grid_results.csv")).unwrap();
    // Header plus 2 * 1 * 2 * 2 combinations.
    assert_eq!(table.lines().count(), 1 + 8);
}

#[test]
fn ablation_emits_five_rows() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "seed = 5\n\n[synth]\nn_days = 120\n\n[model]\nn_estimators = 40\n\n[rolling]\nfirst_origin = 95\nhorizon = 1\n",
    );
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    let out = flowcast(dir.path(), &["ablation"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("reports/ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5);
    assert!(table.contains("FS1") && table.contains("FS5"));
}

#[test]
fn explain_needs_a_trained_model_and_then_succeeds() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    // No model yet: config/IO error.
    let out = flowcast(dir.path(), &["explain"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(flowcast(dir.path(), &["train"]).status.success());
    let out = flowcast(dir.path(), &["explain", "--top-k", "5", "--permutation"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["shap_values.csv", "importance.json", "summary_points.csv", "importance_permutation.json"] {
        assert!(dir.path().join("reports").join(file).exists(), "{file} missing");
    }
}

#[test]
fn explain_rejects_non_tree_models_as_a_domain_error() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "seed = 5\n\n[synth]\nn_days = 150\n\n[model]\nkind = \"linear\"\n\n[rolling]\nfirst_origin = 110\n",
    );
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    assert!(flowcast(dir.path(), &["train"]).status.success());
    let out = flowcast(dir.path(), &["explain"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_format_prints_machine_readable_reports() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    let out = flowcast(dir.path(), &["--format", "json", "rolling"]);
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout is valid JSON");
    assert!(parsed["report"]["mae"].is_number());
}

#[test]
fn reruns_overwrite_outputs_identically() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    assert!(flowcast(dir.path(), &["rolling"]).status.success());
    let first = std::fs::read(dir.path().join("reports/rolling_report.json")).unwrap();
    assert!(flowcast(dir.path(), &["rolling"]).status.success());
    let second = std::fs::read(dir.path().join("reports/rolling_report.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn segment_flag_switches_the_forecast_series() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), SMALL_CONFIG);
    assert!(flowcast(dir.path(), &["synth"]).status.success());
    assert!(flowcast(dir.path(), &["features", "--set", "FS5"]).status.success());
    let out = flowcast(dir.path(), &["--format", "json", "rolling", "--segment", "metro"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metro: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let out = flowcast(dir.path(), &["--format", "json", "rolling"]);
    let all: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // Metro flows are a fraction of the total, so the error scale differs.
    assert_ne!(metro["report"]["mae"], all["report"]["mae"]);
}
