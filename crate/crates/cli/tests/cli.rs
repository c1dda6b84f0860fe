use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::Registry;
use mixclust::image::{two_tone, write_ppm};
use serde_json::Value;
use tempfile::TempDir;

const SCHEMA_BASE: &str = "https://mixclust.invalid/schemas/";

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mixclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixclust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Validates `instance` against `schemas/<name>`, resolving references to the
/// other shipped schemas.
fn assert_valid(name: &str, instance: &Value) {
    let dir = repo_root().join("schemas");
    let mut builder = Registry::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let file = path.file_name().unwrap().to_str().unwrap().to_owned();
        builder = builder
            .add(format!("{SCHEMA_BASE}{file}"), read_json(&path))
            .unwrap();
    }
    let registry = builder.prepare().unwrap();
    let schema = read_json(&dir.join(name));
    let validator = jsonschema::options()
        .with_registry(&registry)
        .build(&schema)
        .unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

fn toy_csv(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("toy.csv");
    fs::write(&path, "x,y\n0,0\n0.1,0.2\n-0.1,0\n5,5\n5.2,4.9\n4.8,5.1\n").unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_result_and_assignments() {
    let dir = TempDir::new().unwrap();
    let csv = toy_csv(&dir);
    let out = dir.path().join("out");
    let run = mixclust(&["fit", s(&csv), "--k", "2", "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));

    let result = read_json(&out.join("result.json"));
    assert_valid("fit_result.schema.json", &result);
    assert_eq!(result["means"].as_array().unwrap().len(), 2);
    let total: f64 = result["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);

    let rows = fs::read_to_string(out.join("assignments.csv")).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(
        lines[0],
        "row,cluster,log_discriminant,outlier,outlier_type"
    );
    assert_eq!(lines.len(), 7);
    let cluster = |i: usize| lines[i].split(',').nth(1).unwrap().to_owned();
    assert_eq!(cluster(1), cluster(2));
    assert_eq!(cluster(4), cluster(6));
    assert_ne!(cluster(1), cluster(4));
}

#[test]
fn fit_output_is_deterministic_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let csv = toy_csv(&dir);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let run = mixclust(&[
            "--threads",
            threads,
            "fit",
            s(&csv),
            "--k",
            "2",
            "--beta",
            "0",
            "--restarts",
            "1",
            "--seed",
            "7",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        outputs.push((
            fs::read(out.join("result.json")).unwrap(),
            fs::read(out.join("assignments.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn fit_missing_file_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let run = mixclust(&["fit", s(&missing), "--k", "2", "--out", s(dir.path())]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("nowhere.csv"));
}

#[test]
fn fit_malformed_csv_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("cell.csv", "1,2\n3,4\n5,oops\n", "line 3"),
        ("width.csv", "a,b\n1,2\n3\n", "line 3"),
        ("nan.csv", "1,2\nnan,4\n", "line 2"),
    ];
    for (name, body, needle) in cases {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        let run = mixclust(&[
            "fit",
            s(&path),
            "--k",
            "1",
            "--out",
            s(&dir.path().join("o")),
        ]);
        assert_eq!(code(&run), 2, "{name}");
        assert!(stderr(&run).contains(needle), "{name}: {}", stderr(&run));
    }
}

#[test]
fn fit_refuses_to_overwrite_without_force() {
    let dir = TempDir::new().unwrap();
    let csv = toy_csv(&dir);
    let out = dir.path().join("out");
    let args = [
        "fit",
        s(&csv),
        "--k",
        "2",
        "--restarts",
        "2",
        "--out",
        s(&out),
    ];
    assert_eq!(code(&mixclust(&args)), 0);
    let again = mixclust(&args);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&mixclust(&forced)), 0);
}

#[test]
fn fit_config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let csv = toy_csv(&dir);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"beta": 0.3, "n_restarts": 3, "constraint": {"c": 8}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = mixclust(&[
        "fit",
        s(&csv),
        "--k",
        "2",
        "--config",
        s(&cfg),
        "--beta",
        "0.05",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let config = &read_json(&out.join("result.json"))["config"];
    assert_eq!(config["beta"], 0.05);
    assert_eq!(config["n_restarts"], 3);
    assert_eq!(config["constraint"]["c"], 8.0);
    assert_eq!(config["constraint"]["c1"], 0.1);

    fs::write(&cfg, r#"{"betta": 0.3}"#).unwrap();
    let run = mixclust(&[
        "fit",
        s(&csv),
        "--k",
        "2",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--force",
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("betta"));
}

#[test]
fn fit_rejects_out_of_range_beta() {
    let dir = TempDir::new().unwrap();
    let csv = toy_csv(&dir);
    let run = mixclust(&[
        "fit",
        s(&csv),
        "--k",
        "2",
        "--beta",
        "1.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&run), 2);
}

fn small_spec(dir: &TempDir, replications: usize) -> PathBuf {
    let path = dir.path().join("spec.json");
    let spec = serde_json::json!({
        "scenario": {
            "n": 150, "p": 2, "k": 3,
            "means": [[0.0, 0.0], [5.0, 5.0], [-5.0, -5.0]],
            "common_cov_scale": 1.0,
            "weights": [0.3, 0.3, 0.3],
            "contamination": "uniform_chisq",
            "contamination_level": 0.1,
            "replications": replications,
            "rng_seed": 11
        },
        "methods": [{"beta": 0.1, "threshold": 0.001, "n_restarts": 3}]
    });
    assert_valid("experiment_spec.schema.json", &spec);
    fs::write(&path, spec.to_string()).unwrap();
    path
}

#[test]
fn simulate_single_replication_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let spec = small_spec(&dir, 1);
    let out = dir.path().join("out");
    let run = mixclust(&["simulate", s(&spec), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let rows = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(rows.lines().nth(1).unwrap().starts_with("1,1,0.1,"));
    assert_valid(
        "simulation_summary.schema.json",
        &read_json(&out.join("summary.json")),
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("misclassification"));
}

#[test]
fn simulate_seeds_change_rows_not_schema() {
    let dir = TempDir::new().unwrap();
    let spec = small_spec(&dir, 3);
    let mut files = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(format!("seed{seed}"));
        let run = mixclust(&["simulate", s(&spec), "--seed", seed, "--out", s(&out)]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        files.push(fs::read_to_string(out.join("replications.csv")).unwrap());
    }
    let header = |f: &str| f.lines().next().unwrap().to_owned();
    assert_eq!(header(&files[0]), header(&files[1]));
    assert_ne!(files[0], files[1]);
}

#[test]
fn simulate_rejects_invalid_specs() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    for body in [
        r#"{"scenario": {"n": 10}, "methods": []}"#,
        r#"{"scenario": {"n": 100, "p": 2, "k": 1, "means": [[0, 0]], "common_cov_scale": 1, "weights": [1], "replications": 1, "colour": 1}, "methods": [{}]}"#,
        "not json",
    ] {
        fs::write(&path, body).unwrap();
        let run = mixclust(&["simulate", s(&path), "--out", s(&dir.path().join("o"))]);
        assert_eq!(code(&run), 2, "{body}");
    }
}

#[test]
fn simulate_bundled_table_spec() {
    let spec = repo_root().join("specs/table1_p2_I.json");
    assert_valid("experiment_spec.schema.json", &read_json(&spec));
    let dir = TempDir::new().unwrap();
    let run = mixclust(&["simulate", s(&spec), "--out", s(dir.path())]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let table = String::from_utf8_lossy(&run.stdout).into_owned();
    assert_eq!(table.lines().count(), 4, "{table}");
    let rows = fs::read_to_string(dir.path().join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 20 * 2);
}

#[test]
fn influence_defaults_write_curves_and_solution() {
    let dir = TempDir::new().unwrap();
    let run = mixclust(&["influence", "--out", s(dir.path())]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let solution = read_json(&dir.path().join("solution.json"));
    assert_valid("influence_solution.schema.json", &solution);
    assert_eq!(solution["grid"]["points"], 601);
    let solutions = solution["solutions"].as_array().unwrap();
    assert_eq!(solutions.len(), 3);
    for sol in solutions {
        assert!(sol["max_residual"].as_f64().unwrap() < 1e-8);
        let a = sol["a"].as_f64().unwrap();
        let b = sol["b"].as_f64().unwrap();
        assert!(a < 0.0 && b > 0.0 && a < b);
        let curve = fs::read_to_string(dir.path().join(sol["curve"].as_str().unwrap())).unwrap();
        let lines: Vec<&str> = curve.lines().collect();
        assert_eq!(lines.len(), 602);
        assert!(lines[1].starts_with("-30,"));
        assert!(lines[601].starts_with("30,"));
    }
}

#[test]
fn influence_refuses_beta_zero() {
    let dir = TempDir::new().unwrap();
    let run = mixclust(&["influence", "--beta", "0,0.1", "--out", s(dir.path())]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("unbounded"));
    assert!(!dir.path().join("solution.json").exists());
}

#[test]
fn influence_grid_is_configurable() {
    let dir = TempDir::new().unwrap();
    let run = mixclust(&[
        "influence",
        "--beta",
        "0.5",
        "--grid-min",
        "-2",
        "--grid-max",
        "2",
        "--grid-points",
        "5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let curve = fs::read_to_string(dir.path().join("if_beta_0.5.csv")).unwrap();
    let ys: Vec<&str> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ys, ["-2", "-1", "0", "1", "2"]);
}

#[test]
fn influence_solve_failure_exits_3_with_report() {
    let dir = TempDir::new().unwrap();
    let run = mixclust(&[
        "influence",
        "--beta",
        "0.5",
        "--c",
        "1.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&run), 3);
    assert!(stderr(&run).contains("beta = 0.5"));
}

fn two_tone_ppm(dir: &TempDir) -> PathBuf {
    let (grid, _) = two_tone(24, 16, 0.03, 5).unwrap();
    let path = dir.path().join("two.ppm");
    write_ppm(&grid, &path).unwrap();
    path
}

#[test]
fn image_segments_two_tone_picture() {
    let dir = TempDir::new().unwrap();
    let ppm = two_tone_ppm(&dir);
    let out = dir.path().join("out");
    let run = mixclust(&[
        "image",
        s(&ppm),
        "--k",
        "2",
        "--beta",
        "0.2",
        "--threshold",
        "0.02",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let summary = read_json(&out.join("segmentation.json"));
    assert_valid("segmentation.schema.json", &summary);
    assert_eq!(summary["k"], 2);
    assert_eq!(summary["config"]["assignment"], "euclidean");
    let picture = mixclust::image::load_image(out.join("reconstruction.ppm")).unwrap();
    assert_eq!((picture.width(), picture.height()), (24, 16));
    let flagged: u64 = summary["outlier_counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(flagged, (0.03f64 * 24.0 * 16.0).round() as u64);
}

#[test]
fn image_collision_and_decode_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    let ppm = two_tone_ppm(&dir);
    let out = dir.path().join("out");
    assert_eq!(
        code(&mixclust(&["image", s(&ppm), "--k", "2", "--out", s(&out)])),
        0
    );
    assert_eq!(
        code(&mixclust(&["image", s(&ppm), "--k", "2", "--out", s(&out)])),
        2
    );

    let junk = dir.path().join("junk.ppm");
    fs::write(&junk, b"P6 not really").unwrap();
    let run = mixclust(&[
        "image",
        s(&junk),
        "--k",
        "2",
        "--out",
        s(&dir.path().join("j")),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("junk.ppm"));
}

#[test]
#[should_panic(expected = "fit_result.schema.json")]
fn schemas_reject_foreign_fields() {
    let dir = TempDir::new().unwrap();
    let csv = toy_csv(&dir);
    let run = mixclust(&["fit", s(&csv), "--k", "2", "--out", s(dir.path())]);
    assert_eq!(code(&run), 0);
    let mut result = read_json(&dir.path().join("result.json"));
    result["config"]["assignment"] = "mahalanobis".into();
    assert_valid("fit_result.schema.json", &result);
}
