use std::path::Path;
use std::process::{Command, Output};

use configlab_cli::ExperimentConfig;
use serde_json::Value;

fn configlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_configlab"))
        .args(args)
        .env_remove("CONFIGLAB_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&doc).expect("schema compiles")
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn default_verify_on_two_state_passes_and_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = configlab(&[
        "verify", "--fixture", "two_state", "--n-max", "2", "--suites", "all", "--seed", "7", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let report = read_json(&out);
    assert_valid(&schema("suite_report.schema.json"), &report);
    let checks = report["checks"].as_array().unwrap();
    let exact_passes = checks
        .iter()
        .filter(|c| c["tier"] == "exact" && c["outcome"] == "pass")
        .count();
    assert!(exact_passes >= 12, "{exact_passes}");
    for c in checks {
        assert_eq!(c["fixture"], "two_state:rate=1");
        // Sampled checks carry the derived seed they actually used.
        assert!(c["seed"].as_u64().is_some_and(|s| s > 0));
    }
    // The echoed configuration is itself a valid experiment config.
    assert_valid(&schema("experiment_config.schema.json"), &report["config"]);
    let echoed: ExperimentConfig = serde_json::from_value(report["config"].clone()).unwrap();
    assert_eq!(echoed.seed, 7);
    assert_eq!(echoed.n_max, 2);
}

#[test]
fn repeated_runs_are_byte_identical_and_diff_empty() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = ["a.json", "b.json"]
        .iter()
        .map(|n| dir.path().join(n).to_str().unwrap().to_string())
        .collect();
    let run = |p: &str| {
        let o = configlab(&["verify", "--fixture", "circle:n=5", "--suites", "identities,transport", "--output", p]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(p).unwrap()
    };
    let a = run(&paths[0]);
    assert_eq!(run(&paths[0]), a, "same run twice must be byte-identical");
    let b = run(&paths[1]);
    let o = configlab(&["report-diff", &paths[0], &paths[1]]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());

    let mut v: Value = serde_json::from_slice(&b).unwrap();
    v["checks"][0]["max_defect"] = Value::from(1.0);
    std::fs::write(&paths[1], serde_json::to_string(&v).unwrap()).unwrap();
    let o = configlab(&["report-diff", &paths[0], &paths[1]]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.contains("max_defect"));
}

#[test]
fn desk_scale_is_refused() {
    let o = configlab(&["verify", "--fixture", "circle:n=8", "--suites", "kwc", "--n-max", "5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sector size 792 exceeds OT desk-scale limit 500"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_parent_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("absent").join("report.json");
    let o = configlab(&["verify", "--suites", "structure", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not exist"), "{}", stderr(&o));
}

#[test]
fn config_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    let mut config = ExperimentConfig {
        fixture: "circle:n=6,rate=0.5".parse().unwrap(),
        n_max: 3,
        t_grid: vec![0.25, 1.5],
        suites: vec!["be".into(), "mixed".into()],
        seed: 11,
        threads: 2,
        ..ExperimentConfig::default()
    };
    config.tolerances.insert("be.forward".into(), 1e-8);
    let text = config.to_json().unwrap();
    assert_valid(&schema("experiment_config.schema.json"), &serde_json::from_str(&text).unwrap());
    std::fs::write(&path, &text).unwrap();
    let o = configlab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed, text);
    assert_eq!(ExperimentConfig::from_json(&printed).unwrap(), config);

    // Flags override the file.
    let o = configlab(&["validate", "--config", path.to_str().unwrap(), "--seed", "3", "--levy", "1:0.25,3:0.75"]);
    let over = ExperimentConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(over.seed, 3);
    assert_eq!(over.levy.len(), 2);
    assert_eq!(over.n_max, 3);
}

#[test]
fn invalid_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
    v["colour"] = Value::from("red");
    assert!(!schema("experiment_config.schema.json").is_valid(&v));
    std::fs::write(&path, v.to_string()).unwrap();
    let o = configlab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    for args in [
        &["validate", "--t-grid", "1,0.5"][..],
        &["validate", "--suites", "nonsense"],
        &["validate", "--fixture", "circle"],
        &["validate", "--threads", "0"],
        &["validate", "--levy", "1:0.3,2:0.3"],
        &["verify", "--suites", "structure", "--tolerance", "no.such_check=1"],
    ] {
        let o = configlab(args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn zero_tolerance_turns_a_pass_into_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let out = out.to_str().unwrap();
    let o = configlab(&["verify", "--suites", "identities", "--output", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(Path::new(out));
    let id = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["tier"] == "exact" && c["outcome"] == "pass" && c["max_defect"].as_f64().is_some_and(|d| d > 0.0))
        .map(|c| c["check_id"].as_str().unwrap().to_string())
        .expect("an exact check with rounding-level defect");
    let tol = format!("{id}=0");
    let o = configlab(&["verify", "--suites", "identities", "--tolerance", &tol, "--output", out]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(&format!("FAIL {id}")), "{}", stderr(&o));
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_configlab"))
        .args(["verify", "--suites", "structure"])
        .env("CONFIGLAB_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["suites"], serde_json::json!(["structure"]));
}

#[test]
fn study_writes_level_defect_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = configlab(&["study", "--id", "cylinder_affine", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("cylinder_affine.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,defect");
    let levels: Vec<usize> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(levels, [8, 16, 32, 64]);
    let env_dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_configlab"))
        .args(["study", "--id", "cylinder_affine"])
        .env("CONFIGLAB_OUTPUT_DIR", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(env_dir.path().join("cylinder_affine.csv").is_file());
    let o = configlab(&["study", "--id", "no_such_study"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn enumerate_and_measures_emit_csv() {
    let o = configlab(&["enumerate", "--fixture", "circle:n=4", "--n-max", "2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    // 1 + 4 + 10 configurations plus the header.
    assert_eq!(text.lines().count(), 16);
    assert!(text.starts_with("index,sector,"));

    let o = configlab(&["measures", "--n-max", "14"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    let mass: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    assert!(stderr(&o).contains("tail bound"));
}
