use std::path::Path;
use std::process::{Command, Output};

fn projstate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projstate")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL_FAMILY: &str = r#"
seed = 3
[family]
kind = "lattice"
sites = 4
[samples]
cocycle = 20
isometry = 20
duality = 30
surjectivity = 20
net = 20
"#;

#[test]
fn verify_family_passes_and_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FAMILY);
    let out = projstate(&["verify-family", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["command"], "verify-family");
    assert_eq!(report["passed"], true);
    assert_eq!(report["seed"], 3);
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS coherence"));
}

#[test]
fn corrupted_factorization_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FAMILY);
    let out = projstate(&["verify-family", "--config", &cfg, "--corrupt-phi"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let coherence = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "coherence").unwrap();
    assert_eq!(coherence["passed"], false);
    assert!(coherence["message"].as_str().unwrap().contains("worst triple"));
}

#[test]
fn tolerance_override_can_fail_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[samples]\nduality = 40");
    assert_eq!(projstate(&["duality-test", "--config", &cfg]).status.code(), Some(0));
    let out = projstate(&["duality-test", "--config", &cfg, "--tol", "1e-300"]);
    // the Bell reduction is exact, the random duality samples are not
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(projstate(&["verify-family", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = write_config(dir.path(), "seed = 1\n[vacuum]\nlevel = [4, 5]\nchains = [[4, 5], [3, 4, 5, 6], [4, 5, 6]]");
    let out = projstate(&["vacuum-sweep", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    assert_eq!(projstate(&["duality-test", "--tol", "0"]).status.code(), Some(2));

    let unknown = write_config(dir.path(), "seed = 1\nchecks = [\"nonsense\"]");
    assert_eq!(projstate(&["verify-family", "--config", &unknown]).status.code(), Some(2));

    assert_eq!(projstate(&["gaussian-demo", "--seed", "many"]).status.code(), Some(2));
}

#[test]
fn out_directory_holds_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 9\n[vacuum]\nlengths = [4, 6]");
    let out_dir = dir.path().join("run");
    let out = projstate(&["vacuum-sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS vacuum-sweep"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("vacuum-sweep.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 10);
    let csv = std::fs::read_to_string(out_dir.join("vacuum_trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out_dir.join("vacuum_trace.json").exists());
}

#[test]
fn repeated_runs_agree_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 4\n[gaussian]\ntruncations = [3, 4]\npoints = 8\nappendix_samples = 2");
    let strip = |o: Output| {
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    let a = strip(projstate(&["gaussian-demo", "--config", &cfg]));
    let b = strip(projstate(&["gaussian-demo", "--config", &cfg]));
    assert_eq!(a, b);
}
