use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cluster-tails"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, workers: Option<usize>) -> Output {
    let mut c = bin();
    c.arg("run").arg(config).arg("--output-dir").arg(out);
    if let Some(w) = workers {
        c.arg("--workers").arg(w.to_string());
    }
    c.env("CLUSTER_TAILS_CACHE", out.join("cache"))
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

const SMALL: &str = r#"{
  "experiment": "tail-ratio",
  "seed": 5,
  "clusters": 20000,
  "functional": "max",
  "grid": {"quantile_levels": [0.9, 0.99], "min_exceedances": 50},
  "model": {"regime": "independent_light_count",
            "mark": {"law": "pareto", "scale": 1.0, "alpha": 1.5},
            "count_mean": 2.0}
}"#;

#[test]
fn run_writes_csv_json_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let o = run(&cfg, dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("tail-ratio-5.csv")).unwrap();
    assert!(csv.starts_with("x,exceedances,empirical,denominator,ratio,ci_low,ci_high\n"));
    assert_eq!(csv.lines().count(), 3);
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("tail-ratio-5.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn validate_prints_constants_without_simulating() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["model_constants"]["mean_mark"], 3.0);
    assert_eq!(v["mean_cluster_size"], 3.0);
    assert!(std::fs::read_dir(dir.path()).unwrap().count() == 1);
}

#[test]
fn supercritical_intensity_is_a_model_error() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"experiment": "cluster-tails", "seed": 1, "clusters": 10,
        "model": {"regime": "hawkes_light_intensity",
                  "mark": {"law": "pareto", "scale": 1.0, "alpha": 1.5},
                  "target_mean_kappa": 1.2}}"#;
    let cfg = write(dir.path(), "bad.json", text);
    for sub in ["run", "validate"] {
        let o = bin()
            .arg(sub)
            .arg(&cfg)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(3), "{sub}");
        let e = stderr_json(&o);
        assert_eq!(e["error"], "ModelError");
        assert_eq!(e["field"], "model.target_mean_kappa");
    }
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "noseed.json",
        &SMALL.replace("\"seed\": 5,", ""),
    );
    let o = run(&cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "ConfigError");
    assert_eq!(e["field"], "seed");
}

#[test]
fn infinite_mean_is_a_model_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "heavy.json",
        &SMALL.replace("\"alpha\": 1.5", "\"alpha\": 0.9"),
    );
    let o = run(&cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["field"], "model.mark.alpha");
}

#[test]
fn cluster_overflow_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"experiment": "cluster-tails", "seed": 3, "clusters": 1000,
        "model": {"regime": "hawkes_comonotone_intensity",
                  "mark": {"law": "pareto", "scale": 1.0, "alpha": 1.5},
                  "target_mean_kappa": 0.9},
        "cluster_params": {"kind": "hawkes", "max_cluster_events": 2}}"#;
    let cfg = write(dir.path(), "overflow.json", text);
    let o = run(&cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "RuntimeError");
}

#[test]
fn reruns_are_byte_identical_and_worker_independent() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = configs().join("hawkes-default.json");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("1000000,\n  \"functional\"", "600000,\n  \"functional\"");
    let cfg = write(a.path(), "h.json", &text);
    assert!(run(&cfg, a.path(), Some(1)).status.success());
    assert!(run(&cfg, b.path(), Some(4)).status.success());
    for ext in ["csv", "json"] {
        let name = format!("tail-ratio-20260102.{ext}");
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn manifest_reproduces_its_outputs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = write(a.path(), "small.json", SMALL);
    assert!(run(&cfg, a.path(), None).status.success());
    let manifest = a.path().join("tail-ratio-5.manifest.json");
    let o = run(&manifest, b.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let m2: Value = serde_json::from_str(
        &std::fs::read_to_string(b.path().join("tail-ratio-5.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["config_sha256"], m2["config_sha256"]);
    assert_eq!(m["outputs"], m2["outputs"]);
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let o = bin().arg("validate").arg(&p).output().unwrap();
        assert!(
            o.status.success(),
            "{}: {}",
            p.display(),
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn oracle_compare_from_csv_support() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(configs().join("oracle-compare.json"))
        .unwrap()
        .replace("1000000", "100000")
        .replace(
            "two-point-support.csv",
            &configs()
                .join("two-point-support.csv")
                .display()
                .to_string(),
        );
    let cfg = write(dir.path(), "oracle.json", &text);
    let o = run(&cfg, dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("oracle-compare-14.json")).unwrap(),
    )
    .unwrap();
    assert!(v["ks_max"].as_f64().unwrap() < v["dkw_band_99_9"].as_f64().unwrap());
    assert!(v["ks_sum"].as_f64().unwrap() < v["dkw_band_99_9"].as_f64().unwrap());
}
