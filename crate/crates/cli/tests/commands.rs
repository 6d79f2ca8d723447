use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_relsynth");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("PLURELGEN_THREADS", "1")
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    let config = relsynth::GenConfig {
        num_tables: relsynth::Prior::constant(3),
        rows_entity: relsynth::Prior::range(50, 200),
        rows_activity: relsynth::Prior::range(100, 400),
        ..relsynth::GenConfig::default()
    };
    fs::write(&path, config.to_toml_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn generate(config: &str, out: &Path, n: &str) {
    let o = run(&["generate", "--config", config, "--seed", "42", "--num-dbs", n, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    generate(&config, &a, "2");
    generate(&config, &b, "2");
    assert!(a.join("db_0/schema.json").is_file());
    assert!(a.join("db_1/meta.json").is_file());
    assert!(!a.join("db_2").exists());
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let a = tmp.path().join("a");
    generate(&config, &a, "3");
    let b = tmp.path().join("b");
    let o = Command::new(BIN)
        .args(["generate", "--config", &config, "--seed", "42", "--num-dbs", "3", "--out", b.to_str().unwrap()])
        .env("PLURELGEN_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn zero_databases_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("none");
    let o = run(&["generate", "--num-dbs", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(!out.exists());
}

#[test]
fn malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "num_tables = [[[").unwrap();
    let o = run(&["generate", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_thread_env_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["generate", "--out", tmp.path().join("x").to_str().unwrap()])
        .env("PLURELGEN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corpus_defaults_stopping_rule_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let dbs = tmp.path().join("dbs");
    generate(&config, &dbs, "2");
    let target = 20_000usize;
    let mut files = Vec::new();
    for name in ["c1.jsonl", "c2.jsonl"] {
        let out = tmp.path().join(name);
        let o = run(&["corpus", "--db", dbs.to_str().unwrap(), "--tokens", &target.to_string(), "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8(o.stdout).unwrap();
        let emitted: usize = stdout.trim().strip_prefix("emitted ").unwrap().strip_suffix(" tokens").unwrap().parse().unwrap();
        assert!((target..target + 1024).contains(&emitted), "{emitted}");
        let text = fs::read_to_string(&out).unwrap();
        let mut counted = 0;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let n = v["tokens"].as_array().unwrap().len();
            assert!(n <= 1024);
            assert_eq!(v["n_tokens"].as_u64(), Some(n as u64));
            counted += n;
        }
        assert_eq!(counted, emitted);
        files.push(text);
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn corpus_without_databases_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["corpus", "--db", tmp.path().to_str().unwrap(), "--tokens", "10", "--out", tmp.path().join("c.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stats_on_single_database() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let dbs = tmp.path().join("dbs");
    generate(&config, &dbs, "1");
    let report = tmp.path().join("report.json");
    let o = run(&["stats", "--db", dbs.join("db_0").to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["databases"].as_array().unwrap().len(), 1);
    assert!(v["diversity"]["pairwise_ks"].as_array().unwrap().is_empty());
}

#[test]
fn fit_recovers_noiseless_triple() {
    let tmp = tempfile::tempdir().unwrap();
    let points = tmp.path().join("points.csv");
    let mut text = String::from("x,loss\n");
    for k in 3..=10 {
        let x = 2f64.powi(k);
        text.push_str(&format!("{x},{}\n", 2.0 * x.powf(-0.5) + 0.1));
    }
    fs::write(&points, text).unwrap();
    let out = tmp.path().join("fit.json");
    let o = run(&["fit", "--points", points.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    for (key, truth) in [("a", 2.0), ("alpha", 0.5), ("c", 0.1)] {
        let got = v[key].as_f64().unwrap();
        assert!((got - truth).abs() / truth < 1e-3, "{key}={got}");
    }
}

#[test]
fn fit_rejects_bad_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let points = tmp.path().join("points.csv");
    fs::write(&points, "x,loss\n1,abc\n").unwrap();
    let o = run(&["fit", "--points", points.to_str().unwrap(), "--out", tmp.path().join("f.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn profile_writes_one_row_per_count() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let out = tmp.path().join("profile.csv");
    let o = run(&["profile", "--config", &config, "--counts", "10,20", "--repeats", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "count,latency_s,latency_std_s,peak_memory_gb");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,") && lines[2].starts_with("20,"));
}

#[test]
fn default_config_round_trips() {
    let o = run(&["default-config"]);
    assert!(o.status.success());
    let parsed = relsynth::GenConfig::from_toml_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(parsed, relsynth::GenConfig::default());
}
