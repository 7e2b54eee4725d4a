use std::path::Path;
use std::process::{Command, Output};

fn afweight(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afweight"))
        .args(args)
        .current_dir(dir)
        .env_remove("AFW_SEED")
        .env_remove("AFW_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = afweight(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path) {
    ok(dir, &["simulate", "--setting", "IA", "--sigma-mu", "0.3", "--seed", "4"]);
    ok(dir, &["assoc"]);
    ok(dir, &["null", "--perms", "20", "--seed", "2"]);
    ok(dir, &["combine", "--method", "afp"]);
}

#[test]
fn simulate_to_combine_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let results = std::fs::read_to_string(a.path().join("results.tsv")).unwrap();
    assert_eq!(results.lines().count(), 151);
    assert!(results.lines().skip(1).all(|l| l.split('\t').nth(1) == Some("AFp")));
    for f in ["pvalues.tsv", "signs.tsv", "null.bin", "results.tsv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn combine_without_null_names_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--setting", "IA", "--sigma-mu", "0", "--n", "40"]);
    ok(dir.path(), &["assoc"]);
    let out = afweight(dir.path(), &["combine"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("null store") && err.contains("null.bin"), "{err}");
}

#[test]
fn count_kind_on_continuous_column_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--setting", "IA", "--sigma-mu", "0", "--n", "40"]);
    let out = afweight(dir.path(), &["assoc", "--expression", "expression.tsv", "--phenotypes", "phenotypes.tsv", "--kinds", &["count"; 10].join(",")]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_beat_environment_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--setting", "IA", "--sigma-mu", "0", "--n", "40"]);
    std::fs::write(d.join("cfg.json"), r#"{"threads": 1, "null": {"perms": 7, "seed": 5, "out": "fromfile"}}"#).unwrap();

    let snapshot = |dir: &str| -> serde_json::Value {
        let text = std::fs::read_to_string(d.join(dir).join("run_config.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()["settings"].clone()
    };
    ok(d, &["--config", "cfg.json", "null"]);
    let s = snapshot("fromfile");
    assert_eq!((s["perms"].as_u64(), s["seed"].as_u64()), (Some(7), Some(5)));

    let out = Command::new(env!("CARGO_BIN_EXE_afweight"))
        .args(["--config", "cfg.json", "null", "--out", "fromenv"])
        .env("AFW_SEED", "9")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(snapshot("fromenv")["seed"].as_u64(), Some(9));

    let out = Command::new(env!("CARGO_BIN_EXE_afweight"))
        .args(["--config", "cfg.json", "null", "--out", "fromflag", "--seed", "11"])
        .env("AFW_SEED", "9")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(out.status.success());
    let s = snapshot("fromflag");
    assert_eq!((s["perms"].as_u64(), s["seed"].as_u64()), (Some(7), Some(11)));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"null": {"permutations": 7}}"#).unwrap();
    let out = afweight(dir.path(), &["--config", "cfg.json", "null"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("cfg.json"), r#"{"nul": {}}"#).unwrap();
    assert_eq!(afweight(dir.path(), &["--config", "cfg.json", "null"]).status.code(), Some(2));
}
