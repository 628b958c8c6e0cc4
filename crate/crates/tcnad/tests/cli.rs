use std::path::Path;
use std::process::{Command, Output};

fn tcnad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcnad"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
    "drivecycle": {"duration_s": 2400},
    "tcn": {"filters": 8, "dilations": [1, 2, 4], "max_epochs": 2, "batch_size": 64}
}"#;

#[test]
fn catalog_prints_every_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcnad(dir.path(), &["catalog"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(
        text.lines()
            .filter(|l| l.trim_start().starts_with("case"))
            .count(),
        21
    );

    let out = tcnad(dir.path(), &["catalog", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 21);
}

#[test]
fn full_flow() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), SMALL).unwrap();
    let base = ["--config", "run.json", "--seed", "11", "--threads", "1"];
    let step = |cmd: &str| {
        let mut args = base.to_vec();
        args.push(cmd);
        let out = tcnad(dir.path(), &args);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        stdout(&out)
    };
    assert!(step("generate").starts_with("rows=2400 "));
    assert!(step("train").contains("bundle="));
    let eval = step("evaluate");
    assert!(eval.starts_with("auc="), "{eval}");
    let report = step("report");
    assert!(report.contains("AUC"));
    assert!(report.contains("scenario  injected"));
    for f in [
        "model.json",
        "scaler.json",
        "windows.bin",
        "report.json",
        "roc.csv",
        "manifest.jsonl",
        "test_windows.bin",
    ] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"tcn": {"kernel": 0}}"#).unwrap();
    let out = tcnad(dir.path(), &["--config", "bad.json", "generate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("class=config"), "{err}");

    let out = tcnad(dir.path(), &["--config", "missing.json", "generate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = tcnad(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcnad(dir.path(), &["--data", "absent.csv", "train"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("stage=ingest"), "{err}");
}
