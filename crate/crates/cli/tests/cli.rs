use std::path::Path;
use std::process::{Command, Output};

fn afrr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afrr"))
        .current_dir(dir)
        .env_remove("AFRR_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) {
    let text = format!("seed = 3\n[paths]\noutput = \"out\"\n[synth]\nn_rows = 7000\n{extra}");
    std::fs::write(dir.join("run.toml"), text).unwrap();
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn synth_succeeds_and_lists_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = afrr(dir.path(), &["synth", "--config", "run.toml", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.ends_with("  data/afrr.csv") && l.len() == 64 + 2 + 13));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/meta/synth.json")).unwrap()).unwrap();
    assert_eq!(meta["workers"], 2);
    assert_eq!(meta["seed"], 3);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = afrr(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--override"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["train"][..], &["frobnicate", "--config", "x"], &["train", "--config", "x", "--workers", "two"]] {
        let out = afrr(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = error_json(&out);
        assert_eq!(err["error"]["category"], "usage");
        assert_eq!(err["error"]["code"], "arguments");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = afrr(dir.path(), &["synth", "--config", "nope.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["error"]["code"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("nope.toml"));
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = afrr(dir.path(), &["synth", "-c", "run.toml", "-o", "train.bogus=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["category"], "usage");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn corrupt_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    assert_eq!(afrr(dir.path(), &["synth", "-c", "run.toml"]).status.code(), Some(0));
    let data = dir.path().join("out/data/afrr.csv");
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let rest = lines[1].split_once(',').unwrap().1.to_string();
    lines[1] = format!("yesterday,{rest}");
    std::fs::write(&data, lines.join("\n") + "\n").unwrap();
    let out = afrr(dir.path(), &["features", "-c", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["category"], "data");
    assert!(!dir.path().join("out/meta/features.json").exists());
}

#[test]
fn unreachable_download_is_a_runtime_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        &format!("[fetch]\nurl = \"http://127.0.0.1:{port}/afrr.csv\"\nsha256 = \"{}\"\n", "0".repeat(64)),
    );
    let out = afrr(dir.path(), &["fetch", "-c", "run.toml"]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"]["category"], "runtime");
    assert_eq!(err["error"]["code"], "network");
}

#[test]
fn output_directory_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "seed = 1\n[synth]\nn_rows = 200\n").unwrap();
    let target = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_afrr"))
        .current_dir(dir.path())
        .env("AFRR_OUT", &target)
        .args(["synth", "--config", "run.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("data/afrr.csv").is_file());
    assert!(target.join("meta/synth.json").is_file());
}
