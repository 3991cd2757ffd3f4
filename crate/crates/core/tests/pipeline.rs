use std::collections::BTreeMap;
use std::path::Path;

use afrr_core::pipeline::{check_local_accuracy, run_command, run_sequence, Command, RunConfig, SYNTHETIC_RUN};
use afrr_core::shap::read_explanations;
use afrr_core::{Error, ErrorCategory};

const ROWS: usize = 61 * 96 + 6000;

fn config(out: &Path, extra: &str) -> RunConfig {
    let text = format!(
        r#"
seed = 21
[paths]
output = "{}"
[synth]
n_rows = {ROWS}
[model]
variants = ["daily_profile", "day_ahead", "full"]
[train]
num_rounds = 25
max_leaves = 15
{extra}
"#,
        out.display()
    );
    RunConfig::from_toml_str(&text, &[]).unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn full_run_is_complete_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let summaries = run_sequence(&config(a.path(), ""), &SYNTHETIC_RUN, Some(1)).unwrap();
    assert_eq!(summaries.len(), SYNTHETIC_RUN.len());
    run_sequence(&config(b.path(), ""), &SYNTHETIC_RUN, Some(3)).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (name, bytes) in &ta {
        if name.starts_with("meta/") {
            continue; // records the worker count
        }
        assert!(tb[name] == *bytes, "{name} differs between runs");
    }

    for f in [
        "data/afrr.csv",
        "data/manifest.toml",
        "features/table.csv",
        "split.json",
        "metrics.csv",
        "models/full-afrr_pos-q0.9.json",
        "predictions/day_ahead-afrr_neg-l2.csv",
        "explain/full-afrr_pos-l2.csv",
        "explain/full-afrr_pos-l2.trajectory.csv",
        "report/comparison.csv",
        "report/dependency.csv",
        "report/trajectory.csv",
        "report/importance.csv",
        "meta/report.json",
    ] {
        assert!(ta.contains_key(f), "missing {f}");
    }

    // meta lists every artifact with its digest
    let meta: serde_json::Value = serde_json::from_slice(&ta["meta/train.json"]).unwrap();
    assert_eq!(meta["format"], "afrr-run");
    assert_eq!(meta["command"], "train");
    assert_eq!(meta["workers"], 1);
    for art in meta["artifacts"].as_array().unwrap() {
        let path = art["path"].as_str().unwrap();
        let digest = sha2_hex(&ta[path]);
        assert_eq!(art["sha256"], digest.as_str(), "{path}");
    }

    // the sampled explanations hold to the additive identity
    let (index, names, exps) = read_explanations(&ta["explain/full-afrr_pos-q0.9.csv"][..]).unwrap();
    assert_eq!(index.len(), 1000);
    assert!(names.len() > 10);
    check_local_accuracy(&exps, "full-afrr_pos-q0.9").unwrap();
    let (traj, _, _) = read_explanations(&ta["explain/full-afrr_pos-l2.trajectory.csv"][..]).unwrap();
    assert_eq!(traj.len(), 7 * 96);

    let header = |f: &str| String::from_utf8_lossy(&ta[f]).lines().next().unwrap().to_string();
    assert_eq!(header("report/comparison.csv"), "target,split,metric,rank,variant,loss,value");
    assert_eq!(header("report/dependency.csv"), "model,feature,timestamp,value,shap");
    assert_eq!(
        header("report/trajectory.csv"),
        "model,timestamp,actual,prediction,benchmark,base_value,feature,shap"
    );
    assert_eq!(header("report/importance.csv"), "model,target,rank,feature,mean_abs_shap,top_union");
    let metrics = String::from_utf8_lossy(&ta["metrics.csv"]).into_owned();
    assert!(metrics.lines().any(|l| l.starts_with("tendered_pos,afrr_pos,none,continuous_test,coverage,")));
}

fn sha2_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(bytes))
}

#[test]
fn missing_manifest_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_command(&config(dir.path(), ""), Command::Features, None).unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Usage);
    assert!(err.to_string().contains("manifest.toml"), "{err}");
}

#[test]
fn missing_prerequisite_names_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    run_command(&cfg, Command::Synth, None).unwrap();
    run_command(&cfg, Command::Features, None).unwrap();
    match run_command(&cfg, Command::Train, None) {
        Err(Error::MissingArtifact { command, .. }) => assert_eq!(command, "split"),
        other => panic!("{other:?}"),
    }
    assert!(!dir.path().join("meta/train.json").exists());
    assert!(!dir.path().join("models").exists() || std::fs::read_dir(dir.path().join("models")).unwrap().next().is_none());
}

#[test]
fn zero_workers_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_command(&config(dir.path(), ""), Command::Synth, Some(0)).unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Usage);
}
