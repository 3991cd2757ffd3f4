//! Command driver behind the `afrr` binary.
//!
//! Every command reads its prerequisites from the output directory, writes
//! its artifacts atomically and finishes with `meta/<command>.json` listing
//! the files written and their SHA-256. A failing command removes whatever
//! it had written.
//!
//! Output layout:
//!
//! ```text
//! data/afrr.csv, data/manifest.toml, data/ground_truth.json   synth / fetch
//! features/table.csv, features/manifest.toml                  features
//! split.json                                                  split
//! tune/<model>.json                                           tune
//! models/<model>.json, models/<model>.fit.json                train
//! predictions/<model>.csv                                     predict
//! metrics.csv                                                 evaluate
//! explain/<model>.csv, explain/<model>.trajectory.csv         explain
//! report/{comparison,dependency,trajectory,importance}.csv     report
//! ```
//!
//! `<model>` is `<variant>-<target>-<loss tag>`, e.g. `full-afrr_pos-q0.9`.

mod artifacts;
mod config;
mod fixture;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Duration;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use artifacts::{read_required, write_atomic, ArtifactRecord, ArtifactWriter};
pub use config::{
    apply_override, ExplainConfig, FetchConfig, ModelConfig, PathsConfig, RunConfig, SplitConfig,
    SynthConfig, TuneConfig, DEFAULT_OUTPUT, OUTPUT_ENV,
};
pub use fixture::{fixture_engineering, fixture_spec, generate_fixture, synth_manifest};

use crate::dataset::{
    fetch_dataset, load_table, read_table_csv, synth_generate, validate_schema, write_table_csv,
    Manifest, Series, TimeTable, Timestamp,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare_models, evaluate_benchmark, make_splits, read_metric_reports, write_metric_reports,
    Metric, MetricReport, SplitName, SplitPlan,
};
use crate::features::{engineer, engineered_manifest, select_variant, ModelVariant, Target, VariantName};
use crate::gbt::{
    cv_grid_search, daily_profile, fit_final, predict, DailyProfile, Ensemble, FinalFit, LossSpec,
    ProfileMode, TrainConfig,
};
use crate::shap::{
    dependency_data, explain_matrix, importance, read_explanations, write_explanations,
    Explanation, ImportanceTable,
};

pub const META_FORMAT: &str = "afrr-run";
pub const META_VERSION: u32 = 1;
pub const PROFILE_FORMAT: &str = "afrr-daily-profile";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Fetch,
    Synth,
    Features,
    Split,
    Tune,
    Train,
    Predict,
    Evaluate,
    Explain,
    Report,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Fetch,
        Command::Synth,
        Command::Features,
        Command::Split,
        Command::Tune,
        Command::Train,
        Command::Predict,
        Command::Evaluate,
        Command::Explain,
        Command::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Fetch => "fetch",
            Command::Synth => "synth",
            Command::Features => "features",
            Command::Split => "split",
            Command::Tune => "tune",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Explain => "explain",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown command {s:?}")))
    }
}

/// Contents of `meta/<command>.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub format: &'static str,
    pub version: u32,
    pub command: String,
    pub seed: u64,
    /// Worker count requested with `--workers`, if any.
    pub workers: Option<usize>,
    pub config_sha256: String,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Runs one command. `workers` bounds the thread pool used by training and
/// explanation; results do not depend on it.
pub fn run_command(config: &RunConfig, command: Command, workers: Option<usize>) -> Result<RunSummary> {
    if workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        cfg: config,
        out: config.output_dir(),
    };
    let mut w = ArtifactWriter::new(&ctx.out);
    let result = pool.install(|| ctx.dispatch(command, &mut w)).and_then(|()| {
        let summary = RunSummary {
            format: META_FORMAT,
            version: META_VERSION,
            command: command.to_string(),
            seed: config.seed,
            workers,
            config_sha256: config.fingerprint(),
            artifacts: w.records().to_vec(),
        };
        w.write_json(&format!("meta/{command}.json"), &summary)?;
        Ok(summary)
    });
    if result.is_err() {
        w.rollback();
    }
    result
}

/// Runs `commands` in order, stopping at the first failure.
pub fn run_sequence(config: &RunConfig, commands: &[Command], workers: Option<usize>) -> Result<Vec<RunSummary>> {
    commands
        .iter()
        .map(|&c| run_command(config, c, workers))
        .collect()
}

/// The commands of a full run on synthetic data.
pub const SYNTHETIC_RUN: [Command; 8] = [
    Command::Synth,
    Command::Features,
    Command::Split,
    Command::Train,
    Command::Predict,
    Command::Evaluate,
    Command::Explain,
    Command::Report,
];

/// One trained model: variant, target and loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelKey {
    pub variant: VariantName,
    pub target: Target,
    pub loss: LossSpec,
}

impl ModelKey {
    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.variant, self.target, self.loss.tag())
    }

    fn model_variant(&self) -> ModelVariant {
        ModelVariant {
            name: self.variant,
            target: self.target,
        }
    }
}

/// Models of a run in variant, target, loss order.
pub fn model_keys(model: &ModelConfig) -> Vec<ModelKey> {
    let mut out = Vec::new();
    for &variant in &model.variants {
        for &target in &model.targets {
            for &loss in &model.losses {
                out.push(ModelKey { variant, target, loss });
            }
        }
    }
    out
}

/// Serialized daily-profile baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredProfile {
    pub format: String,
    pub version: u32,
    pub target: Target,
    pub loss: LossSpec,
    pub profile: DailyProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub model: String,
    pub config: TrainConfig,
    pub train_rows: usize,
    pub valid_rows: usize,
    pub fit: FinalFit,
}

enum Model {
    Gbt(Ensemble),
    Profile(DailyProfile),
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        f(&mut wtr)?;
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    }
    Ok(buf)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

/// Rows of `rows` whose target is present.
fn with_target(rows: &[usize], y: &Series) -> Vec<usize> {
    rows.iter().copied().filter(|&r| y[r].is_some()).collect()
}

impl Ctx<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn dispatch(&self, command: Command, w: &mut ArtifactWriter) -> Result<()> {
        match command {
            Command::Fetch => self.fetch(w),
            Command::Synth => self.synth(w),
            Command::Features => self.features(w),
            Command::Split => self.split(w),
            Command::Tune => self.tune(w),
            Command::Train => self.train(w),
            Command::Predict => self.predict(w),
            Command::Evaluate => self.evaluate(w),
            Command::Explain => self.explain(w),
            Command::Report => self.report(w),
        }
    }

    fn fetch(&self, w: &mut ArtifactWriter) -> Result<()> {
        let spec = self
            .cfg
            .fetch
            .as_ref()
            .ok_or_else(|| Error::Config("fetch needs a [fetch] section with url and sha256".into()))?;
        let dest = self.cfg.data_path();
        fetch_dataset(&spec.url, &dest, &spec.sha256)?;
        w.adopt(&dest, &spec.sha256);
        Ok(())
    }

    fn synth(&self, w: &mut ArtifactWriter) -> Result<()> {
        let s = &self.cfg.synth;
        let (spec, builtin) = match &s.spec {
            Some(spec) => (spec.clone(), false),
            None => (fixture_spec(s.n_rows, s.start, self.cfg.seed), true),
        };
        let (table, truth) = synth_generate(&spec)?;
        let manifest = synth_manifest(&spec, builtin);
        let mut data = Vec::new();
        write_table_csv(&mut data, &table)?;
        w.write_path(&self.cfg.data_path(), &data)?;
        w.write_path(&self.cfg.manifest_path(), manifest.to_toml_string()?.as_bytes())?;
        w.write_json("data/ground_truth.json", &truth)?;
        Ok(())
    }

    fn features(&self, w: &mut ArtifactWriter) -> Result<()> {
        let data = self.cfg.data_path();
        let manifest_path = self.cfg.manifest_path();
        require_file(&manifest_path, "manifest")?;
        require_file(&data, "data file")?;
        let manifest = Manifest::from_path(&manifest_path)?;
        let table = load_table(&data, &manifest)?;
        let report = validate_schema(&table, &manifest);
        if !report.is_ok() {
            return Err(Error::Schema(
                report
                    .findings
                    .iter()
                    .filter(|f| !f.is_warning())
                    .map(|f| format!("{f:?}"))
                    .collect::<Vec<_>>()
                    .join("; "),
            ));
        }
        let engineered = engineer(&table, &manifest)?;
        let em = engineered_manifest(&engineered, &manifest);
        let mut buf = Vec::new();
        write_table_csv(&mut buf, &engineered)?;
        w.write("features/table.csv", &buf)?;
        w.write("features/manifest.toml", em.to_toml_string()?.as_bytes())?;
        w.write_json("features/validation.json", &report)?;
        Ok(())
    }

    fn load_features(&self) -> Result<TimeTable> {
        let mpath = self.path("features/manifest.toml");
        let text = read_required(&mpath, "features")?;
        let manifest = Manifest::from_toml_str(&String::from_utf8_lossy(&text))?;
        let bytes = read_required(&self.path("features/table.csv"), "features")?;
        read_table_csv(&bytes[..], &manifest)
    }

    fn load_split(&self, table: &TimeTable) -> Result<SplitPlan> {
        let bytes = read_required(&self.path("split.json"), "split")?;
        let plan: SplitPlan = serde_json::from_slice(&bytes)?;
        if plan.num_rows != table.len() {
            return Err(Error::IndexMismatch(format!(
                "split plan covers {} rows, feature table has {}",
                plan.num_rows,
                table.len()
            )));
        }
        Ok(plan)
    }

    fn split(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let plan = make_splits(table.index(), self.cfg.split_seed(), self.cfg.split.continuous_days)?;
        w.write_json("split.json", &plan)
    }

    fn target(&self, table: &TimeTable, target: Target) -> Result<Series> {
        Ok(table.column(target.column())?.clone())
    }

    fn tune(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let plan = self.load_split(&table)?;
        let grid = self.cfg.tune.grid(&self.cfg.train);
        for key in model_keys(&self.cfg.model) {
            if key.variant == VariantName::DailyProfile {
                continue;
            }
            let x = select_variant(&table, key.model_variant())?;
            let y = self.target(&table, key.target)?;
            let rows = with_target(&plan.train, &y);
            let ty: Vec<f64> = rows.iter().map(|&r| y[r].expect("filtered")).collect();
            let result = cv_grid_search(
                &x.take_rows(&rows),
                &ty,
                &grid,
                key.loss,
                self.cfg.tune.folds,
                self.cfg.seed,
            )?;
            w.write_json(&format!("tune/{}.json", key.id()), &result)?;
        }
        Ok(())
    }

    fn train_config(&self, key: &ModelKey) -> Result<TrainConfig> {
        if !self.cfg.tune.enabled {
            return Ok(self.cfg.train.clone());
        }
        let bytes = read_required(&self.path(&format!("tune/{}.json", key.id())), "tune")?;
        let result: crate::gbt::CvResult = serde_json::from_slice(&bytes)?;
        Ok(result.best)
    }

    fn train(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let plan = self.load_split(&table)?;
        for key in model_keys(&self.cfg.model) {
            let y = self.target(&table, key.target)?;
            let train_rows = with_target(&plan.train, &y);
            let valid_rows = with_target(&plan.valid, &y);
            let id = key.id();
            if key.variant == VariantName::DailyProfile {
                let mut masked: Series = vec![None; y.len()];
                for &r in train_rows.iter().chain(&valid_rows) {
                    masked[r] = y[r];
                }
                let mode = match key.loss {
                    LossSpec::L2 => ProfileMode::Mean,
                    LossSpec::Quantile { q } => ProfileMode::Quantile { q },
                };
                let profile = daily_profile(&masked, table.index(), mode)?;
                w.write_json(
                    &format!("models/{id}.json"),
                    &StoredProfile {
                        format: PROFILE_FORMAT.into(),
                        version: 1,
                        target: key.target,
                        loss: key.loss,
                        profile,
                    },
                )?;
                continue;
            }
            let x = select_variant(&table, key.model_variant())?;
            let dense: Vec<f64> = y.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let config = self.train_config(&key)?;
            let (ensemble, fit) = fit_final(&x, &dense, &train_rows, &valid_rows, &config, key.loss)?;
            w.write(&format!("models/{id}.json"), ensemble.to_json()?.as_bytes())?;
            w.write_json(
                &format!("models/{id}.fit.json"),
                &TrainRecord {
                    model: id.clone(),
                    config,
                    train_rows: train_rows.len(),
                    valid_rows: valid_rows.len(),
                    fit,
                },
            )?;
        }
        Ok(())
    }

    fn load_model(&self, key: &ModelKey) -> Result<Model> {
        let bytes = read_required(&self.path(&format!("models/{}.json", key.id())), "train")?;
        if key.variant == VariantName::DailyProfile {
            let stored: StoredProfile = serde_json::from_slice(&bytes)?;
            if stored.format != PROFILE_FORMAT {
                return Err(Error::Model(format!("{} is not a daily profile", key.id())));
            }
            Ok(Model::Profile(stored.profile))
        } else {
            Ok(Model::Gbt(Ensemble::from_json(&String::from_utf8_lossy(&bytes))?))
        }
    }

    fn predict(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let plan = self.load_split(&table)?;
        let labels = plan.labels();
        for key in model_keys(&self.cfg.model) {
            let pred = match self.load_model(&key)? {
                Model::Profile(p) => p.predict(table.index()),
                Model::Gbt(e) => predict(&e, &select_variant(&table, key.model_variant())?)?,
            };
            let y = self.target(&table, key.target)?;
            let bytes = csv_bytes(|wtr| {
                wtr.write_record(["timestamp", "split", "actual", "prediction"])?;
                for (i, ts) in table.index().iter().enumerate() {
                    wtr.write_record([
                        ts.to_string(),
                        labels[i].to_string(),
                        cell(y[i]),
                        pred[i].to_string(),
                    ])?;
                }
                Ok(())
            })?;
            w.write(&format!("predictions/{}.csv", key.id()), &bytes)?;
        }
        Ok(())
    }

    fn load_predictions(&self, key: &ModelKey, n: usize) -> Result<Vec<f64>> {
        let path = self.path(&format!("predictions/{}.csv", key.id()));
        let bytes = read_required(&path, "predict")?;
        let mut rdr = csv::Reader::from_reader(&bytes[..]);
        let mut out = Vec::with_capacity(n);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let v = rec.get(3).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| {
                Error::ValueParse {
                    row: i + 1,
                    column: "prediction".into(),
                    value: rec.get(3).unwrap_or("").to_string(),
                }
            })?;
            out.push(v);
        }
        if out.len() != n {
            return Err(Error::IndexMismatch(format!(
                "{} has {} rows, feature table has {n}",
                path.display(),
                out.len()
            )));
        }
        Ok(out)
    }

    /// Metrics of `evaluate`: R², the mean quantile loss at every configured
    /// quantile level (0.9 when none) and coverage.
    fn metrics(&self) -> Vec<Metric> {
        let mut qs: Vec<f64> = Vec::new();
        for l in &self.cfg.model.losses {
            if let LossSpec::Quantile { q } = l {
                if !qs.contains(q) {
                    qs.push(*q);
                }
            }
        }
        if qs.is_empty() {
            qs.push(0.9);
        }
        let mut out = vec![Metric::R2];
        out.extend(qs.into_iter().map(|q| Metric::MeanQuantileLoss { q }));
        out.push(Metric::Coverage);
        out
    }

    fn evaluate(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let plan = self.load_split(&table)?;
        let metrics = self.metrics();
        let splits = [SplitName::Test, SplitName::ContinuousTest];
        let mut reports = Vec::new();
        for key in model_keys(&self.cfg.model) {
            let pred = self.load_predictions(&key, table.len())?;
            let y = self.target(&table, key.target)?;
            for split in splits {
                let rows = with_target(&plan.rows(split), &y);
                let ys: Vec<f64> = rows.iter().map(|&r| y[r].expect("filtered")).collect();
                let ps: Vec<f64> = rows.iter().map(|&r| pred[r]).collect();
                for &metric in &metrics {
                    reports.push(MetricReport {
                        variant: key.variant.to_string(),
                        target: key.target.to_string(),
                        loss: key.loss.tag(),
                        split: split.to_string(),
                        metric,
                        value: metric.compute(&ys, &ps)?,
                        residuals: None,
                    });
                }
            }
        }
        for &target in &self.cfg.model.targets {
            let Some(name) = self.cfg.model.benchmarks.get(&target) else {
                continue;
            };
            if !table.contains(name) {
                continue;
            }
            let y = self.target(&table, target)?;
            let bench = table.column(name)?;
            for split in splits {
                let rows = plan.rows(split);
                let ys: Series = rows.iter().map(|&r| y[r]).collect();
                let bs: Series = rows.iter().map(|&r| bench[r]).collect();
                reports.extend(evaluate_benchmark(
                    &ys,
                    &bs,
                    &metrics,
                    name,
                    target.column(),
                    split.as_str(),
                )?);
            }
        }
        let mut buf = Vec::new();
        write_metric_reports(&mut buf, &reports)?;
        w.write("metrics.csv", &buf)
    }

    fn explained_keys(&self) -> Vec<ModelKey> {
        let mut out = Vec::new();
        for &variant in &self.cfg.explain.variants {
            if variant == VariantName::DailyProfile {
                continue;
            }
            for &target in &self.cfg.model.targets {
                for loss in self.cfg.explain_losses() {
                    out.push(ModelKey { variant, target, loss });
                }
            }
        }
        out
    }

    fn explain(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let plan = self.load_split(&table)?;
        let ex = &self.cfg.explain;
        let mut sample = plan.rows(ex.split);
        sample.shuffle(&mut ChaCha8Rng::seed_from_u64(self.cfg.seed));
        sample.truncate(ex.sample_size);
        sample.sort_unstable();
        let trajectory: Vec<usize> = match table.index().get(plan.continuous_start) {
            Some(start) => {
                let end = start.instant() + Duration::days(ex.trajectory_days);
                plan.continuous_test()
                    .take_while(|&r| table.index()[r].instant() < end)
                    .collect()
            }
            None => Vec::new(),
        };
        for key in self.explained_keys() {
            let Model::Gbt(ensemble) = self.load_model(&key)? else {
                continue;
            };
            let x = select_variant(&table, key.model_variant())?;
            for (rows, suffix) in [(&sample, ""), (&trajectory, ".trajectory")] {
                let exps = explain_matrix(&ensemble, &x.take_rows(rows))?;
                check_local_accuracy(&exps, &key.id())?;
                let index: Vec<Timestamp> = rows.iter().map(|&r| table.index()[r]).collect();
                let mut buf = Vec::new();
                write_explanations(&mut buf, &index, &ensemble.feature_names, &exps)?;
                w.write(&format!("explain/{}{suffix}.csv", key.id()), &buf)?;
            }
        }
        Ok(())
    }

    fn load_explanations(&self, key: &ModelKey, suffix: &str) -> Result<LoadedExplanations> {
        let bytes = read_required(&self.path(&format!("explain/{}{suffix}.csv", key.id())), "explain")?;
        let (index, names, exps) = read_explanations(&bytes[..])?;
        Ok(LoadedExplanations { index, names, exps })
    }

    fn report(&self, w: &mut ArtifactWriter) -> Result<()> {
        let table = self.load_features()?;
        let metrics_bytes = read_required(&self.path("metrics.csv"), "evaluate")?;
        let reports = read_metric_reports(&metrics_bytes[..])?;
        let keys = self.explained_keys();
        let mut sampled = Vec::new();
        for key in &keys {
            let loaded = self.load_explanations(key, "")?;
            let table_imp = importance(&loaded.exps, &loaded.names)?;
            sampled.push((key, loaded, table_imp));
        }
        let top = self.cfg.explain.top_features;

        w.write("report/comparison.csv", &comparison_table(&reports)?)?;

        let bytes = csv_bytes(|wtr| {
            wtr.write_record(["model", "feature", "timestamp", "value", "shap"])?;
            for (key, loaded, imp) in &sampled {
                let values = self.feature_rows(&table, key, &loaded.index)?;
                for entry in imp.top(top) {
                    let dep = dependency_data(&loaded.exps, &loaded.names, &values, &entry.feature)?;
                    for (ts, (v, phi)) in loaded.index.iter().zip(&dep.points) {
                        wtr.write_record([
                            key.id(),
                            entry.feature.clone(),
                            ts.to_string(),
                            cell(*v),
                            phi.to_string(),
                        ])?;
                    }
                }
            }
            Ok(())
        })?;
        w.write("report/dependency.csv", &bytes)?;

        let bytes = csv_bytes(|wtr| {
            wtr.write_record([
                "model",
                "timestamp",
                "actual",
                "prediction",
                "benchmark",
                "base_value",
                "feature",
                "shap",
            ])?;
            for (key, _, imp) in &sampled {
                let traj = self.load_explanations(key, ".trajectory")?;
                let y = self.target(&table, key.target)?;
                let bench = self
                    .cfg
                    .model
                    .benchmarks
                    .get(&key.target)
                    .and_then(|b| table.column(b).ok());
                let chosen: Vec<usize> = imp
                    .top(top)
                    .filter_map(|e| traj.names.iter().position(|n| *n == e.feature))
                    .collect();
                for (ts, e) in traj.index.iter().zip(&traj.exps) {
                    let r = row_of(&table, ts)?;
                    let lead = [
                        key.id(),
                        ts.to_string(),
                        cell(y[r]),
                        e.prediction.to_string(),
                        cell(bench.and_then(|b| b[r])),
                        e.base_value.to_string(),
                    ];
                    let mut other = 0.0;
                    for (f, phi) in e.phi.iter().enumerate() {
                        if !chosen.contains(&f) {
                            other += phi;
                        }
                    }
                    for &f in &chosen {
                        let mut rec = lead.to_vec();
                        rec.push(traj.names[f].clone());
                        rec.push(e.phi[f].to_string());
                        wtr.write_record(&rec)?;
                    }
                    let mut rec = lead.to_vec();
                    rec.push("other".into());
                    rec.push(other.to_string());
                    wtr.write_record(&rec)?;
                }
            }
            Ok(())
        })?;
        w.write("report/trajectory.csv", &bytes)?;

        let bytes = csv_bytes(|wtr| {
            wtr.write_record(["model", "target", "rank", "feature", "mean_abs_shap", "top_union"])?;
            for (key, _, imp) in &sampled {
                let union: BTreeSet<&str> = sampled
                    .iter()
                    .filter(|(k, _, _)| k.target == key.target)
                    .flat_map(|(_, _, t)| t.top(top).map(|e| e.feature.as_str()))
                    .collect();
                for e in &imp.entries {
                    wtr.write_record([
                        key.id(),
                        key.target.to_string(),
                        e.rank.to_string(),
                        e.feature.clone(),
                        e.importance.to_string(),
                        u8::from(union.contains(e.feature.as_str())).to_string(),
                    ])?;
                }
            }
            Ok(())
        })?;
        w.write("report/importance.csv", &bytes)?;
        Ok(())
    }

    /// Feature values of `key`'s variant at the given timestamps.
    fn feature_rows(
        &self,
        table: &TimeTable,
        key: &ModelKey,
        index: &[Timestamp],
    ) -> Result<crate::features::FeatureMatrix> {
        let x = select_variant(table, key.model_variant())?;
        let rows = index
            .iter()
            .map(|ts| row_of(table, ts))
            .collect::<Result<Vec<_>>>()?;
        Ok(x.take_rows(&rows))
    }
}

struct LoadedExplanations {
    index: Vec<Timestamp>,
    names: Vec<String>,
    exps: Vec<Explanation>,
}

fn row_of(table: &TimeTable, ts: &Timestamp) -> Result<usize> {
    let first = table
        .index()
        .first()
        .ok_or_else(|| Error::IndexMismatch("empty feature table".into()))?;
    let offset = (ts.unix_minutes() - first.unix_minutes()) / 15;
    usize::try_from(offset)
        .ok()
        .filter(|&r| r < table.len() && table.index()[r] == *ts)
        .ok_or_else(|| Error::IndexMismatch(format!("timestamp {ts} not in the feature table")))
}

/// Fails when any explanation misses `base + Σ phi = prediction` by more
/// than `1e-8 * max(1, |prediction|)`.
pub fn check_local_accuracy(exps: &[Explanation], model: &str) -> Result<()> {
    for (i, e) in exps.iter().enumerate() {
        let tol = 1e-8 * e.prediction.abs().max(1.0);
        if e.local_accuracy_error() > tol {
            return Err(Error::Model(format!(
                "{model}: explanation {i} violates local accuracy by {:e}",
                e.local_accuracy_error()
            )));
        }
    }
    Ok(())
}

/// Model comparison table: per target, split and metric (in order of first
/// appearance), the reports ranked best first.
fn comparison_table(reports: &[MetricReport]) -> Result<Vec<u8>> {
    let mut groups: Vec<(String, String, String)> = Vec::new();
    for r in reports {
        let g = (r.target.clone(), r.split.clone(), r.metric.to_string());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    csv_bytes(|wtr| {
        wtr.write_record(["target", "split", "metric", "rank", "variant", "loss", "value"])?;
        for (target, split, metric) in &groups {
            let members: Vec<MetricReport> = reports
                .iter()
                .filter(|r| &r.target == target && &r.split == split && &r.metric.to_string() == metric)
                .cloned()
                .collect();
            let cmp = compare_models(&members)?;
            for (rank, r) in cmp.rows.iter().enumerate() {
                wtr.write_record([
                    target.clone(),
                    split.clone(),
                    metric.clone(),
                    (rank + 1).to_string(),
                    r.variant.clone(),
                    r.loss.clone(),
                    r.value.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// Top-`n` features of an importance table, by name.
pub fn top_features(table: &ImportanceTable, n: usize) -> Vec<String> {
    table.top(n).map(|e| e.feature.clone()).collect()
}
