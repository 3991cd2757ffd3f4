use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::SynthSpec;
use crate::dataset::Timestamp;
use crate::error::{Error, Result};
use crate::eval::{SplitName, CONTINUOUS_DAYS};
use crate::features::{Target, VariantName};
use crate::gbt::{LossSpec, TrainConfig};

/// Environment variable naming the output directory when the config does not.
pub const OUTPUT_ENV: &str = "AFRR_OUT";
pub const DEFAULT_OUTPUT: &str = "afrr-out";

/// Run configuration. Only `seed` is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch: Option<FetchConfig>,
}

/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Input CSV; `<output>/data/afrr.csv` when absent.
    pub data: Option<PathBuf>,
    /// Schema manifest; `<output>/data/manifest.toml` when absent.
    pub manifest: Option<PathBuf>,
    /// Artifact directory; `$AFRR_OUT`, then `afrr-out`, when absent.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variants: Vec<VariantName>,
    pub targets: Vec<Target>,
    pub losses: Vec<LossSpec>,
    /// Benchmark column per target, scored next to the models when present.
    pub benchmarks: BTreeMap<Target, String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variants: VariantName::ALL.to_vec(),
            targets: vec![Target::AfrrPos, Target::AfrrNeg],
            losses: vec![LossSpec::L2, LossSpec::Quantile { q: 0.9 }],
            benchmarks: BTreeMap::from([
                (Target::AfrrPos, "tendered_pos".to_string()),
                (Target::AfrrNeg, "tendered_neg".to_string()),
            ]),
        }
    }
}

/// Cross-validated grid over the `[train]` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// Whether `train` uses the tuned settings (and requires them).
    pub enabled: bool,
    pub folds: usize,
    pub learning_rates: Vec<f64>,
    pub max_leaves: Vec<usize>,
    pub min_data_in_leaf: Vec<usize>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            enabled: false,
            folds: 5,
            learning_rates: vec![0.05, 0.1],
            max_leaves: vec![15, 31, 63],
            min_data_in_leaf: vec![20, 100],
        }
    }
}

impl TuneConfig {
    pub fn grid(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &max_leaves in &self.max_leaves {
                for &min_data_in_leaf in &self.min_data_in_leaf {
                    out.push(TrainConfig {
                        learning_rate,
                        max_leaves,
                        min_data_in_leaf,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Shuffle seed; the run seed when absent.
    pub seed: Option<u64>,
    pub continuous_days: i64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: None,
            continuous_days: CONTINUOUS_DAYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Rows sampled from `split` for importance and dependency data.
    pub sample_size: usize,
    pub split: SplitName,
    pub variants: Vec<VariantName>,
    /// Losses to explain; every configured loss when absent.
    pub losses: Option<Vec<LossSpec>>,
    /// Leading days of the continuous test range explained row by row.
    pub trajectory_days: i64,
    /// Features per model kept in the dependency and trajectory tables.
    pub top_features: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            sample_size: 1000,
            split: SplitName::Test,
            variants: vec![VariantName::Full],
            losses: None,
            trajectory_days: 7,
            top_features: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub start: Timestamp,
    /// Full generator spec replacing the built-in fixture.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<SynthSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 365 * 96,
            start: Timestamp::from_ymd_hm(2019, 7, 1, 0, 0).expect("on grid"),
            spec: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchConfig {
    pub url: String,
    pub sha256: String,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, applies `key=value` overrides and resolves relative
    /// paths against the file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Config(format!("config file {} not found", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        let mut config = Self::from_toml_str(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.paths.data,
            &mut config.paths.manifest,
            &mut config.paths.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.train
            .validate()
            .map_err(|e| Error::Config(format!("[train] {e}")))?;
        if self.model.targets.is_empty() || self.model.losses.is_empty() {
            return Err(Error::Config("model.targets and model.losses must be non-empty".into()));
        }
        if self.tune.folds < 2 {
            return Err(Error::Config("tune.folds must be at least 2".into()));
        }
        if self.split.continuous_days <= 0 {
            return Err(Error::Config("split.continuous_days must be positive".into()));
        }
        if self.explain.trajectory_days < 0 {
            return Err(Error::Config("explain.trajectory_days must be >= 0".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    pub fn data_path(&self) -> PathBuf {
        self.paths
            .data
            .clone()
            .unwrap_or_else(|| self.output_dir().join("data").join("afrr.csv"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths
            .manifest
            .clone()
            .unwrap_or_else(|| self.output_dir().join("data").join("manifest.toml"))
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.seed)
    }

    /// Losses explained by `explain`.
    pub fn explain_losses(&self) -> Vec<LossSpec> {
        self.explain
            .losses
            .clone()
            .unwrap_or_else(|| self.model.losses.clone())
    }

    /// SHA-256 of the configuration with the location-dependent `[paths]`
    /// section cleared.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig::default();
        let text = toml::to_string(&c).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `a.b.c=value`; the value is read as TOML, falling back to a bare
/// string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(last.to_string(), parse_override_value(raw.trim()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(RunConfig::from_toml_str("", &[]), Err(Error::Config(_))));
        let c = RunConfig::from_toml_str("seed = 3", &[]).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.split.continuous_days, 61);
    }

    #[test]
    fn overrides_win() {
        let text = "seed = 1\n[train]\nnum_rounds = 10\n";
        let c = RunConfig::from_toml_str(
            text,
            &[
                "train.num_rounds=20".into(),
                "model.variants=[\"full\"]".into(),
                "model.losses=[\"quantile:0.8\"]".into(),
                "paths.output=somewhere".into(),
                "seed=9".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.train.num_rounds, 20);
        assert_eq!(c.model.variants, vec![VariantName::Full]);
        assert_eq!(c.model.losses, vec![LossSpec::Quantile { q: 0.8 }]);
        assert_eq!(c.paths.output, Some(PathBuf::from("somewhere")));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for o in ["nokey", "train.bogus=1", "=3", "train.learning_rate=0"] {
            assert!(
                matches!(RunConfig::from_toml_str("seed = 1", &[o.into()]), Err(Error::Config(_))),
                "{o}"
            );
        }
    }

    #[test]
    fn grid_is_crossed() {
        let t = TuneConfig::default();
        assert_eq!(t.grid(&TrainConfig::default()).len(), 12);
    }

    #[test]
    fn fingerprint_ignores_paths() {
        let a = RunConfig::from_toml_str("seed = 1", &["paths.output=a".into()]).unwrap();
        let b = RunConfig::from_toml_str("seed = 1", &["paths.output=b".into()]).unwrap();
        let c = RunConfig::from_toml_str("seed = 2", &[]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
