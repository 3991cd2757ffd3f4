//! Deterministic synthetic tables with a known ground truth.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    regular_index, ColumnKind, ColumnMeta, Manifest, ManifestColumn, Series, TimeTable, Timestamp,
    SLOTS_PER_DAY,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub start: Timestamp,
    pub seed: u64,
    pub features: Vec<SynthFeature>,
    pub targets: Vec<SynthTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFeature {
    #[serde(flatten)]
    pub meta: ColumnMeta,
    pub process: FeatureProcess,
    /// Fraction of entries replaced by missing markers after generation.
    #[serde(default)]
    pub missing_fraction: f64,
}

/// Generating process of one synthetic feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureProcess {
    White {
        mean: f64,
        sd: f64,
    },
    /// AR(1) around `mean` with innovation standard deviation `sd`.
    Ar1 {
        mean: f64,
        phi: f64,
        sd: f64,
    },
    /// `mean + amplitude * sin(2π (slot + phase) / 96)` plus white noise.
    Daily {
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        noise_sd: f64,
    },
    /// `scale * base + N(0, sd²)` for an earlier declared feature `base`.
    Noisy {
        base: String,
        #[serde(default = "one")]
        scale: f64,
        sd: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TermShape {
    Linear,
    /// `1` when the feature exceeds `threshold`, else `0`.
    Step { threshold: f64 },
    /// `max(0, x - knot)`.
    Relu { knot: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTerm {
    pub feature: String,
    pub coef: f64,
    #[serde(flatten)]
    pub shape: TermShape,
}

impl TargetTerm {
    pub fn linear(feature: impl Into<String>, coef: f64) -> Self {
        TargetTerm {
            feature: feature.into(),
            coef,
            shape: TermShape::Linear,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        self.coef
            * match self.shape {
                TermShape::Linear => x,
                TermShape::Step { threshold } => {
                    if x > threshold {
                        1.0
                    } else {
                        0.0
                    }
                }
                TermShape::Relu { knot } => (x - knot).max(0.0),
            }
    }
}

/// Gaussian noise with standard deviation `sd + hetero_scale * |x_f|`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hetero_feature: Option<String>,
    #[serde(default)]
    pub hetero_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTarget {
    pub name: String,
    #[serde(default = "target_kind")]
    pub kind: ColumnKind,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub terms: Vec<TargetTerm>,
    /// Amplitude of a daily sinusoid `a * sin(2π (slot + phase) / 96)`.
    #[serde(default)]
    pub daily_amplitude: f64,
    #[serde(default)]
    pub daily_phase: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Lower clip applied after noise (e.g. 0 for magnitudes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_min: Option<f64>,
}

fn target_kind() -> ColumnKind {
    ColumnKind::Target
}

impl SynthTarget {
    pub fn new(name: impl Into<String>) -> Self {
        SynthTarget {
            name: name.into(),
            kind: ColumnKind::Target,
            intercept: 0.0,
            terms: Vec::new(),
            daily_amplitude: 0.0,
            daily_phase: 0.0,
            noise: NoiseModel::default(),
            clip_min: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub name: String,
    /// Features with a non-zero term, in declaration order.
    pub drivers: Vec<String>,
    pub daily_amplitude: f64,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub targets: Vec<TargetTruth>,
}

impl SynthSpec {
    /// Manifest describing the generated table; generated columns carry no
    /// upsampling and ramps only for feature columns.
    pub fn manifest(&self) -> Manifest {
        let mut columns: Vec<ManifestColumn> = self
            .features
            .iter()
            .map(|f| ManifestColumn::new(f.meta.clone()))
            .collect();
        for t in &self.targets {
            let mut col = ManifestColumn::new(ColumnMeta::new(&t.name, "GW", t.kind));
            col.ramp = false;
            columns.push(col);
        }
        Manifest {
            timestamp_column: None,
            sign_flip: Vec::new(),
            columns,
            engineering: Default::default(),
        }
    }

    fn check(&self) -> Result<()> {
        let mut declared: Vec<&str> = Vec::new();
        for f in &self.features {
            if let FeatureProcess::Noisy { base, .. } = &f.process {
                if !declared.contains(&base.as_str()) {
                    return Err(Error::UndeclaredFeature(base.clone()));
                }
            }
            if !(0.0..1.0).contains(&f.missing_fraction) {
                return Err(Error::InvalidArgument(format!(
                    "feature {:?}: missing_fraction must lie in [0, 1)",
                    f.meta.name
                )));
            }
            declared.push(&f.meta.name);
        }
        for t in &self.targets {
            for term in &t.terms {
                if !declared.contains(&term.feature.as_str()) {
                    return Err(Error::UndeclaredFeature(term.feature.clone()));
                }
            }
            if let Some(h) = &t.noise.hetero_feature {
                if !declared.contains(&h.as_str()) {
                    return Err(Error::UndeclaredFeature(h.clone()));
                }
            }
        }
        Ok(())
    }
}

fn daily(slot: usize, phase: f64) -> f64 {
    (2.0 * PI * (slot as f64 + phase) / SLOTS_PER_DAY as f64).sin()
}

/// Generates the table described by `spec`. A pure function of the spec,
/// seed included.
pub fn synth_generate(spec: &SynthSpec) -> Result<(TimeTable, GroundTruth)> {
    spec.check()?;
    let n = spec.n_rows;
    let index = regular_index(spec.start, n);
    let slots: Vec<usize> = index.iter().map(Timestamp::slot_of_day).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = move |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let mut values: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut order: Vec<Vec<f64>> = Vec::with_capacity(spec.features.len());
    for f in &spec.features {
        let col: Vec<f64> = match &f.process {
            FeatureProcess::White { mean, sd } => {
                (0..n).map(|_| mean + sd * normal(&mut rng)).collect()
            }
            FeatureProcess::Ar1 { mean, phi, sd } => {
                let stationary_sd = sd / (1.0 - phi * phi).max(1e-12).sqrt();
                let mut state = stationary_sd * normal(&mut rng);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(mean + state);
                    state = phi * state + sd * normal(&mut rng);
                }
                out
            }
            FeatureProcess::Daily {
                mean,
                amplitude,
                phase,
                noise_sd,
            } => slots
                .iter()
                .map(|&s| mean + amplitude * daily(s, *phase) + noise_sd * normal(&mut rng))
                .collect(),
            FeatureProcess::Noisy { base, scale, sd } => {
                let base = &values[base.as_str()];
                base.iter()
                    .map(|b| scale * b + sd * normal(&mut rng))
                    .collect()
            }
        };
        values.insert(&f.meta.name, col.clone());
        order.push(col);
    }

    let mut target_cols = Vec::with_capacity(spec.targets.len());
    let mut truths = Vec::with_capacity(spec.targets.len());
    for t in &spec.targets {
        let mut out = Vec::with_capacity(n);
        for (row, &slot) in slots.iter().enumerate() {
            let mut y = t.intercept + t.daily_amplitude * daily(slot, t.daily_phase);
            for term in &t.terms {
                y += term.eval(values[term.feature.as_str()][row]);
            }
            let mut sd = t.noise.sd;
            if let Some(h) = &t.noise.hetero_feature {
                sd += t.noise.hetero_scale * values[h.as_str()][row].abs();
            }
            y += sd * normal(&mut rng);
            if let Some(lo) = t.clip_min {
                y = y.max(lo);
            }
            out.push(Some(y));
        }
        target_cols.push(out);
        let mut drivers: Vec<String> = Vec::new();
        for term in t.terms.iter().filter(|term| term.coef != 0.0) {
            if !drivers.contains(&term.feature) {
                drivers.push(term.feature.clone());
            }
        }
        truths.push(TargetTruth {
            name: t.name.clone(),
            drivers,
            daily_amplitude: t.daily_amplitude,
            noise: t.noise.clone(),
        });
    }

    let mut columns: Vec<(ColumnMeta, Series)> = Vec::new();
    for (f, col) in spec.features.iter().zip(order) {
        let series = col
            .into_iter()
            .map(|v| {
                if f.missing_fraction > 0.0 && rng.gen::<f64>() < f.missing_fraction {
                    None
                } else {
                    Some(v)
                }
            })
            .collect();
        columns.push((f.meta.clone(), series));
    }
    for (t, col) in spec.targets.iter().zip(target_cols) {
        columns.push((ColumnMeta::new(&t.name, "GW", t.kind), col));
    }
    let table = TimeTable::new(index, columns)?;
    Ok((
        table,
        GroundTruth {
            seed: spec.seed,
            targets: truths,
        },
    ))
}
