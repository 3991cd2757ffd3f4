//! Split construction, metrics and model comparison.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::Duration;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Timestamp;
use crate::error::{Error, Result};
use crate::gbt::pinball;

/// Default length of the trailing continuous test range.
pub const CONTINUOUS_DAYS: i64 = 61;

/// Train/valid/test shares of the non-continuous rows.
pub const TRAIN_SHARE: f64 = 0.64;
pub const VALID_SHARE: f64 = 0.16;

/// Row partition of one table. The continuous test range is trailing and
/// contiguous; the other three sets are a seeded shuffle of the rest, each
/// kept in ascending row order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub continuous_days: i64,
    /// First row of the continuous test range; it runs to the end.
    pub continuous_start: usize,
    pub num_rows: usize,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Named row subsets of a [`SplitPlan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
    ContinuousTest,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [
        SplitName::Train,
        SplitName::Valid,
        SplitName::Test,
        SplitName::ContinuousTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
            SplitName::ContinuousTest => "continuous_test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split {s:?}")))
    }
}

impl SplitPlan {
    pub fn continuous_test(&self) -> std::ops::Range<usize> {
        self.continuous_start..self.num_rows
    }

    pub fn rows(&self, split: SplitName) -> Vec<usize> {
        match split {
            SplitName::Train => self.train.clone(),
            SplitName::Valid => self.valid.clone(),
            SplitName::Test => self.test.clone(),
            SplitName::ContinuousTest => self.continuous_test().collect(),
        }
    }

    /// Split membership of every row.
    pub fn labels(&self) -> Vec<SplitName> {
        let mut out = vec![SplitName::ContinuousTest; self.num_rows];
        for (set, name) in [
            (&self.train, SplitName::Train),
            (&self.valid, SplitName::Valid),
            (&self.test, SplitName::Test),
        ] {
            for &r in set {
                out[r] = name;
            }
        }
        out
    }
}

/// Reserves every row later than `last - continuous_days` as the continuous
/// test range, shuffles the remaining rows with `seed` and cuts them
/// 64/16/20 (train and valid sizes rounded, test takes the rest).
pub fn make_splits(index: &[Timestamp], seed: u64, continuous_days: i64) -> Result<SplitPlan> {
    let (first, last) = match (index.first(), index.last()) {
        (Some(f), Some(l)) => (f.instant(), l.instant()),
        _ => return Err(Error::InvalidArgument("cannot split an empty index".into())),
    };
    if continuous_days <= 0 {
        return Err(Error::InvalidArgument(format!(
            "continuous span must be positive, got {continuous_days} days"
        )));
    }
    let cutoff = last - Duration::days(continuous_days);
    if cutoff < first {
        return Err(Error::InvalidArgument(format!(
            "continuous span of {continuous_days} days covers the whole index"
        )));
    }
    let continuous_start = index.partition_point(|t| t.instant() <= cutoff);
    let mut rest: Vec<usize> = (0..continuous_start).collect();
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = rest.len() as f64;
    let n_train = (n * TRAIN_SHARE).round() as usize;
    let n_valid = ((n * VALID_SHARE).round() as usize).min(rest.len() - n_train);
    let cut = |range: std::ops::Range<usize>| {
        let mut v = rest[range].to_vec();
        v.sort_unstable();
        v
    };
    let train = cut(0..n_train);
    let valid = cut(n_train..n_train + n_valid);
    let test = cut(n_train + n_valid..rest.len());
    Ok(SplitPlan {
        seed,
        continuous_days,
        continuous_start,
        num_rows: index.len(),
        train,
        valid,
        test,
    })
}

fn same_len(y: &[f64], pred: &[f64]) -> Result<()> {
    if y.len() != pred.len() {
        return Err(Error::LengthMismatch(format!(
            "{} observations vs {} predictions",
            y.len(),
            pred.len()
        )));
    }
    Ok(())
}

/// Coefficient of determination `1 - SSE/SST`.
pub fn r2(y: &[f64], pred: &[f64]) -> Result<f64> {
    same_len(y, pred)?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument("r2 needs at least two rows".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::InvalidArgument("r2 undefined: target has zero variance".into()));
    }
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Mean pinball loss at level `q`. Zero for empty input.
pub fn mean_quantile_loss(y: &[f64], pred: &[f64], q: f64) -> Result<f64> {
    same_len(y, pred)?;
    if y.is_empty() {
        return Ok(0.0);
    }
    Ok(y.iter().zip(pred).map(|(a, b)| pinball(*a, *b, q)).sum::<f64>() / y.len() as f64)
}

/// Fraction of rows with `y <= pred`.
pub fn coverage(y: &[f64], pred: &[f64]) -> Result<f64> {
    same_len(y, pred)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("coverage of an empty set".into()));
    }
    Ok(y.iter().zip(pred).filter(|(a, b)| a <= b).count() as f64 / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Metric {
    R2,
    MeanQuantileLoss { q: f64 },
    Coverage,
}

impl Metric {
    pub fn compute(self, y: &[f64], pred: &[f64]) -> Result<f64> {
        match self {
            Metric::R2 => r2(y, pred),
            Metric::MeanQuantileLoss { q } => mean_quantile_loss(y, pred, q),
            Metric::Coverage => coverage(y, pred),
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::MeanQuantileLoss { .. })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::R2 => f.write_str("r2"),
            Metric::MeanQuantileLoss { q } => write!(f, "mean_quantile_loss({q})"),
            Metric::Coverage => f.write_str("coverage"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r2" => Ok(Metric::R2),
            "coverage" => Ok(Metric::Coverage),
            _ => {
                let q = s
                    .strip_prefix("mean_quantile_loss(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|q| q.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))?;
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidArgument(format!("quantile {q} outside (0, 1)")));
                }
                Ok(Metric::MeanQuantileLoss { q })
            }
        }
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One metric value of one model (or benchmark) on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub variant: String,
    pub target: String,
    pub loss: String,
    pub split: String,
    pub metric: Metric,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<f64>>,
}

/// Rows where both series are present.
pub fn paired(y: &[Option<f64>], pred: &[Option<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if y.len() != pred.len() {
        return Err(Error::IndexMismatch(format!(
            "{} observations vs {} predictions",
            y.len(),
            pred.len()
        )));
    }
    Ok(y.iter()
        .zip(pred)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip())
}

/// Scores a benchmark series (e.g. tendered demand) against the target with
/// the same metrics used for models. Rows missing either value are skipped.
pub fn evaluate_benchmark(
    y: &[Option<f64>],
    benchmark: &[Option<f64>],
    metrics: &[Metric],
    name: &str,
    target: &str,
    split: &str,
) -> Result<Vec<MetricReport>> {
    let (y, b) = paired(y, benchmark)?;
    metrics
        .iter()
        .map(|&metric| {
            Ok(MetricReport {
                variant: name.to_string(),
                target: target.to_string(),
                loss: "none".to_string(),
                split: split.to_string(),
                metric,
                value: metric.compute(&y, &b)?,
                residuals: None,
            })
        })
        .collect()
}

/// Reports of one split and metric, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub split: String,
    pub metric: Metric,
    pub rows: Vec<MetricReport>,
}

/// Orders reports by metric (higher R²/coverage first, lower loss first);
/// ties keep input order.
pub fn compare_models(reports: &[MetricReport]) -> Result<Comparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to compare".into()))?;
    if let Some(r) = reports
        .iter()
        .find(|r| r.split != first.split || r.metric.to_string() != first.metric.to_string())
    {
        return Err(Error::InvalidArgument(format!(
            "cannot compare {} on {} with {} on {}",
            first.metric, first.split, r.metric, r.split
        )));
    }
    let mut rows = reports.to_vec();
    let desc = first.metric.higher_is_better();
    rows.sort_by(|a, b| {
        let o = a.value.partial_cmp(&b.value).unwrap_or(Ordering::Equal);
        if desc {
            o.reverse()
        } else {
            o
        }
    });
    Ok(Comparison {
        split: first.split.clone(),
        metric: first.metric,
        rows,
    })
}

/// CSV with columns `variant,target,loss,split,metric,value`.
pub fn write_metric_reports<W: Write>(writer: W, reports: &[MetricReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["variant", "target", "loss", "split", "metric", "value"])?;
    for r in reports {
        wtr.write_record([
            r.variant.clone(),
            r.target.clone(),
            r.loss.clone(),
            r.split.clone(),
            r.metric.to_string(),
            r.value.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metric_reports<R: std::io::Read>(reader: R) -> Result<Vec<MetricReport>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(Error::Schema(format!("metric row {} has {} fields", i + 1, rec.len())));
        }
        let value = rec[5].parse().map_err(|_| Error::ValueParse {
            row: i + 1,
            column: "value".into(),
            value: rec[5].to_string(),
        })?;
        out.push(MetricReport {
            variant: rec[0].to_string(),
            target: rec[1].to_string(),
            loss: rec[2].to_string(),
            split: rec[3].to_string(),
            metric: rec[4].parse()?,
            value,
            residuals: None,
        });
    }
    Ok(out)
}
