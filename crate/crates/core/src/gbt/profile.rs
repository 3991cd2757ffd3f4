use serde::{Deserialize, Serialize};

use crate::dataset::{Timestamp, SLOTS_PER_DAY};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ProfileMode {
    Mean,
    Quantile { q: f64 },
}

/// Baseline predicting each 15-minute slot of the (UTC) day by a statistic
/// of its historic values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    pub mode: ProfileMode,
    pub slots: Vec<f64>,
}

impl DailyProfile {
    pub fn predict(&self, index: &[Timestamp]) -> Vec<f64> {
        index.iter().map(|t| self.slots[t.slot_of_day()]).collect()
    }
}

/// Fits the per-slot statistic over the non-missing entries of `y`.
pub fn daily_profile(y: &[Option<f64>], index: &[Timestamp], mode: ProfileMode) -> Result<DailyProfile> {
    if y.len() != index.len() {
        return Err(Error::LengthMismatch(format!(
            "{} targets for {} timestamps",
            y.len(),
            index.len()
        )));
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); SLOTS_PER_DAY];
    for (v, t) in y.iter().zip(index) {
        if let Some(v) = v {
            buckets[t.slot_of_day()].push(*v);
        }
    }
    let slots = buckets
        .iter()
        .enumerate()
        .map(|(slot, values)| {
            let stat = match mode {
                ProfileMode::Mean => stats::mean(values),
                ProfileMode::Quantile { q } => stats::quantile(values, q),
            };
            stat.ok_or(Error::EmptySlot(slot))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DailyProfile { mode, slots })
}
