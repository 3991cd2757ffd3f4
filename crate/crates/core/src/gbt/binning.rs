use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::error::{Error, Result};

/// Bin index reserved for missing values.
pub const MISSING_BIN: u16 = u16::MAX;

/// Upper edges of one feature's bins. A finite value `v` falls into the
/// first bin whose edge is `>= v`; the last edge is `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub upper_edges: Vec<f64>,
}

impl FeatureBins {
    pub fn num_bins(&self) -> usize {
        self.upper_edges.len()
    }

    pub fn bin(&self, value: Option<f64>) -> u16 {
        match value {
            None => MISSING_BIN,
            Some(v) => self.upper_edges.partition_point(|&e| e < v) as u16,
        }
    }

    /// Split threshold separating bins `..=bin` from the rest.
    pub fn threshold(&self, bin: usize) -> f64 {
        self.upper_edges[bin]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub features: Vec<FeatureBins>,
    /// Features whose values are all missing.
    pub all_missing: Vec<usize>,
}

/// Column-major bin indices.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    pub columns: Vec<Vec<u16>>,
    pub num_rows: usize,
}

impl BinnedMatrix {
    pub fn num_features(&self) -> usize {
        self.columns.len()
    }
}

/// Midpoint `m` with `a <= m < b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn edges_for(values: &mut Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in values.iter() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.is_empty() {
        return Vec::new();
    }
    // indices into `distinct` of the last value of each bin
    let mut bin_ends: Vec<usize> = Vec::new();
    if distinct.len() <= max_bins {
        bin_ends.extend(0..distinct.len());
    } else {
        let mut remaining = values.len();
        let mut acc = 0usize;
        for (i, &(_, count)) in distinct.iter().enumerate() {
            let bins_left = max_bins - bin_ends.len();
            let target = remaining as f64 / bins_left as f64;
            acc += count;
            let values_left = distinct.len() - i - 1;
            if bins_left > 1 && (acc as f64 >= target || values_left < bins_left) {
                bin_ends.push(i);
                remaining -= acc;
                acc = 0;
            }
        }
        if bin_ends.last() != Some(&(distinct.len() - 1)) {
            bin_ends.push(distinct.len() - 1);
        }
    }
    let mut edges: Vec<f64> = bin_ends
        .iter()
        .map(|&i| match distinct.get(i + 1) {
            Some(&(next, _)) => midpoint(distinct[i].0, next),
            None => f64::INFINITY,
        })
        .collect();
    edges.dedup();
    edges
}

/// Quantile-based binning over non-missing values. Columns with at most
/// `max_bins` distinct values get one bin per value.
pub fn bin_features(matrix: &FeatureMatrix, max_bins: usize) -> Result<(BinnedMatrix, Binning)> {
    if !(2..MISSING_BIN as usize).contains(&max_bins) {
        return Err(Error::InvalidArgument(format!(
            "max_bins must lie in [2, {}), got {max_bins}",
            MISSING_BIN
        )));
    }
    let mut features = Vec::with_capacity(matrix.num_features());
    let mut all_missing = Vec::new();
    let mut columns = Vec::with_capacity(matrix.num_features());
    for (f, col) in matrix.columns().iter().enumerate() {
        let mut values: Vec<f64> = col.iter().flatten().copied().collect();
        if values.is_empty() {
            all_missing.push(f);
        }
        let bins = FeatureBins {
            upper_edges: edges_for(&mut values, max_bins),
        };
        columns.push(col.iter().map(|v| bins.bin(*v)).collect());
        features.push(bins);
    }
    Ok((
        BinnedMatrix {
            columns,
            num_rows: matrix.num_rows(),
        },
        Binning {
            features,
            all_missing,
        },
    ))
}
