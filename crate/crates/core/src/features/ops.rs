//! Element-wise series transforms. Missing entries always propagate; nothing
//! is imputed.

use serde::{Deserialize, Serialize};

use crate::dataset::Series;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    /// Repeat each coarse value over its interval.
    Pad,
    /// Interpolate linearly between coarse anchors.
    Linear,
}

/// A series at a resolution coarser than 15 minutes; entry `k` belongs to
/// the `k`-th coarse interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSeries {
    pub values: Series,
    pub resolution_minutes: u32,
}

/// Upsamples `coarse` by `factor` to the 15-minute grid.
///
/// Linear mode places each anchor on the first 15-minute slot of its coarse
/// interval and interpolates towards the next anchor; the last interval is
/// held flat. A missing anchor makes its own slots missing, and the slots
/// after the first of the preceding interval.
pub fn upsample(coarse: &CoarseSeries, factor: usize, mode: UpsampleMode) -> Result<Series> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsampling factor must be >= 1".into()));
    }
    if coarse.resolution_minutes as usize != 15 * factor {
        return Err(Error::InvalidArgument(format!(
            "factor {factor} does not match native resolution of {} minutes",
            coarse.resolution_minutes
        )));
    }
    let anchors = &coarse.values;
    let mut out = Vec::with_capacity(anchors.len() * factor);
    match mode {
        UpsampleMode::Pad => {
            for v in anchors {
                out.extend(std::iter::repeat(*v).take(factor));
            }
        }
        UpsampleMode::Linear => {
            if anchors.iter().flatten().count() < 2 {
                return Err(Error::InvalidArgument(
                    "linear upsampling needs at least two non-missing anchors".into(),
                ));
            }
            for (k, a) in anchors.iter().enumerate() {
                let next = anchors.get(k + 1);
                for j in 0..factor {
                    let v = match (a, next) {
                        (None, _) => None,
                        (Some(a), _) if j == 0 => Some(*a),
                        (Some(a), None) => Some(*a),
                        (Some(_), Some(None)) => None,
                        (Some(a), Some(Some(b))) => Some(a + (b - a) * j as f64 / factor as f64),
                    };
                    out.push(v);
                }
            }
        }
    }
    Ok(out)
}

/// First difference: `out[t] = x[t] - x[t-1]`, `out[0]` missing.
pub fn ramp(series: &[Option<f64>]) -> Series {
    let mut out = Vec::with_capacity(series.len());
    if !series.is_empty() {
        out.push(None);
    }
    for w in series.windows(2) {
        out.push(match (w[0], w[1]) {
            (Some(prev), Some(cur)) => Some(cur - prev),
            _ => None,
        });
    }
    out
}

/// `forecast - actual`; positive values mean the forecast overestimated.
pub fn forecast_error(forecast: &[Option<f64>], actual: &[Option<f64>]) -> Result<Series> {
    if forecast.len() != actual.len() {
        return Err(Error::IndexMismatch(format!(
            "forecast has {} rows, actual has {}",
            forecast.len(),
            actual.len()
        )));
    }
    Ok(forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| Some((*f)? - (*a)?))
        .collect())
}

fn sum_columns(columns: &[&Series], len: usize) -> Series {
    (0..len)
        .map(|t| columns.iter().try_fold(0.0, |acc, c| c[t].map(|v| acc + v)))
        .collect()
}

/// Net import `Σ inflows - Σ outflows` over neighbours; with no neighbours
/// the result is zero everywhere.
pub fn flow_balance(inflows: &[&Series], outflows: &[&Series], len: usize) -> Result<Series> {
    if let Some(bad) = inflows.iter().chain(outflows).find(|s| s.len() != len) {
        return Err(Error::IndexMismatch(format!(
            "flow series has {} rows, expected {len}",
            bad.len()
        )));
    }
    let inn = sum_columns(inflows, len);
    let out = sum_columns(outflows, len);
    Ok(inn
        .into_iter()
        .zip(out)
        .map(|(i, o)| Some(i? - o?))
        .collect())
}

/// Sum of one feature type over the other IGCC member states. A missing
/// entry in any country makes the aggregate missing at that step.
pub fn aggregate_igcc(inputs: &[(&str, &Series)]) -> Result<Series> {
    if let Some((country, _)) = inputs
        .iter()
        .find(|(c, _)| c.eq_ignore_ascii_case("DE") || c.eq_ignore_ascii_case("germany"))
    {
        return Err(Error::InvalidArgument(format!(
            "IGCC aggregation excludes Germany, got {country:?}"
        )));
    }
    let Some((_, first)) = inputs.first() else {
        return Err(Error::InvalidArgument("IGCC aggregation needs at least one country".into()));
    };
    let len = first.len();
    if inputs.iter().any(|(_, s)| s.len() != len) {
        return Err(Error::IndexMismatch("IGCC inputs differ in length".into()));
    }
    let cols: Vec<&Series> = inputs.iter().map(|(_, s)| *s).collect();
    Ok(sum_columns(&cols, len))
}
