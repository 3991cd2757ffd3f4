use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Training loss. `Quantile { q }` is the pinball loss, whose minimizer is
/// the `q`-quantile; `q = 0.9` weights underestimation 9:1 against
/// overestimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossSpec {
    L2,
    Quantile { q: f64 },
}

impl LossSpec {
    pub fn quantile(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(LossSpec::Quantile { q })
        } else {
            Err(Error::InvalidArgument(format!("quantile level {q} outside (0, 1)")))
        }
    }

    /// Gradient and hessian of the per-row loss with respect to the
    /// prediction. Quantile loss uses a constant unit hessian.
    pub fn grad_hess_row(&self, y: f64, pred: f64) -> (f64, f64) {
        match *self {
            LossSpec::L2 => (pred - y, 1.0),
            LossSpec::Quantile { q } => {
                if y > pred {
                    (-q, 1.0)
                } else {
                    (1.0 - q, 1.0)
                }
            }
        }
    }

    /// Per-row loss: squared error, or `q (y - p)` if `y >= p` else
    /// `(1 - q) (p - y)`.
    pub fn loss_row(&self, y: f64, pred: f64) -> f64 {
        match *self {
            LossSpec::L2 => (y - pred) * (y - pred),
            LossSpec::Quantile { q } => pinball(y, pred, q),
        }
    }

    pub fn mean_loss(&self, y: &[f64], pred: &[f64]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        y.iter()
            .zip(pred)
            .map(|(&a, &b)| self.loss_row(a, b))
            .sum::<f64>()
            / y.len() as f64
    }

    /// Constant prediction minimizing the loss: mean, or empirical quantile.
    pub fn base_score(&self, y: &[f64]) -> Option<f64> {
        match *self {
            LossSpec::L2 => stats::mean(y),
            LossSpec::Quantile { q } => stats::quantile(y, q),
        }
    }

    /// Short tag for artifact names, e.g. `l2` or `q0.9`.
    pub fn tag(&self) -> String {
        match self {
            LossSpec::L2 => "l2".into(),
            LossSpec::Quantile { q } => format!("q{q}"),
        }
    }
}

/// Pinball loss of one prediction at level `q`.
pub fn pinball(y: f64, pred: f64, q: f64) -> f64 {
    if y >= pred {
        q * (y - pred)
    } else {
        (1.0 - q) * (pred - y)
    }
}

/// Gradients and hessians of `loss` for every row.
pub fn grad_hess(loss: LossSpec, y: &[f64], pred: &[f64]) -> (Vec<f64>, Vec<f64>) {
    y.iter()
        .zip(pred)
        .map(|(&a, &b)| loss.grad_hess_row(a, b))
        .unzip()
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::L2 => f.write_str("l2"),
            LossSpec::Quantile { q } => write!(f, "quantile:{q}"),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("l2") {
            return Ok(LossSpec::L2);
        }
        let q = s
            .strip_prefix("quantile:")
            .or_else(|| s.strip_prefix('q'))
            .and_then(|q| q.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss {s:?}")))?;
        LossSpec::quantile(q)
    }
}

impl TryFrom<String> for LossSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossSpec> for String {
    fn from(l: LossSpec) -> String {
        l.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients() {
        assert_eq!(LossSpec::L2.grad_hess_row(2.0, 5.0), (3.0, 1.0));
        let q = LossSpec::quantile(0.9).unwrap();
        assert_eq!(q.grad_hess_row(1.0, 0.0), (-0.9, 1.0));
        let (g, h) = q.grad_hess_row(0.0, 1.0);
        assert!((g - 0.1).abs() < 1e-15);
        assert_eq!(h, 1.0);
    }

    #[test]
    fn pinball_cases() {
        let q = LossSpec::quantile(0.9).unwrap();
        assert_eq!(q.loss_row(1.0, 0.0), 0.9);
        assert!((q.loss_row(0.0, 1.0) - 0.1).abs() < 1e-15);
        assert_eq!(q.loss_row(0.4, 0.4), 0.0);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("l2".parse::<LossSpec>().unwrap(), LossSpec::L2);
        let q: LossSpec = "quantile:0.9".parse().unwrap();
        assert_eq!(q, LossSpec::Quantile { q: 0.9 });
        assert_eq!(q.to_string().parse::<LossSpec>().unwrap(), q);
        assert_eq!("q0.5".parse::<LossSpec>().unwrap(), LossSpec::Quantile { q: 0.5 });
        assert!("quantile:1.5".parse::<LossSpec>().is_err());
        assert_eq!(q.tag(), "q0.9");
    }

    #[test]
    fn base_scores() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(LossSpec::L2.base_score(&y), Some(5.5));
        let b = LossSpec::Quantile { q: 0.9 }.base_score(&y).unwrap();
        assert!((b - 9.1).abs() < 1e-12);
    }
}
