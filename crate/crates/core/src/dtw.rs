//! Weighted dynamic time warping with an off-diagonal penalty.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalDistance {
    Manhattan,
    Euclidean,
}

impl LocalDistance {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            // for scalars both reduce to |a - b|; kept distinct for multivariate callers
            LocalDistance::Manhattan => (a - b).abs(),
            LocalDistance::Euclidean => ((a - b) * (a - b)).sqrt(),
        }
    }
}

impl FromStr for LocalDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "manhattan" => Ok(Self::Manhattan),
            "euclidean" => Ok(Self::Euclidean),
            other => Err(Error::Config(format!("unknown local distance {other:?}"))),
        }
    }
}

impl fmt::Display for LocalDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Manhattan => "manhattan",
            Self::Euclidean => "euclidean",
        })
    }
}

/// Step weights for the three moves into cell `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepWeights {
    /// from `(i-1, j)`
    pub horizontal: f64,
    /// from `(i, j-1)`
    pub vertical: f64,
    /// from `(i-1, j-1)`
    pub diagonal: f64,
}

impl StepWeights {
    pub const SYMMETRIC: Self = Self {
        horizontal: 1.0,
        vertical: 1.0,
        diagonal: 2.0,
    };
    pub const UNIT: Self = Self {
        horizontal: 1.0,
        vertical: 1.0,
        diagonal: 1.0,
    };
}

impl FromStr for StepWeights {
    type Err = Error;

    /// `wh,wv,wd`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("weights must be three numbers, got {s:?}")))?;
        match parts.as_slice() {
            [h, v, d] => Ok(Self {
                horizontal: *h,
                vertical: *v,
                diagonal: *d,
            }),
            _ => Err(Error::Config(format!("weights must be wh,wv,wd, got {s:?}"))),
        }
    }
}

impl fmt::Display for StepWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.horizontal, self.vertical, self.diagonal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwConfig {
    pub local_distance: LocalDistance,
    pub weights: StepWeights,
    /// Strength of the `(i - j)²` penalty.
    pub lambda: f64,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            local_distance: LocalDistance::Manhattan,
            weights: StepWeights::SYMMETRIC,
            lambda: 0.01,
        }
    }
}

impl DtwConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.weights.horizontal, self.weights.vertical, self.weights.diagonal];
        if w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || w.iter().all(|w| *w == 0.0) {
            return Err(Error::Config(format!(
                "step weights must be non-negative with at least one positive, got {}",
                self.weights
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Cost of the cheapest monotone warping path from `(1, 1)` to `(n, m)`.
///
/// Each move into cell `(i, j)` costs its step weight times the local distance,
/// plus `lambda * (i - j)²`. The start cell is entered diagonally from `(0, 0)`.
pub fn dtw_distance(x: &[f64], y: &[f64], cfg: &DtwConfig) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("DTW needs two non-empty sequences".into()));
    }
    cfg.validate()?;
    Ok(dtw_unchecked(x, y, cfg))
}

fn dtw_unchecked(x: &[f64], y: &[f64], cfg: &DtwConfig) -> f64 {
    let m = y.len();
    let StepWeights {
        horizontal: wh,
        vertical: wv,
        diagonal: wd,
    } = cfg.weights;
    // Two rows of the (n+1) x (m+1) accumulated-cost matrix, border at +inf.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for (i, xi) in x.iter().enumerate() {
        curr[0] = f64::INFINITY;
        for (j, yj) in y.iter().enumerate() {
            let cost = cfg.local_distance.eval(*xi, *yj);
            let off = i as f64 - j as f64;
            let best = (prev[j + 1] + wh * cost)
                .min(curr[j] + wv * cost)
                .min(prev[j] + wd * cost);
            curr[j + 1] = best + cfg.lambda * off * off;
        }
        std::mem::swap(&mut prev, &mut curr);
        prev[0] = f64::INFINITY;
    }
    prev[m]
}

/// All pairwise distances, computed in parallel. Only the upper triangle is
/// evaluated and mirrored, so the result is exactly symmetric.
pub fn distance_matrix(
    labels: &[String],
    sequences: &[Vec<f64>],
    cfg: &DtwConfig,
) -> Result<DistanceMatrix> {
    let n = sequences.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {n} sequences",
            labels.len()
        )));
    }
    if sequences.iter().any(Vec::is_empty) {
        return Err(Error::Empty("DTW needs non-empty sequences".into()));
    }
    cfg.validate()?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dtw_unchecked(&sequences[i], &sequences[j], cfg))
        .collect();
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[i][j] = d;
        values[j][i] = d;
    }
    DistanceMatrix::new(labels.to_vec(), values)
}
