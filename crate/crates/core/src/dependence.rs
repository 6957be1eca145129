//! Distance covariance / correlation (V-statistic form) and a permutation
//! test of independence.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{read_labeled_matrix, write_labeled_matrix};
use crate::error::{Error, Result};
use crate::ingest::RegularSeries;
use crate::trend::sens_slope;

pub const MIN_PERMUTATIONS: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorResult {
    pub dcov_sq: f64,
    pub dvar_x_sq: f64,
    pub dvar_y_sq: f64,
    pub dcor: f64,
    /// Set by [`dcor_test`] only.
    pub p_value: Option<f64>,
    /// One of the samples has zero distance variance; `dcor` is reported as 0.
    pub degenerate: bool,
}

impl DcorResult {
    pub fn dcov(&self) -> f64 {
        self.dcov_sq.sqrt()
    }
}

/// Doubly centred pairwise Euclidean distance matrix, row-major `n * n`.
fn double_centered(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut a = vec![0.0; n * n];
    for j in 0..n {
        for k in j + 1..n {
            let d = points[j]
                .iter()
                .zip(&points[k])
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            a[j * n + k] = d;
            a[k * n + j] = d;
        }
    }
    let nf = n as f64;
    // symmetric, so row means double as column means
    let row_mean: Vec<f64> = a.chunks(n).map(|r| r.iter().sum::<f64>() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    for j in 0..n {
        for k in 0..n {
            a[j * n + k] += grand - row_mean[j] - row_mean[k];
        }
    }
    a
}

fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    let n2 = a.len() as f64;
    (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n2).max(0.0)
}

fn check_samples(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "sample counts differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: x.len() });
    }
    for (name, s) in [("x", x), ("y", y)] {
        let dim = s[0].len();
        if dim == 0 || s.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "{name} rows must share one positive dimension"
            )));
        }
    }
    Ok(())
}

fn ratio(dcov_sq: f64, dvar_x_sq: f64, dvar_y_sq: f64) -> Option<f64> {
    let denom = (dvar_x_sq * dvar_y_sq).sqrt();
    (denom > 0.0).then(|| (dcov_sq / denom).max(0.0).sqrt().min(1.0))
}

struct Centered {
    a: Vec<f64>,
    b: Vec<f64>,
    result: DcorResult,
}

fn centered(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Centered> {
    check_samples(x, y)?;
    let a = double_centered(x);
    let b = double_centered(y);
    let dcov_sq = mean_product(&a, &b);
    let dvar_x_sq = mean_product(&a, &a);
    let dvar_y_sq = mean_product(&b, &b);
    let dcor = ratio(dcov_sq, dvar_x_sq, dvar_y_sq);
    Ok(Centered {
        result: DcorResult {
            dcov_sq,
            dvar_x_sq,
            dvar_y_sq,
            dcor: dcor.unwrap_or(0.0),
            p_value: None,
            degenerate: dcor.is_none(),
        },
        a,
        b,
    })
}

/// Distance correlation of paired samples (`n x p` and `n x q`).
pub fn dcor(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<DcorResult> {
    centered(x, y).map(|c| c.result)
}

pub fn dcor_1d(x: &[f64], y: &[f64]) -> Result<DcorResult> {
    dcor(&as_points(x), &as_points(y))
}

fn as_points(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|x| vec![*x]).collect()
}

/// Permutation test: `p = (1 + #{permuted dcor >= observed}) / (permutations + 1)`,
/// permuting the sample order of `y`.
pub fn dcor_test(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Result<DcorResult> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {permutations}"
        )));
    }
    let Centered { a, b, mut result } = centered(x, y)?;
    if result.degenerate {
        result.p_value = Some(1.0);
        return Ok(result);
    }
    let n = x.len();
    let observed = result.dcov_sq;
    // permuted sums are the same terms in a different order; allow for rounding
    let threshold = observed * (1.0 - 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        let mut sum = 0.0;
        for j in 0..n {
            let arow = &a[j * n..(j + 1) * n];
            let brow = &b[perm[j] * n..(perm[j] + 1) * n];
            sum += arow
                .iter()
                .zip(&perm)
                .map(|(av, &pk)| av * brow[pk])
                .sum::<f64>();
        }
        if sum / (n * n) as f64 >= threshold {
            exceed += 1;
        }
    }
    result.p_value = Some((1 + exceed) as f64 / (permutations + 1) as f64);
    Ok(result)
}

pub fn dcor_test_1d(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> Result<DcorResult> {
    dcor_test(&as_points(x), &as_points(y), permutations, seed)
}

/// Labeled symmetric matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_labeled_matrix(path, &self.labels, &self.values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let (labels, values) = read_labeled_matrix(path)?;
        Ok(Self { labels, values })
    }
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn check_series(labels: &[String], series: &[Vec<f64>]) -> Result<()> {
    if labels.len() != series.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} series",
            labels.len(),
            series.len()
        )));
    }
    if let Some(first) = series.first() {
        if series.iter().any(|s| s.len() != first.len()) {
            return Err(Error::InvalidArgument(
                "all series in a dcor matrix must have the same length".into(),
            ));
        }
    }
    Ok(())
}

/// Pairwise dcor between equal-length 1-D series (samples are positions in the series).
pub fn dcor_matrix(labels: &[String], series: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    check_series(labels, series)?;
    let n = series.len();
    let pairs = upper_pairs(n);
    let cells = pairs
        .par_iter()
        .map(|&(i, j)| dcor_1d(&series[i], &series[j]).map(|r| r.dcor))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (&(i, j), v) in pairs.iter().zip(cells) {
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(CorrelationMatrix {
        labels: labels.to_vec(),
        values,
    })
}

/// Permutation p-values for every pair. Pair `p` (upper-triangle order) uses
/// seed `base_seed ^ p`, so the result does not depend on scheduling.
pub fn dcor_pvalue_matrix(
    labels: &[String],
    series: &[Vec<f64>],
    permutations: usize,
    base_seed: u64,
) -> Result<CorrelationMatrix> {
    check_series(labels, series)?;
    let n = series.len();
    let pairs = upper_pairs(n);
    let cells = pairs
        .par_iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            dcor_test_1d(&series[i], &series[j], permutations, base_seed ^ p as u64)
                .map(|r| r.p_value.unwrap_or(1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(cells) {
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(CorrelationMatrix {
        labels: labels.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcorMode {
    /// Twelve matrices; samples are the yearly values of one calendar month.
    MonthlyMean,
    /// One matrix; samples are the twelve per-month Sen slopes of each station.
    MonthlySlope,
}

/// Input vectors for one dcor matrix per month (`MonthlyMean`) or a single
/// slope-profile matrix (`MonthlySlope`), built from gap-free monthly series.
pub fn mode_inputs(series: &[RegularSeries], mode: DcorMode) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    for s in series {
        s.dense()?;
    }
    match mode {
        DcorMode::MonthlyMean => Ok((1..=12u32)
            .map(|m| {
                let vectors = series
                    .iter()
                    .map(|s| s.month_subseries(m).into_iter().flatten().collect())
                    .collect();
                (format!("{m:02}"), vectors)
            })
            .collect()),
        DcorMode::MonthlySlope => {
            let vectors = series
                .iter()
                .map(monthly_slope_profile)
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![("slopes".to_string(), vectors)])
        }
    }
}

/// Sen's slope of each calendar month's year-indexed sub-series.
pub fn monthly_slope_profile(series: &RegularSeries) -> Result<Vec<f64>> {
    (1..=12u32)
        .map(|m| {
            let sub: Vec<f64> = series.month_subseries(m).into_iter().flatten().collect();
            sens_slope(&sub).map(|fit| fit.slope)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hand_case() {
        let x = as_points(&[0.0, 1.0]);
        assert_eq!(double_centered(&x), vec![-0.5, 0.5, 0.5, -0.5]);
        let r = dcor_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(r.dcov_sq, 0.25);
        assert_eq!(r.dcor, 1.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn affine_dependence_is_one() {
        let x = [0.3, -1.2, 2.2, 0.9, 4.1, -0.4, 1.7];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 2.0).collect();
        let r = dcor_1d(&x, &y).unwrap();
        assert!((r.dcor - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_is_degenerate() {
        let r = dcor_1d(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.dcor, 0.0);
        let t = dcor_test_1d(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0], 99, 1).unwrap();
        assert_eq!(t.p_value, Some(1.0));
    }

    #[test]
    fn symmetric_in_arguments() {
        let x = [0.1, 0.5, -0.3, 2.0, 1.1];
        let y = [1.0, -0.2, 0.4, 0.4, 3.0];
        assert_eq!(dcor_1d(&x, &y).unwrap().dcor, dcor_1d(&y, &x).unwrap().dcor);
    }

    #[test]
    fn input_errors() {
        assert!(dcor_1d(&[1.0, 2.0], &[1.0]).is_err());
        assert!(dcor_1d(&[1.0], &[1.0]).is_err());
        assert!(dcor_test_1d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 98, 0).is_err());
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(dcor_matrix(&labels, &[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn quadratic_dependence_detected() {
        let x: Vec<f64> = (0..50).map(|i| -1.0 + 2.0 * i as f64 / 49.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let r = dcor_test_1d(&x, &y, 999, 11).unwrap();
        assert!(r.p_value.unwrap() <= 0.01, "{:?}", r);
    }

    #[test]
    fn p_value_lattice() {
        let x = [0.4, 1.3, -0.7, 2.2, 0.1, -1.5, 0.9, 0.0];
        let y = [1.1, -0.3, 0.2, 0.8, -1.0, 0.6, 0.3, 2.0];
        let p = dcor_test_1d(&x, &y, 99, 5).unwrap().p_value.unwrap();
        let scaled = p * 100.0;
        assert!((scaled - scaled.round()).abs() < 1e-9 && (1.0..=100.0).contains(&scaled.round()));
    }

    #[test]
    fn matrix_has_unit_diagonal() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let series = vec![vec![1.0, 2.0, 4.0, 3.0], vec![1.0, 2.0, 4.0, 3.0], vec![0.0, 5.0, 1.0, 1.0]];
        let m = dcor_matrix(&labels, &series).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
        }
        assert!((m.values[0][1] - 1.0).abs() < 1e-12);
        assert_eq!(m.values[0][2], m.values[2][0]);
    }
}
