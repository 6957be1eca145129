use super::{mann_kendall, Method, TrendFit};
use crate::error::{Error, Result};

/// All slopes `(x_j - x_k) / (j - k)` for `j > k`, sorted ascending.
pub fn pairwise_slopes(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut slopes = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for k in 0..n {
        for j in k + 1..n {
            slopes.push((values[j] - values[k]) / (j - k) as f64);
        }
    }
    slopes.sort_by(f64::total_cmp);
    slopes
}

/// Median of a sorted slice: the middle element, or the mean of the two middle ones.
fn median_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Sen's slope with a median intercept. R² is measured against the Sen line
/// (floored at 0) and the p-value is the Mann-Kendall one.
pub fn sens_slope(values: &[f64]) -> Result<TrendFit> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let slopes = pairwise_slopes(values);
    let q = median_sorted(&slopes);

    let mut offsets: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, x)| x - q * (i + 1) as f64)
        .collect();
    offsets.sort_by(f64::total_cmp);
    let intercept = median_sorted(&offsets);

    let mean = values.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        0.0
    } else {
        let ss_res: f64 = values
            .iter()
            .enumerate()
            .map(|(i, x)| (x - intercept - q * (i + 1) as f64).powi(2))
            .sum();
        (1.0 - ss_res / ss_tot).max(0.0)
    };

    let p_value = match mann_kendall(values) {
        Ok(mk) => mk.p_value,
        Err(Error::ZeroVariance(_)) | Err(Error::TooFewPoints { .. }) => 1.0,
        Err(e) => return Err(e),
    };
    Ok(TrendFit::new(Method::SenMk, q, intercept, r_squared, p_value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_points() {
        assert_eq!(pairwise_slopes(&[1.0, 2.0, 4.0]), vec![1.0, 1.5, 2.0]);
        assert_eq!(sens_slope(&[1.0, 2.0, 4.0]).unwrap().slope, 1.5);
    }

    #[test]
    fn exact_line() {
        let y: Vec<f64> = (1..=12).map(|t| 2.0 * t as f64).collect();
        let fit = sens_slope(&y).unwrap();
        assert_eq!(fit.slope, 2.0);
        assert_eq!(fit.intercept, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn even_count_median() {
        let y = [0.0, 1.0, 5.0, 4.0];
        let slopes = pairwise_slopes(&y);
        assert_eq!(slopes.len(), 6);
        let fit = sens_slope(&y).unwrap();
        assert_eq!(fit.slope, (slopes[2] + slopes[3]) / 2.0);
    }

    #[test]
    fn constant_series() {
        let fit = sens_slope(&[4.0; 6]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 0.0);
        assert_eq!(fit.p_value, 1.0);
    }

    #[test]
    fn single_point_errors() {
        assert!(sens_slope(&[1.0]).is_err());
        assert!(sens_slope(&[1.0, 3.0]).is_ok());
    }
}
