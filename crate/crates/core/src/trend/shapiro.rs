//! Shapiro-Wilk W test using Royston's polynomial approximations for the
//! coefficients and for the null distribution of W (algorithm AS R94).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];
const SMALL: f64 = 1e-19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Coefficients for the lower half of the order statistics (the upper half mirrors them).
fn coefficients(n: usize, normal: &Normal) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (0..half)
        .map(|i| normal.inverse_cdf((i as f64 + 1.0 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    let (first_scaled, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0].powi(2) - 2.0 * m[1].powi(2))
            / (1.0 - 2.0 * a1.powi(2) - 2.0 * a2.powi(2)))
        .sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0].powi(2)) / (1.0 - 2.0 * a1.powi(2))).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for i in first_scaled..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// W statistic and p-value for 3 ≤ n ≤ 5000 values.
pub fn shapiro_wilk(values: &[f64]) -> Result<ShapiroWilk> {
    let n = values.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "Shapiro-Wilk needs 3 to 5000 values, got {n}"
        )));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range.is_nan() || range < SMALL {
        return Err(Error::ZeroVariance("Shapiro-Wilk on constant data".into()));
    }

    let normal = Normal::new(0.0, 1.0).unwrap();
    let half_coef = coefficients(n, &normal);
    // full antisymmetric coefficient vector; the middle element of odd n is 0
    let coef: Vec<f64> = (0..n)
        .map(|i| {
            if i < n / 2 {
                -half_coef[i]
            } else if n - 1 - i < n / 2 {
                half_coef[n - 1 - i]
            } else {
                0.0
            }
        })
        .collect();

    let nf = n as f64;
    let scaled: Vec<f64> = x.iter().map(|v| v / range).collect();
    let x_mean = scaled.iter().sum::<f64>() / nf;
    let a_mean = coef.iter().sum::<f64>() / nf;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (a, v) in coef.iter().zip(&scaled) {
        let da = a - a_mean;
        let dx = v - x_mean;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    // 1 - W, computed without cancellation
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    if n == 3 {
        if w < 0.75 {
            return Ok(ShapiroWilk { w: 0.75, p_value: 0.0 });
        }
        let p = 1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos();
        return Ok(ShapiroWilk {
            w,
            p_value: p.clamp(0.0, 1.0),
        });
    }

    let y = w1.ln();
    let (z, m, s) = if n <= 11 {
        let gamma = poly(&G, nf);
        if y >= gamma {
            return Ok(ShapiroWilk { w, p_value: SMALL });
        }
        (-(gamma - y).ln(), poly(&C3, nf), poly(&C4, nf).exp())
    } else {
        let ln_n = nf.ln();
        (y, poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    let p_value = normal.sf((z - m) / s).clamp(0.0, 1.0);
    Ok(ShapiroWilk { w, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantiles_look_normal() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (1..=20)
            .map(|i| normal.inverse_cdf((i as f64 - 0.375) / 20.25))
            .collect();
        let r = shapiro_wilk(&x).unwrap();
        // scipy.stats.shapiro: W = 0.997179693088336, p = 0.9999999754926056
        assert!((r.w - 0.997_179_693_088_336).abs() < 1e-6, "{}", r.w);
        assert!(r.p_value > 0.9);
    }

    #[test]
    fn outlier_is_rejected() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x: Vec<f64> = (1..20)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / 19.0))
            .collect();
        x.push(8.0);
        let r = shapiro_wilk(&x).unwrap();
        // scipy.stats.shapiro: W = 0.7076091492667889, p = 4.834e-05
        assert!((r.w - 0.707_609_149_266_788_9).abs() < 1e-6, "{}", r.w);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn three_points() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.w - 1.0).abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-6);
        let r = shapiro_wilk(&[1.0, 2.0, 10.0]).unwrap();
        assert!(r.w > 0.0 && r.w <= 1.0 && (0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn domain_errors() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(shapiro_wilk(&vec![0.0; 5001]).is_err());
        assert!(matches!(shapiro_wilk(&[2.0; 10]), Err(Error::ZeroVariance(_))));
    }
}
