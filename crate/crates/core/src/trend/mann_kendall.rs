use serde::{Deserialize, Serialize};

use super::dist;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MkResult {
    pub s_statistic: i64,
    /// Var(S) including the tie correction.
    pub variance: f64,
    pub z_score: f64,
    /// Two-sided, normal approximation.
    pub p_value: f64,
    pub n: usize,
    /// Sizes of groups of equal values (only groups of two or more).
    pub tie_groups: Vec<usize>,
}

fn sign(d: f64) -> i64 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

pub(crate) fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(<[f64]>::len)
        .filter(|&len| len > 1)
        .collect()
}

/// Mann-Kendall test for a monotonic trend.
pub fn mann_kendall(values: &[f64]) -> Result<MkResult> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let s: i64 = values
        .iter()
        .enumerate()
        .flat_map(|(i, xi)| values[i + 1..].iter().map(move |xj| sign(xj - xi)))
        .sum();

    let ties = tie_groups(values);
    let nf = n as f64;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * (t - 1.0) * (2.0 * t + 5.0)
        })
        .sum();
    let variance = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    if variance <= 0.0 {
        return Err(Error::ZeroVariance("all values are identical".into()));
    }

    let z_score = match s.signum() {
        1 => (s - 1) as f64 / variance.sqrt(),
        -1 => (s + 1) as f64 / variance.sqrt(),
        _ => 0.0,
    };
    Ok(MkResult {
        s_statistic: s,
        variance,
        z_score,
        p_value: dist::normal_two_sided(z_score),
        n,
        tie_groups: ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerate ordered pairs directly, counting concordant minus discordant.
    fn brute_s(x: &[f64]) -> i64 {
        let mut s = 0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                if j > i {
                    s += (x[j] > x[i]) as i64 - (x[j] < x[i]) as i64;
                }
            }
        }
        s
    }

    #[test]
    fn three_increasing() {
        let r = mann_kendall(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.s_statistic, 3);
        assert_eq!(r.s_statistic, brute_s(&[1.0, 2.0, 3.0]));
        assert!((r.variance - 66.0 / 18.0).abs() < 1e-12);
        assert!((r.z_score - 2.0 / (66.0f64 / 18.0).sqrt()).abs() < 1e-12);
        assert!((r.z_score - 1.0445).abs() < 1e-4);
        // 2 * (1 - Phi(1.04447...))
        assert!((r.p_value - 0.2963).abs() < 1e-4, "{}", r.p_value);
    }

    #[test]
    fn tie_correction() {
        let r = mann_kendall(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.s_statistic, 2);
        assert_eq!(r.tie_groups, vec![2]);
        assert!((r.variance - (66.0 - 18.0) / 18.0).abs() < 1e-12);
        assert!((r.variance - 2.6667).abs() < 1e-4);
    }

    #[test]
    fn strictly_decreasing() {
        for n in 3..15 {
            let x: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
            let r = mann_kendall(&x).unwrap();
            assert_eq!(r.s_statistic, -((n * (n - 1) / 2) as i64));
            assert!(r.z_score < 0.0);
        }
    }

    #[test]
    fn constant_errors() {
        assert!(matches!(mann_kendall(&[2.0; 5]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn zero_s_gives_zero_z() {
        let r = mann_kendall(&[1.0, 3.0, 2.0, 2.5, 1.5]).unwrap();
        assert_eq!(r.s_statistic, brute_s(&[1.0, 3.0, 2.0, 2.5, 1.5]));
        if r.s_statistic == 0 {
            assert_eq!(r.z_score, 0.0);
            assert_eq!(r.p_value, 1.0);
        }
    }
}
