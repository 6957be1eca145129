use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lag1 {
    pub r1: f64,
    /// `|r1| > 1.96 / sqrt(n)`
    pub significant: bool,
}

/// Sample lag-1 autocorrelation with the large-sample 5% band.
pub fn lag1_check(values: &[f64]) -> Result<Lag1> {
    let n = values.len();
    if n < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::ZeroVariance("lag-1 autocorrelation of constant data".into()));
    }
    let num: f64 = values
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    let r1 = (num / denom).clamp(-1.0, 1.0);
    Ok(Lag1 {
        r1,
        significant: r1.abs() > 1.96 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn alternating_is_flagged() {
        let x: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = lag1_check(&x).unwrap();
        assert!((r.r1 + 0.95).abs() < 1e-12);
        assert!(r.significant);
    }

    #[test]
    fn white_noise_mostly_unflagged() {
        let mut clean = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            if !lag1_check(&x).unwrap().significant {
                clean += 1;
            }
        }
        assert!(clean >= 90, "{clean}");
    }

    #[test]
    fn single_spike() {
        let mut x = vec![1.0; 30];
        x[12] = 9.0;
        let r = lag1_check(&x).unwrap();
        assert!(r.r1.is_finite() && (-1.0..=1.0).contains(&r.r1));
    }

    #[test]
    fn errors() {
        assert!(lag1_check(&[1.0, 2.0, 3.0]).is_err());
        assert!(lag1_check(&[1.0; 8]).is_err());
    }
}
