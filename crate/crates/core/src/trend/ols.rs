use super::{dist, Method, TrendFit};
use crate::error::{Error, Result};

/// Least-squares line with a two-sided t-test on the slope (n - 2 degrees of freedom).
/// A constant series yields slope 0, R² 0 and p 1.
pub fn ols_trend(values: &[f64]) -> Result<TrendFit> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let t_mean = (nf + 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / nf;

    let (mut sxx, mut sxy, mut ss_tot) = (0.0, 0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dt = (i + 1) as f64 - t_mean;
        let dy = y - y_mean;
        sxx += dt * dt;
        sxy += dt * dy;
        ss_tot += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;

    if ss_tot == 0.0 {
        return Ok(TrendFit::new(Method::Ols, 0.0, intercept, 0.0, 1.0));
    }

    let ss_res: f64 = values
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let r = y - intercept - slope * (i + 1) as f64;
            r * r
        })
        .sum();
    let r_squared = 1.0 - ss_res / ss_tot;
    let se = (ss_res / (nf - 2.0) / sxx).sqrt();
    let p_value = if se == 0.0 {
        if slope == 0.0 { 1.0 } else { 0.0 }
    } else {
        dist::t_two_sided(slope / se, nf - 2.0)
    };
    Ok(TrendFit::new(Method::Ols, slope, intercept, r_squared, p_value))
}
