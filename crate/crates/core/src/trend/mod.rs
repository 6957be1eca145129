//! Linear trend estimation and the pre-checks that go with it.
//!
//! Every estimator takes the series values at time index `t = 1..n`, so slopes
//! are in units per index step (per year for annual means).

mod mann_kendall;
mod ols;
mod robust;
mod sen;
mod serial;
mod shapiro;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::RegularSeries;

pub use mann_kendall::{mann_kendall, MkResult};
pub use ols::ols_trend;
pub use robust::{
    biweight_rho, biweight_tuning_expectation, m_scale, s_estimator_trend, SEstimatorConfig,
    BIWEIGHT_C,
};
pub use sen::{pairwise_slopes, sens_slope};
pub use serial::{lag1_check, Lag1};
pub use shapiro::{shapiro_wilk, ShapiroWilk};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Ols,
    SEstimator,
    SenMk,
}

/// A fitted line `value = intercept + slope * t` with its goodness of fit and slope test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub method: Method,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub significant_5pct: bool,
}

impl TrendFit {
    pub(crate) fn new(method: Method, slope: f64, intercept: f64, r_squared: f64, p_value: f64) -> Self {
        let r_squared = r_squared.clamp(0.0, 1.0);
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            method,
            slope,
            intercept,
            r_squared,
            p_value,
            significant_5pct: p_value < ALPHA,
        }
    }

    /// `*` when significant at 5%, empty otherwise.
    pub fn stars(&self) -> &'static str {
        if self.significant_5pct {
            "*"
        } else {
            ""
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecheckReport {
    pub shapiro_w: f64,
    pub shapiro_p: f64,
    pub lag1_autocorr: f64,
    pub lag1_significant: bool,
}

pub fn precheck(values: &[f64]) -> Result<PrecheckReport> {
    let sw = shapiro_wilk(values)?;
    let lag = lag1_check(values)?;
    Ok(PrecheckReport {
        shapiro_w: sw.w,
        shapiro_p: sw.p_value,
        lag1_autocorr: lag.r1,
        lag1_significant: lag.significant,
    })
}

/// All trend estimators and pre-checks for one station window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub station: String,
    pub window: (i32, i32),
    pub ols: TrendFit,
    pub s_estimator: TrendFit,
    pub sen: TrendFit,
    pub mk: MkResult,
    pub precheck: PrecheckReport,
}

impl TrendReport {
    pub const CSV_HEADER: &'static str =
        "station,window,ols_slope,ols_r2,ols_p,s_slope,s_r2,s_p,sen_slope,sen_r2,mk_p,shapiro_p,lag1,lag1_sig";

    pub fn window_label(&self) -> String {
        format!("{}-{}", self.window.0, self.window.1)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            self.station,
            self.window_label(),
            self.ols.slope,
            self.ols.r_squared,
            self.ols.p_value,
            self.s_estimator.slope,
            self.s_estimator.r_squared,
            self.s_estimator.p_value,
            self.sen.slope,
            self.sen.r_squared,
            self.mk.p_value,
            self.precheck.shapiro_p,
            self.precheck.lag1_autocorr,
            self.precheck.lag1_significant,
        )
    }
}

/// Run every estimator on a gap-free series. `seed` drives the S-estimator's random starts.
pub fn trend_report(series: &RegularSeries, seed: u64) -> Result<TrendReport> {
    let values = series.dense()?;
    let ols = ols_trend(&values)?;
    let s_estimator = s_estimator_trend(
        &values,
        &SEstimatorConfig {
            seed,
            ..SEstimatorConfig::default()
        },
    )?;
    let mk = mann_kendall(&values)?;
    let sen = sens_slope(&values)?;
    let precheck = precheck(&values)?;
    Ok(TrendReport {
        station: series.station.clone(),
        window: (series.start_year, series.end_year()),
        ols,
        s_estimator,
        sen,
        mk,
        precheck,
    })
}

/// Student-t and normal tail helpers shared by the estimators.
pub(crate) mod dist {
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

    pub fn normal_two_sided(z: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        (2.0 * n.sf(z.abs())).min(1.0)
    }

    pub fn t_two_sided(t: f64, df: f64) -> f64 {
        if t.is_infinite() {
            return 0.0;
        }
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        (2.0 * dist.sf(t.abs())).min(1.0)
    }
}
