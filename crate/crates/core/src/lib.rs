//! Trend detection, pattern clustering and dependence analysis for station
//! temperature series.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] parses raw half-hourly/hourly files, aggregates them to monthly
//!   and annual means and fills monthly gaps per calendar month.
//! * [`trend`] fits OLS and S-estimator regressions, runs the Mann-Kendall test
//!   with Sen's slope, and the Shapiro-Wilk / lag-1 pre-checks.
//! * [`dtw`] and [`cluster`] compute regularized weighted DTW distances,
//!   complete-linkage clustering and silhouette scores.
//! * [`dependence`] computes distance correlation and its permutation test.
//! * [`pipeline`] drives everything from a config file and writes the report bundle.

pub mod cluster;
pub mod dependence;
pub mod dtw;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod trend;

pub use error::{Error, Result};
