//! Station metadata, raw observation series and their regular monthly/annual aggregates.

mod aggregate;
mod impute;
mod io;
mod parse;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{aggregate, annual_from_monthly, missingness, MIN_COVERAGE};
pub use impute::impute_seasonal;
pub use io::{read_manifest, read_regular_csv, write_manifest, write_regular_csv};
pub use parse::{parse_observations, ParseReport, Schema, SourceTimezone};

/// Station stratum: country crossed with altitude band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    UKH,
    UKL,
    IH,
    IL,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::UKH, Group::UKL, Group::IH, Group::IL];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::UKH => "UKH",
            Group::UKL => "UKL",
            Group::IH => "IH",
            Group::IL => "IL",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "UKH" => Ok(Group::UKH),
            "UKL" => Ok(Group::UKL),
            "IH" => Ok(Group::IH),
            "IL" => Ok(Group::IL),
            other => Err(Error::InvalidArgument(format!("unknown station group {other:?}"))),
        }
    }
}

/// One row of the corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub id: String,
    pub name: String,
    pub group: Group,
    #[serde(default)]
    pub region: String,
    #[serde(rename = "lat")]
    pub latitude: f64,
    #[serde(rename = "lon")]
    pub longitude: f64,
    #[serde(rename = "alt_m")]
    pub altitude: f64,
    pub cadence_min: u32,
}

impl StationMeta {
    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::InvalidArgument("station id is empty".into()));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::InvalidArgument(format!(
                "station {}: latitude {} outside [-90, 90]",
                self.id, self.latitude
            )));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::InvalidArgument(format!(
                "station {}: longitude {} outside [-180, 180]",
                self.id, self.longitude
            )));
        }
        if self.altitude.is_nan() || self.altitude < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "station {}: negative altitude {}",
                self.id, self.altitude
            )));
        }
        if self.cadence_min == 0 {
            return Err(Error::InvalidArgument(format!(
                "station {}: cadence must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

/// Raw readings on a fixed time grid. Slot `k` sits at `start + k * cadence`;
/// `None` marks an absent reading, whether the row was blank or missing from the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub station: String,
    pub cadence_min: u32,
    pub start: DateTime<Utc>,
    pub values: Vec<Option<f64>>,
}

impl ObservationSeries {
    pub fn new(
        station: impl Into<String>,
        cadence_min: u32,
        start: DateTime<Utc>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if cadence_min == 0 {
            return Err(Error::InvalidArgument("cadence must be positive".into()));
        }
        Ok(Self {
            station: station.into(),
            cadence_min,
            start,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cadence(&self) -> Duration {
        Duration::minutes(i64::from(self.cadence_min))
    }

    pub fn timestamp(&self, slot: usize) -> DateTime<Utc> {
        self.start + self.cadence() * slot as i32
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn samples(&self) -> impl Iterator<Item = (DateTime<Utc>, Option<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| (self.timestamp(k), *v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Monthly,
    Annual,
}

impl Resolution {
    fn per_year(self) -> usize {
        match self {
            Resolution::Monthly => 12,
            Resolution::Annual => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub year: i32,
    /// 1..=12 for monthly series.
    pub month: Option<u32>,
}

/// Evenly indexed mean series starting in January of `start_year`. Monthly
/// series always cover whole years, so keys are implied by position.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularSeries {
    pub station: String,
    pub resolution: Resolution,
    pub start_year: i32,
    pub values: Vec<Option<f64>>,
    pub coverage: Vec<f64>,
}

impl RegularSeries {
    pub fn new(
        station: impl Into<String>,
        resolution: Resolution,
        start_year: i32,
        values: Vec<Option<f64>>,
        coverage: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != coverage.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values but {} coverage entries",
                values.len(),
                coverage.len()
            )));
        }
        if !values.len().is_multiple_of(resolution.per_year()) {
            return Err(Error::InvalidArgument(
                "monthly series must cover whole years".into(),
            ));
        }
        if let Some(c) = coverage.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidArgument(format!("coverage {c} outside [0, 1]")));
        }
        Ok(Self {
            station: station.into(),
            resolution,
            start_year,
            values,
            coverage,
        })
    }

    /// Fully observed series with unit coverage.
    pub fn from_values(
        station: impl Into<String>,
        resolution: Resolution,
        start_year: i32,
        values: &[f64],
    ) -> Result<Self> {
        Self::new(
            station,
            resolution,
            start_year,
            values.iter().copied().map(Some).collect(),
            vec![1.0; values.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_years(&self) -> usize {
        self.values.len() / self.resolution.per_year()
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.n_years() as i32 - 1
    }

    pub fn key(&self, i: usize) -> Key {
        match self.resolution {
            Resolution::Monthly => Key {
                year: self.start_year + (i / 12) as i32,
                month: Some((i % 12) as u32 + 1),
            },
            Resolution::Annual => Key {
                year: self.start_year + i as i32,
                month: None,
            },
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        (0..self.len()).map(|i| self.key(i))
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Dense values; fails if any key is still missing.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| {
                v.ok_or_else(|| Error::MissingValues {
                    station: self.station.clone(),
                })
            })
            .collect()
    }

    /// Values for one calendar month (1..=12), one entry per year.
    pub fn month_subseries(&self, month: u32) -> Vec<Option<f64>> {
        assert!(self.resolution == Resolution::Monthly && (1..=12).contains(&month));
        self.values
            .iter()
            .skip(month as usize - 1)
            .step_by(12)
            .copied()
            .collect()
    }

    /// Restrict (or pad with missing keys) to the inclusive year range.
    pub fn window(&self, start_year: i32, end_year: i32) -> Result<Self> {
        if start_year > end_year {
            return Err(Error::InvalidArgument(format!(
                "window start {start_year} after end {end_year}"
            )));
        }
        let per = self.resolution.per_year();
        let n = (end_year - start_year + 1) as usize * per;
        let mut values = vec![None; n];
        let mut coverage = vec![0.0; n];
        for (i, (v, c)) in self.values.iter().zip(&self.coverage).enumerate() {
            let year = self.start_year + (i / per) as i32;
            if year < start_year || year > end_year {
                continue;
            }
            let j = (year - start_year) as usize * per + i % per;
            values[j] = *v;
            coverage[j] = *c;
        }
        Self::new(self.station.clone(), self.resolution, start_year, values, coverage)
    }
}

/// Percent of expected raw slots that are absent, overall and per calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSummary {
    pub station: String,
    pub pct_missing: f64,
    pub per_month_pct: [f64; 12],
}

pub(crate) fn month_start(year: i32, month: u32) -> DateTime<Utc> {
    chrono::NaiveDate::from_ymd_opt(year, month, 1)
        .expect("valid calendar month")
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
}

pub(crate) fn next_month(year: i32, month: u32) -> (i32, u32) {
    if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    }
}

pub(crate) fn year_month(t: DateTime<Utc>) -> (i32, u32) {
    (t.year(), t.month())
}
