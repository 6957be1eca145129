use chrono::{DateTime, Datelike, Utc};

use super::{
    month_start, next_month, year_month, MissingnessSummary, ObservationSeries, RegularSeries,
    Resolution,
};
use crate::error::{Error, Result};

/// Windows with a smaller fraction of their raw slots present are treated as missing.
pub const MIN_COVERAGE: f64 = 0.5;

fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        q
    } else {
        q + 1
    }
}

/// Grid slot range `[lo, hi)` falling inside `[from, to)`, on the grid extended beyond the data.
fn slot_range(obs: &ObservationSeries, from: DateTime<Utc>, to: DateTime<Utc>) -> (i64, i64) {
    let step = i64::from(obs.cadence_min) * 60;
    let lo = div_ceil((from - obs.start).num_seconds(), step);
    let hi = div_ceil((to - obs.start).num_seconds(), step);
    (lo, hi)
}

struct Window {
    expected: usize,
    present: usize,
    sum: f64,
}

fn window_stats(obs: &ObservationSeries, from: DateTime<Utc>, to: DateTime<Utc>) -> Window {
    let (lo, hi) = slot_range(obs, from, to);
    let n = obs.len() as i64;
    let (mut present, mut sum) = (0usize, 0.0);
    for v in obs.values[lo.clamp(0, n) as usize..hi.clamp(0, n) as usize]
        .iter()
        .flatten()
    {
        present += 1;
        sum += v;
    }
    Window {
        expected: (hi - lo).max(0) as usize,
        present,
        sum,
    }
}

/// Mean of present raw samples per calendar month or year, covering whole years
/// from the first to the last sample. Windows below [`MIN_COVERAGE`] are left missing.
pub fn aggregate(obs: &ObservationSeries, resolution: Resolution) -> Result<RegularSeries> {
    if obs.is_empty() {
        return Err(Error::Empty(format!("station {} has no samples", obs.station)));
    }
    let first_year = obs.start.year();
    let last_year = obs.timestamp(obs.len() - 1).year();

    let windows: Vec<(DateTime<Utc>, DateTime<Utc>)> = match resolution {
        Resolution::Monthly => (first_year..=last_year)
            .flat_map(|y| (1..=12).map(move |m| (y, m)))
            .map(|(y, m)| {
                let (ny, nm) = next_month(y, m);
                (month_start(y, m), month_start(ny, nm))
            })
            .collect(),
        Resolution::Annual => (first_year..=last_year)
            .map(|y| (month_start(y, 1), month_start(y + 1, 1)))
            .collect(),
    };

    let mut values = Vec::with_capacity(windows.len());
    let mut coverage = Vec::with_capacity(windows.len());
    for (from, to) in windows {
        let w = window_stats(obs, from, to);
        let cov = if w.expected == 0 {
            0.0
        } else {
            w.present as f64 / w.expected as f64
        };
        coverage.push(cov);
        values.push((w.present > 0 && cov >= MIN_COVERAGE).then(|| w.sum / w.present as f64));
    }
    RegularSeries::new(obs.station.clone(), resolution, first_year, values, coverage)
}

/// Annual means as the equal-weight average of twelve gap-free monthly means.
pub fn annual_from_monthly(monthly: &RegularSeries) -> Result<RegularSeries> {
    if monthly.resolution != Resolution::Monthly {
        return Err(Error::InvalidArgument("expected a monthly series".into()));
    }
    let dense = monthly.dense()?;
    let values = dense
        .chunks(12)
        .map(|year| Some(year.iter().sum::<f64>() / 12.0))
        .collect();
    let coverage = monthly
        .coverage
        .chunks(12)
        .map(|year| year.iter().sum::<f64>() / 12.0)
        .collect();
    RegularSeries::new(
        monthly.station.clone(),
        Resolution::Annual,
        monthly.start_year,
        values,
        coverage,
    )
}

/// Share of absent slots between the first and last sample, overall and per calendar month.
pub fn missingness(obs: &ObservationSeries) -> MissingnessSummary {
    let mut expected = [0usize; 12];
    let mut absent = [0usize; 12];
    if !obs.is_empty() {
        let end = obs.timestamp(obs.len() - 1);
        let (mut y, mut m) = year_month(obs.start);
        loop {
            let (ny, nm) = next_month(y, m);
            let (lo, hi) = slot_range(obs, month_start(y, m), month_start(ny, nm));
            let lo = lo.max(0) as usize;
            let hi = (hi.max(0) as usize).min(obs.len());
            if lo < hi {
                expected[m as usize - 1] += hi - lo;
                absent[m as usize - 1] += obs.values[lo..hi].iter().filter(|v| v.is_none()).count();
            }
            if month_start(ny, nm) > end {
                break;
            }
            (y, m) = (ny, nm);
        }
    }
    let pct = |a: usize, e: usize| if e == 0 { 0.0 } else { 100.0 * a as f64 / e as f64 };
    let mut per_month_pct = [0.0; 12];
    for m in 0..12 {
        per_month_pct[m] = pct(absent[m], expected[m]);
    }
    MissingnessSummary {
        station: obs.station.clone(),
        pct_missing: pct(obs.missing_count(), obs.len()),
        per_month_pct,
    }
}
