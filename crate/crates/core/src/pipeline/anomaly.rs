use crate::error::{Error, Result};
use crate::ingest::{RegularSeries, Resolution};

/// Subtract the baseline-window mean. Monthly series use one mean per
/// calendar month; missing values stay missing.
pub fn anomaly(series: &RegularSeries, baseline: (i32, i32)) -> Result<RegularSeries> {
    let (b0, b1) = baseline;
    if b0 > b1 {
        return Err(Error::InvalidArgument(format!("baseline {b0}-{b1} is reversed")));
    }
    if b1 < series.start_year || b0 > series.end_year() {
        return Err(Error::InvalidArgument(format!(
            "{}: baseline {b0}-{b1} does not overlap {}-{}",
            series.station,
            series.start_year,
            series.end_year()
        )));
    }
    let slots = match series.resolution {
        Resolution::Monthly => 12,
        Resolution::Annual => 1,
    };
    let mut sums = vec![(0.0, 0usize); slots];
    for (i, v) in series.values.iter().enumerate() {
        let year = series.key(i).year;
        if let (Some(v), true) = (v, (b0..=b1).contains(&year)) {
            let acc = &mut sums[i % slots];
            acc.0 += v;
            acc.1 += 1;
        }
    }
    let means = sums
        .iter()
        .enumerate()
        .map(|(slot, &(sum, n))| {
            if n == 0 {
                Err(Error::InvalidArgument(format!(
                    "{}: no observed values in baseline {b0}-{b1}{}",
                    series.station,
                    if slots == 12 { format!(" for month {}", slot + 1) } else { String::new() }
                )))
            } else {
                Ok(sum / n as f64)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v.map(|v| v - means[i % slots]))
        .collect();
    RegularSeries::new(
        series.station.clone(),
        series.resolution,
        series.start_year,
        values,
        series.coverage.clone(),
    )
}
