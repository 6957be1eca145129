use super::{RegularSeries, Resolution};
use crate::error::{Error, Result};

/// Fill gaps in a monthly series one calendar month at a time: each month's
/// year-indexed sub-series is linearly interpolated between observed years and
/// extended flat past its first and last observations.
pub fn impute_seasonal(series: &RegularSeries) -> Result<RegularSeries> {
    if series.resolution != Resolution::Monthly {
        return Err(Error::InvalidArgument(
            "seasonal imputation needs a monthly series".into(),
        ));
    }
    let mut out = series.clone();
    for month in 1..=12u32 {
        let sub = series.month_subseries(month);
        if sub.iter().all(Option::is_some) {
            continue;
        }
        let filled = fill_subseries(&sub).ok_or_else(|| Error::Imputation {
            station: series.station.clone(),
            month,
        })?;
        for (year, v) in filled.into_iter().enumerate() {
            out.values[year * 12 + month as usize - 1] = Some(v);
        }
    }
    Ok(out)
}

fn fill_subseries(sub: &[Option<f64>]) -> Option<Vec<f64>> {
    let observed: Vec<(usize, f64)> = sub
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let (&(first_i, first_v), &(last_i, last_v)) = (observed.first()?, observed.last()?);

    let mut out = Vec::with_capacity(sub.len());
    let mut next = 0; // index into `observed` of the first observation at or after i
    for (i, v) in sub.iter().enumerate() {
        while next < observed.len() && observed[next].0 < i {
            next += 1;
        }
        let value = match v {
            Some(v) => *v,
            None if i < first_i => first_v,
            None if i > last_i => last_v,
            None => {
                let (i0, v0) = observed[next - 1];
                let (i1, v1) = observed[next];
                v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64
            }
        };
        out.push(value);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monthly_with(month: u32, sub: &[Option<f64>]) -> RegularSeries {
        let mut values = vec![Some(0.0); sub.len() * 12];
        for (y, v) in sub.iter().enumerate() {
            values[y * 12 + month as usize - 1] = *v;
        }
        let coverage = vec![1.0; values.len()];
        RegularSeries::new("S", Resolution::Monthly, 2000, values, coverage).unwrap()
    }

    #[test]
    fn interior_gap_is_midpoint() {
        let s = monthly_with(1, &[Some(2.0), None, Some(4.0)]);
        let out = impute_seasonal(&s).unwrap();
        assert_eq!(out.month_subseries(1), vec![Some(2.0), Some(3.0), Some(4.0)]);
    }

    #[test]
    fn leading_gap_takes_nearest_observation() {
        let s = monthly_with(7, &[None, Some(6.0), Some(8.0)]);
        let out = impute_seasonal(&s).unwrap();
        assert_eq!(out.month_subseries(7), vec![Some(6.0), Some(6.0), Some(8.0)]);
    }

    #[test]
    fn trailing_gap_takes_nearest_observation() {
        let s = monthly_with(3, &[Some(1.0), Some(6.0), None, None]);
        let out = impute_seasonal(&s).unwrap();
        assert_eq!(out.month_subseries(3), vec![Some(1.0), Some(6.0), Some(6.0), Some(6.0)]);
    }

    #[test]
    fn complete_series_is_unchanged() {
        let vals: Vec<f64> = (0..36).map(|i| i as f64 * 0.5).collect();
        let s = RegularSeries::from_values("S", Resolution::Monthly, 2000, &vals).unwrap();
        assert_eq!(impute_seasonal(&s).unwrap(), s);
    }

    #[test]
    fn all_missing_month_names_station_and_month() {
        let s = monthly_with(3, &[None, None, None]);
        match impute_seasonal(&s).unwrap_err() {
            Error::Imputation { station, month } => {
                assert_eq!(station, "S");
                assert_eq!(month, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn annual_series_rejected() {
        let s = RegularSeries::from_values("S", Resolution::Annual, 2000, &[1.0, 2.0]).unwrap();
        assert!(impute_seasonal(&s).is_err());
    }
}
