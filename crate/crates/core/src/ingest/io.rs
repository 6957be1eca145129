use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{RegularSeries, Resolution, StationMeta};
use crate::error::{Error, Result};

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<StationMeta>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut seen = HashSet::new();
    let mut stations = Vec::new();
    for row in reader.deserialize::<StationMeta>() {
        let meta = row.map_err(|e| Error::csv(path, e))?;
        meta.validate()?;
        if !seen.insert(meta.id.clone()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate station id {} in {}",
                meta.id,
                path.display()
            )));
        }
        stations.push(meta);
    }
    if stations.is_empty() {
        return Err(Error::Empty(format!("{} lists no stations", path.display())));
    }
    Ok(stations)
}

pub fn write_manifest(path: impl AsRef<Path>, stations: &[StationMeta]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for s in stations {
        writer.serialize(s).map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// `year,month,mean_c,coverage` for monthly series, `year,mean_c,coverage` for annual.
/// Missing means are written as `NA`; numbers use round-trip precision.
pub fn write_regular_csv(path: impl AsRef<Path>, series: &RegularSeries) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match series.resolution {
        Resolution::Monthly => writeln!(w, "year,month,mean_c,coverage").map_err(io)?,
        Resolution::Annual => writeln!(w, "year,mean_c,coverage").map_err(io)?,
    }
    for (i, key) in series.keys().enumerate() {
        let mean = series.values[i].map_or_else(|| "NA".to_string(), |v| v.to_string());
        let cov = series.coverage[i];
        match key.month {
            Some(m) => writeln!(w, "{},{},{},{}", key.year, m, mean, cov).map_err(io)?,
            None => writeln!(w, "{},{},{}", key.year, mean, cov).map_err(io)?,
        }
    }
    w.flush().map_err(io)
}

pub fn read_regular_csv(path: impl AsRef<Path>, station: &str) -> Result<RegularSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let resolution = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["year", "month", "mean_c", "coverage"] => Resolution::Monthly,
        ["year", "mean_c", "coverage"] => Resolution::Annual,
        other => {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: format!("unexpected header {other:?}"),
            })
        }
    };

    let mut start_year = None;
    let mut values = Vec::new();
    let mut coverage = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let field = |i: usize| record.get(i).unwrap_or("");
        let year: i32 = field(0)
            .parse()
            .map_err(|_| bad(format!("bad year {:?}", field(0))))?;
        let (month, rest) = match resolution {
            Resolution::Monthly => (
                field(1)
                    .parse::<u32>()
                    .map_err(|_| bad(format!("bad month {:?}", field(1))))?,
                2,
            ),
            Resolution::Annual => (1, 1),
        };
        let start = *start_year.get_or_insert(year);
        let expected_index = match resolution {
            Resolution::Monthly => (year - start) as i64 * 12 + month as i64 - 1,
            Resolution::Annual => (year - start) as i64,
        };
        if expected_index != values.len() as i64 {
            return Err(bad(format!(
                "keys must be contiguous from January of {start}; found {year}-{month}"
            )));
        }
        let mean = match field(rest) {
            "" | "NA" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(format!("bad mean {s:?}")))?),
        };
        let cov: f64 = field(rest + 1)
            .parse()
            .map_err(|_| bad(format!("bad coverage {:?}", field(rest + 1))))?;
        values.push(mean);
        coverage.push(cov);
    }
    let start_year =
        start_year.ok_or_else(|| Error::Empty(format!("{} has no rows", path.display())))?;
    RegularSeries::new(station, resolution, start_year, values, coverage)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<Option<f64>> = (0..24)
            .map(|i| if i == 5 { None } else { Some(0.1 * i as f64 + 1.0 / 3.0) })
            .collect();
        let coverage = (0..24).map(|i| i as f64 / 24.0).collect();
        let s = RegularSeries::new("AB", Resolution::Monthly, 2002, values, coverage).unwrap();
        let p = dir.path().join("AB.monthly.csv");
        write_regular_csv(&p, &s).unwrap();
        assert_eq!(read_regular_csv(&p, "AB").unwrap(), s);

        let a = RegularSeries::from_values("AB", Resolution::Annual, 2002, &[1.5, 2.25]).unwrap();
        let p = dir.path().join("AB.annual.csv");
        write_regular_csv(&p, &a).unwrap();
        assert_eq!(read_regular_csv(&p, "AB").unwrap(), a);
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_groups() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stations.csv");
        std::fs::write(
            &p,
            "id,name,group,region,lat,lon,alt_m,cadence_min\nA,Alpha,IH,Piemonte,45.1,7.2,1500,30\nA,Again,IL,Piemonte,45.0,7.0,300,30\n",
        )
        .unwrap();
        assert!(read_manifest(&p).is_err());
        std::fs::write(
            &p,
            "id,name,group,region,lat,lon,alt_m,cadence_min\nA,Alpha,XX,,45.1,7.2,1500,30\n",
        )
        .unwrap();
        assert!(read_manifest(&p).is_err());
        std::fs::write(
            &p,
            "id,name,group,region,lat,lon,alt_m,cadence_min\nA,\"Alpha, North\",UKH,,56.8,-5.0,1130,60\n",
        )
        .unwrap();
        let m = read_manifest(&p).unwrap();
        assert_eq!(m[0].name, "Alpha, North");
        assert_eq!(m[0].region, "");
    }
}
