use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};

use super::ObservationSeries;
use crate::error::{Error, Result};

const NAIVE_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Zone applied to timestamps without an explicit offset. Only fixed offsets are
/// supported; timestamps carrying their own offset always use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceTimezone(pub FixedOffset);

impl SourceTimezone {
    pub fn utc() -> Self {
        Self(FixedOffset::east_opt(0).unwrap())
    }
}

impl FromStr for SourceTimezone {
    type Err = Error;

    /// Accepts `UTC`, `Z`, or `±HH:MM`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("utc") || s == "Z" {
            return Ok(Self::utc());
        }
        let bad = || Error::InvalidArgument(format!("unsupported timezone {s:?}"));
        let (sign, rest) = match s.as_bytes().first() {
            Some(b'+') => (1, &s[1..]),
            Some(b'-') => (-1, &s[1..]),
            _ => return Err(bad()),
        };
        let (h, m) = rest.split_once(':').ok_or_else(bad)?;
        let h: i32 = h.parse().map_err(|_| bad())?;
        let m: i32 = m.parse().map_err(|_| bad())?;
        FixedOffset::east_opt(sign * (h * 3600 + m * 60))
            .map(Self)
            .ok_or_else(bad)
    }
}

/// Column mapping for a station observation file.
#[derive(Debug, Clone)]
pub struct Schema {
    pub timestamp_column: String,
    pub value_column: String,
    pub timezone: SourceTimezone,
    pub cadence_min: u32,
}

impl Schema {
    pub fn new(cadence_min: u32) -> Self {
        Self {
            timestamp_column: "timestamp".into(),
            value_column: "value".into(),
            timezone: SourceTimezone::utc(),
            cadence_min,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Data rows read from the file.
    pub rows: usize,
    /// Rows whose value field was present but not a number; kept as missing.
    pub rejected: usize,
    /// Rows with an empty or `NA` value.
    pub blank: usize,
    /// Grid slots with no row at all.
    pub absent_rows: usize,
}

pub(crate) fn parse_timestamp(raw: &str, tz: SourceTimezone) -> Option<DateTime<Utc>> {
    let s = raw.trim();
    let has_offset = s.ends_with('Z')
        || s.get(10..)
            .is_some_and(|tail| tail.contains('+') || tail.contains('-'));
    if has_offset {
        return DateTime::parse_from_rfc3339(s)
            .ok()
            .map(|t| t.with_timezone(&Utc));
    }
    NAIVE_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .and_then(|naive| tz.0.from_local_datetime(&naive).single())
        .map(|t| t.with_timezone(&Utc))
}

fn is_missing_marker(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

/// Read one station's `timestamp,value` CSV onto its declared grid.
pub fn parse_observations(
    path: impl AsRef<Path>,
    station: &str,
    schema: &Schema,
) -> Result<(ObservationSeries, ParseReport)> {
    let path = path.as_ref();
    if schema.cadence_min == 0 {
        return Err(Error::InvalidArgument("cadence must be positive".into()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::with_capacity(1 << 16, file));

    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                path: path.into(),
                line: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let ts_col = column(&schema.timestamp_column)?;
    let val_col = column(&schema.value_column)?;

    let step_secs = i64::from(schema.cadence_min) * 60;
    let mut report = ParseReport::default();
    let mut start: Option<DateTime<Utc>> = None;
    let mut values: Vec<Option<f64>> = Vec::new();
    let mut record = csv::StringRecord::new();

    while reader
        .read_record(&mut record)
        .map_err(|e| Error::csv(path, e))?
    {
        report.rows += 1;
        let line = record.position().map_or(0, |p| p.line());
        let raw_ts = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts, schema.timezone).ok_or_else(|| Error::Parse {
            path: path.into(),
            line,
            message: format!("unparseable timestamp {raw_ts:?}"),
        })?;

        let slot = match start {
            None => {
                start = Some(ts);
                0
            }
            Some(t0) => {
                let offset = (ts - t0).num_seconds();
                if offset <= 0 || offset <= (values.len() as i64 - 1) * step_secs {
                    return Err(Error::NonMonotonic {
                        path: path.into(),
                        line,
                        timestamp: raw_ts.to_string(),
                    });
                }
                if offset % step_secs != 0 {
                    return Err(Error::Cadence {
                        path: path.into(),
                        line,
                        timestamp: raw_ts.to_string(),
                        cadence_min: schema.cadence_min,
                    });
                }
                (offset / step_secs) as usize
            }
        };
        if slot > values.len() {
            report.absent_rows += slot - values.len();
            values.resize(slot, None);
        }

        let raw_val = record.get(val_col).unwrap_or("");
        let value = if is_missing_marker(raw_val) {
            report.blank += 1;
            None
        } else {
            match raw_val.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    report.rejected += 1;
                    None
                }
            }
        };
        values.push(value);
    }

    let start = start.ok_or_else(|| Error::Empty(format!("{} has no data rows", path.display())))?;
    let series = ObservationSeries::new(station, schema.cadence_min, start, values)?;
    Ok((series, report))
}
