use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_manifest, Group, StationMeta};

/// Longest contiguous gap the generator plants, in hours.
pub const MAX_GAP_HOURS: usize = 240;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub label: Group,
    pub n_stations: usize,
    /// Planted linear trend, °C per year.
    pub annual_slope: f64,
    /// Mean temperature of each calendar month in the first year, °C.
    pub seasonal_profile: [f64; 12],
    /// Station-level monthly anomaly noise, °C.
    pub noise_sd: f64,
    /// Percentage of hourly readings left blank.
    pub missing_pct: f64,
    /// Monthly anomaly common to every station of the group, °C.
    #[serde(default)]
    pub shared_sd: f64,
    /// Regions assigned round-robin to the group's stations.
    #[serde(default)]
    pub regions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub groups: Vec<GroupSpec>,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_year: i32,
    #[serde(default = "default_end")]
    pub end_year: i32,
    /// Amplitude of the sinusoidal daily cycle, °C.
    #[serde(default = "default_diurnal")]
    pub diurnal_amplitude: f64,
    /// Independent noise on every hourly reading, °C.
    #[serde(default = "default_hourly")]
    pub hourly_sd: f64,
}

fn default_start() -> i32 {
    2002
}
fn default_end() -> i32 {
    2021
}
fn default_diurnal() -> f64 {
    4.0
}
fn default_hourly() -> f64 {
    0.8
}

const IL_PROFILE: [f64; 12] = [2.0, 3.0, 10.0, 13.5, 18.0, 21.5, 24.0, 23.0, 18.5, 14.0, 5.0, 2.0];
const IH_PROFILE: [f64; 12] = [-6.0, -5.5, -3.5, 0.0, 3.5, 8.5, 11.0, 10.5, 6.5, 2.5, -2.5, -5.0];
const UKL_PROFILE: [f64; 12] = [5.0, 6.0, 6.5, 9.0, 12.5, 15.5, 17.5, 17.0, 14.5, 11.0, 8.5, 6.0];
const UKH_PROFILE: [f64; 12] = [-2.0, -2.0, 0.5, 3.0, 7.0, 11.5, 14.0, 13.5, 10.0, 6.5, 2.0, -1.0];

impl SyntheticSpec {
    /// Four groups of eight stations, 2002-2021. The Italian groups warm at
    /// 0.05 °C/yr, the UK groups cool slightly, and the UK highland stations
    /// are missing 23.33% of their readings.
    pub fn four_groups(seed: u64) -> Self {
        let group = |label, slope, profile, noise_sd, missing_pct, regions: &[&str]| GroupSpec {
            label,
            n_stations: 8,
            annual_slope: slope,
            seasonal_profile: profile,
            noise_sd,
            missing_pct,
            shared_sd: 0.5,
            regions: regions.iter().map(|r| r.to_string()).collect(),
        };
        Self {
            groups: vec![
                group(Group::UKH, -0.005, UKH_PROFILE, 0.4, 23.33, &["Scotland"]),
                group(Group::UKL, -0.005, UKL_PROFILE, 0.4, 2.0, &["England"]),
                group(Group::IH, 0.05, IH_PROFILE, 0.3, 3.0, &["Piemonte", "Valle d'Aosta"]),
                group(Group::IL, 0.05, IL_PROFILE, 0.3, 1.5, &["Piemonte", "Valle d'Aosta"]),
            ],
            seed,
            start_year: default_start(),
            end_year: default_end(),
            diurnal_amplitude: default_diurnal(),
            hourly_sd: default_hourly(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(format!("corpus spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.groups.is_empty() {
            return bad("corpus spec has no groups".into());
        }
        if self.start_year > self.end_year {
            return bad(format!("corpus years {}-{} are reversed", self.start_year, self.end_year));
        }
        for g in &self.groups {
            if g.n_stations == 0 {
                return bad(format!("group {} has no stations", g.label));
            }
            if !(0.0..100.0).contains(&g.missing_pct) {
                return bad(format!("group {}: missing_pct {} outside [0, 100)", g.label, g.missing_pct));
            }
            let finite = [g.annual_slope, g.noise_sd, g.shared_sd]
                .iter()
                .chain(g.seasonal_profile.iter())
                .all(|v| v.is_finite());
            if !finite || g.noise_sd < 0.0 || g.shared_sd < 0.0 {
                return bad(format!("group {}: non-finite or negative parameter", g.label));
            }
        }
        if !(self.hourly_sd >= 0.0 && self.diurnal_amplitude.is_finite()) {
            return bad("hourly_sd must be >= 0".into());
        }
        Ok(())
    }

    pub fn n_stations(&self) -> usize {
        self.groups.iter().map(|g| g.n_stations).sum()
    }

    fn n_hours(&self) -> usize {
        let start = NaiveDate::from_ymd_opt(self.start_year, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(self.end_year + 1, 1, 1).unwrap();
        (end - start).num_hours() as usize
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn station_meta(g: &GroupSpec, i: usize, rng: &mut ChaCha8Rng) -> StationMeta {
    let (lat, lon, alt) = match g.label {
        Group::UKH => (56.8, -4.9, (600.0, 1300.0)),
        Group::UKL => (52.0, -1.5, (5.0, 150.0)),
        Group::IH => (45.7, 7.3, (1500.0, 2600.0)),
        Group::IL => (45.2, 7.9, (150.0, 600.0)),
    };
    let region = if g.regions.is_empty() {
        String::new()
    } else {
        g.regions[i % g.regions.len()].clone()
    };
    StationMeta {
        id: format!("{}{:02}", g.label, i + 1),
        name: format!("Synthetic {} {:02}", g.label, i + 1),
        group: g.label,
        region,
        latitude: round4(lat + rng.gen_range(-0.8..0.8)),
        longitude: round4(lon + rng.gen_range(-0.8..0.8)),
        altitude: rng.gen_range::<f64, _>(alt.0..alt.1).round(),
        cadence_min: 60,
    }
}

/// Exactly `round(pct · n / 100)` blank slots, laid down as random blocks of
/// 1..=MAX_GAP_HOURS hours.
fn gap_mask(n: usize, pct: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let target = ((pct / 100.0) * n as f64).round() as usize;
    let mut mask = vec![false; n];
    let mut count = 0;
    while count < target {
        let len = rng.gen_range(1..=MAX_GAP_HOURS);
        let start = rng.gen_range(0..n);
        for slot in mask.iter_mut().skip(start).take(len) {
            if count == target {
                break;
            }
            if !*slot {
                *slot = true;
                count += 1;
            }
        }
    }
    mask
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated sd")
}

/// Write `<id>.csv` hourly files and `stations.csv` under `dir`. Returns the manifest rows.
pub fn gen_corpus(spec: &SyntheticSpec, dir: impl AsRef<Path>) -> Result<Vec<StationMeta>> {
    spec.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n_years = (spec.end_year - spec.start_year + 1) as usize;

    // group-shared anomaly per (year, month), stream 0 of the root seed
    let mut shared_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared: Vec<Vec<f64>> = spec
        .groups
        .iter()
        .map(|g| {
            let d = normal(g.shared_sd);
            (0..n_years * 12).map(|_| d.sample(&mut shared_rng)).collect()
        })
        .collect();

    let mut jobs = Vec::new();
    for (gi, g) in spec.groups.iter().enumerate() {
        for i in 0..g.n_stations {
            jobs.push((gi, i));
        }
    }
    let metas: Vec<StationMeta> = jobs
        .par_iter()
        .enumerate()
        .map(|(stream, &(gi, i))| {
            let g = &spec.groups[gi];
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(stream as u64 + 1);
            let meta = station_meta(g, i, &mut rng);
            let station_noise = normal(g.noise_sd);
            let anomaly: Vec<f64> = (0..n_years * 12).map(|_| station_noise.sample(&mut rng)).collect();
            let mask = gap_mask(spec.n_hours(), g.missing_pct, &mut rng);
            let hourly = normal(spec.hourly_sd);
            let path = dir.join(format!("{}.csv", meta.id));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            let write = |w: &mut BufWriter<File>, rng: &mut ChaCha8Rng| -> std::io::Result<()> {
                writeln!(w, "timestamp,value")?;
                let mut t = NaiveDate::from_ymd_opt(spec.start_year, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
                for &blank in &mask {
                    let (y, m, h) = (t.year(), t.month0() as usize, t.hour());
                    let ym = (y - spec.start_year) as usize * 12 + m;
                    // the noise draw happens for blank slots too, so gaps do not shift later values
                    let e = hourly.sample(rng);
                    write!(w, "{:04}-{:02}-{:02}T{:02}:00,", y, m + 1, t.day(), h)?;
                    if blank {
                        writeln!(w)?;
                    } else {
                        let diurnal = spec.diurnal_amplitude
                            * (2.0 * std::f64::consts::PI * (h as f64 - 9.0) / 24.0).sin();
                        let v = g.seasonal_profile[m]
                            + g.annual_slope * (y - spec.start_year) as f64
                            + shared[gi][ym]
                            + anomaly[ym]
                            + diurnal
                            + e;
                        writeln!(w, "{v:.3}")?;
                    }
                    t += Duration::hours(1);
                }
                w.flush()
            };
            write(&mut w, &mut rng).map_err(|e| Error::io(&path, e))?;
            Ok(meta)
        })
        .collect::<Result<_>>()?;
    write_manifest(dir.join("stations.csv"), &metas)?;
    Ok(metas)
}
