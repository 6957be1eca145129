//! End-to-end orchestration: corpus generation, staged processing and the report bundle.
//!
//! Bundle layout under the output directory:
//!
//! ```text
//! ingest/<id>.monthly.csv     aggregated monthly means before imputation
//! missingness.csv
//! series/<id>.monthly.csv     gap-free monthly series
//! series/<id>.annual.csv
//! trends_annual.csv / .md     per-station OLS, S-estimator and Sen/MK fits
//! trends_monthly_sen.csv      per-station, per-month Sen slopes
//! silhouette_k.csv            mean silhouette for each k in the sensitivity range
//! clusters_monthly.csv        assignments for the twelve monthly flows
//! clusters_slopes.csv         assignments for the slope profiles
//! clusters_profile.csv        assignments for the mean seasonal cycle
//! clusters.json
//! dtw/dtw_<flow>.csv
//! dcor/dcor_<flow>.csv        01..12, slopes, full
//! dcor/dcor_pvalues.json      when permutations > 0
//! dcor_summary.csv            within- and between-group mean dcor
//! anomalies_annual.csv
//! anomaly_group_trends.csv
//! manifest.json
//! ```

mod anomaly;
mod config;
mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cluster::{hcluster, select_k, ClusterSolution, DistanceMatrix, KScore};
use crate::dependence::{dcor_matrix, dcor_pvalue_matrix, mode_inputs, monthly_slope_profile, CorrelationMatrix, DcorMode};
use crate::dtw::distance_matrix;
use crate::error::{Error, Result};
use crate::ingest::{
    aggregate, annual_from_monthly, impute_seasonal, missingness, parse_observations, read_manifest,
    read_regular_csv, write_regular_csv, Group, MissingnessSummary, RegularSeries, Resolution, Schema,
    SourceTimezone, StationMeta,
};
use crate::trend::{mann_kendall, ols_trend, sens_slope, trend_report, TrendReport};

pub use anomaly::anomaly;
pub use config::{parse_range, ConfigOverrides, PipelineConfig};
pub use synth::{gen_corpus, GroupSpec, SyntheticSpec, MAX_GAP_HOURS};

/// Flow names for the monthly clustering and dcor matrices.
pub fn month_flows() -> Vec<String> {
    (1..=12).map(|m| format!("{m:02}")).collect()
}

/// Independent sub-seed for stream `stream`, item `index` (SplitMix64 finaliser).
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0xA24B_AED4_963E_E407) ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_TRENDS: u64 = 1;
const STREAM_DCOR: u64 = 2;

/// Station metadata with its gap-free monthly and annual series.
#[derive(Debug, Clone)]
pub struct Station {
    pub meta: StationMeta,
    pub monthly: RegularSeries,
    pub annual: RegularSeries,
}

/// Monthly aggregate before imputation, with the raw-data missingness.
#[derive(Debug, Clone)]
pub struct IngestedStation {
    pub meta: StationMeta,
    pub monthly: RegularSeries,
    pub missingness: MissingnessSummary,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialising {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn load_stations(cfg: &PipelineConfig) -> Result<Vec<StationMeta>> {
    read_manifest(cfg.manifest_path())
}

// ---------------------------------------------------------------- ingest

pub fn ingest(cfg: &PipelineConfig, metas: &[StationMeta]) -> Result<Vec<IngestedStation>> {
    let tz: SourceTimezone = cfg.timezone.parse()?;
    metas
        .par_iter()
        .map(|meta| {
            let schema = Schema {
                timezone: tz,
                ..Schema::new(meta.cadence_min)
            };
            let path = cfg.corpus_dir.join(format!("{}.csv", meta.id));
            let (obs, _report) = parse_observations(&path, &meta.id, &schema)?;
            let monthly = aggregate(&obs, Resolution::Monthly)?.window(cfg.start_year, cfg.end_year)?;
            Ok(IngestedStation {
                meta: meta.clone(),
                monthly,
                missingness: missingness(&obs),
            })
        })
        .collect()
}

pub fn write_ingest(out: &Path, stations: &[IngestedStation]) -> Result<()> {
    let mut table = String::from("station,group,pct_missing");
    for m in 1..=12 {
        let _ = write!(table, ",m{m:02}");
    }
    table.push('\n');
    ensure_dir(&out.join("ingest"))?;
    for s in stations {
        write_regular_csv(out.join("ingest").join(format!("{}.monthly.csv", s.meta.id)), &s.monthly)?;
        let _ = write!(table, "{},{},{:.2}", s.meta.id, s.meta.group, s.missingness.pct_missing);
        for p in s.missingness.per_month_pct {
            let _ = write!(table, ",{p:.2}");
        }
        table.push('\n');
    }
    write_text(&out.join("missingness.csv"), &table)
}

pub fn load_ingest(out: &Path, metas: &[StationMeta]) -> Result<Vec<RegularSeries>> {
    metas
        .iter()
        .map(|m| read_regular_csv(out.join("ingest").join(format!("{}.monthly.csv", m.id)), &m.id))
        .collect()
}

// ---------------------------------------------------------------- impute

pub fn impute(metas: &[StationMeta], monthly: &[RegularSeries]) -> Result<Vec<Station>> {
    metas
        .iter()
        .zip(monthly)
        .map(|(meta, raw)| {
            let monthly = impute_seasonal(raw)?;
            let annual = annual_from_monthly(&monthly)?;
            Ok(Station {
                meta: meta.clone(),
                monthly,
                annual,
            })
        })
        .collect()
}

pub fn write_series(out: &Path, stations: &[Station]) -> Result<()> {
    let dir = out.join("series");
    ensure_dir(&dir)?;
    for s in stations {
        write_regular_csv(dir.join(format!("{}.monthly.csv", s.meta.id)), &s.monthly)?;
        write_regular_csv(dir.join(format!("{}.annual.csv", s.meta.id)), &s.annual)?;
    }
    Ok(())
}

pub fn load_series(out: &Path, metas: &[StationMeta]) -> Result<Vec<Station>> {
    let dir = out.join("series");
    metas
        .iter()
        .map(|meta| {
            let monthly = read_regular_csv(dir.join(format!("{}.monthly.csv", meta.id)), &meta.id)?;
            let annual = read_regular_csv(dir.join(format!("{}.annual.csv", meta.id)), &meta.id)?;
            monthly.dense()?;
            annual.dense()?;
            Ok(Station {
                meta: meta.clone(),
                monthly,
                annual,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- trends

#[derive(Debug, Clone)]
pub struct MonthlySen {
    pub station: String,
    pub month: u32,
    pub slope: f64,
    pub mk_p: f64,
}

#[derive(Debug, Clone)]
pub struct TrendOutputs {
    pub annual: Vec<TrendReport>,
    pub monthly_sen: Vec<MonthlySen>,
}

pub fn trends(cfg: &PipelineConfig, stations: &[Station]) -> Result<TrendOutputs> {
    let annual = stations
        .par_iter()
        .enumerate()
        .map(|(i, s)| trend_report(&s.annual, derive_seed(cfg.seed, STREAM_TRENDS, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut monthly_sen = Vec::with_capacity(stations.len() * 12);
    for s in stations {
        for month in 1..=12u32 {
            let sub: Vec<f64> = s.monthly.month_subseries(month).into_iter().flatten().collect();
            monthly_sen.push(MonthlySen {
                station: s.meta.id.clone(),
                month,
                slope: sens_slope(&sub)?.slope,
                mk_p: mann_kendall(&sub)?.p_value,
            });
        }
    }
    Ok(TrendOutputs { annual, monthly_sen })
}

pub fn write_trends(out: &Path, stations: &[Station], t: &TrendOutputs) -> Result<()> {
    let mut csv = format!("group,{}\n", TrendReport::CSV_HEADER);
    let mut md = String::from(
        "| Station | Group | Region | OLS slope | OLS R² | S slope | S R² | Sen slope | Sen R² |\n\
         |---|---|---|---|---|---|---|---|---|\n",
    );
    for (s, r) in stations.iter().zip(&t.annual) {
        let _ = writeln!(csv, "{},{}", s.meta.group, r.csv_row());
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.4}{} | {:.4} | {:.4}{} | {:.4} | {:.4}{} | {:.4} |",
            s.meta.id,
            s.meta.group,
            s.meta.region,
            r.ols.slope,
            r.ols.stars(),
            r.ols.r_squared,
            r.s_estimator.slope,
            r.s_estimator.stars(),
            r.s_estimator.r_squared,
            r.sen.slope,
            r.sen.stars(),
            r.sen.r_squared,
        );
    }
    md.push_str("\n`*` marks p < 0.05.\n");
    let mut sen = String::from("station,group,month,sen_slope,mk_p\n");
    for (s, chunk) in stations.iter().zip(t.monthly_sen.chunks(12)) {
        for m in chunk {
            let _ = writeln!(sen, "{},{},{:02},{:.4},{:.4}", m.station, s.meta.group, m.month, m.slope, m.mk_p);
        }
    }
    write_text(&out.join("trends_annual.csv"), &csv)?;
    write_text(&out.join("trends_annual.md"), &md)?;
    write_text(&out.join("trends_monthly_sen.csv"), &sen)
}

// ---------------------------------------------------------------- cluster

#[derive(Debug, Clone)]
pub struct ClusterOutputs {
    /// Keyed by flow: `01`..`12`, `profile`, `slopes`.
    pub distances: BTreeMap<String, DistanceMatrix>,
    pub k_scores: BTreeMap<String, Vec<KScore>>,
    pub solutions: BTreeMap<String, ClusterSolution>,
}

/// Sequences clustered for each flow.
pub fn cluster_flows(stations: &[Station]) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut flows: Vec<(String, Vec<Vec<f64>>)> = (1..=12u32)
        .map(|m| {
            let seqs = stations
                .iter()
                .map(|s| s.monthly.month_subseries(m).into_iter().flatten().collect())
                .collect();
            (format!("{m:02}"), seqs)
        })
        .collect();
    let profile = stations
        .iter()
        .map(|s| {
            (1..=12u32)
                .map(|m| {
                    let sub: Vec<f64> = s.monthly.month_subseries(m).into_iter().flatten().collect();
                    sub.iter().sum::<f64>() / sub.len() as f64
                })
                .collect()
        })
        .collect();
    flows.push(("profile".into(), profile));
    let slopes = stations
        .iter()
        .map(|s| monthly_slope_profile(&s.monthly))
        .collect::<Result<Vec<_>>>()?;
    flows.push(("slopes".into(), slopes));
    Ok(flows)
}

pub fn cluster(cfg: &PipelineConfig, stations: &[Station]) -> Result<ClusterOutputs> {
    let n = stations.len();
    if cfg.k > n {
        return Err(Error::Config(format!("k = {} exceeds the {n} stations", cfg.k)));
    }
    let hi = cfg.k_range.1.min(n.saturating_sub(1));
    if cfg.k_range.0 > hi {
        return Err(Error::Config(format!(
            "k_range {}-{} leaves nothing to score with {n} stations",
            cfg.k_range.0, cfg.k_range.1
        )));
    }
    let labels: Vec<String> = stations.iter().map(|s| s.meta.id.clone()).collect();
    let mut out = ClusterOutputs {
        distances: BTreeMap::new(),
        k_scores: BTreeMap::new(),
        solutions: BTreeMap::new(),
    };
    for (flow, seqs) in cluster_flows(stations)? {
        let d = distance_matrix(&labels, &seqs, &cfg.dtw)?;
        out.k_scores.insert(flow.clone(), select_k(&d, cfg.k_range.0..=hi)?);
        out.solutions.insert(flow.clone(), hcluster(&d, cfg.k)?);
        out.distances.insert(flow, d);
    }
    Ok(out)
}

fn cluster_table(stations: &[Station], flows: &[(&str, &ClusterSolution)]) -> String {
    let mut s = String::from("month,group,region,cluster,station_ids,mean_silhouette\n");
    for (flow, sol) in flows {
        let mut rows: BTreeMap<(usize, Group, &str), Vec<&str>> = BTreeMap::new();
        for (st, &c) in stations.iter().zip(&sol.assignment) {
            rows.entry((c + 1, st.meta.group, st.meta.region.as_str()))
                .or_default()
                .push(st.meta.id.as_str());
        }
        for ((c, g, region), ids) in rows {
            let _ = writeln!(s, "{flow},{g},{region},{c},{},{:.2}", ids.join(";"), sol.mean_silhouette);
        }
    }
    s
}

pub fn write_cluster(out: &Path, stations: &[Station], c: &ClusterOutputs) -> Result<()> {
    for (flow, d) in &c.distances {
        ensure_dir(&out.join("dtw"))?;
        d.write_csv(out.join("dtw").join(format!("dtw_{flow}.csv")))?;
    }
    let ks: Vec<usize> = c.k_scores.values().next().map(|v| v.iter().map(|s| s.k).collect()).unwrap_or_default();
    let mut table = String::from("flow");
    for k in &ks {
        let _ = write!(table, ",k{k}");
    }
    table.push_str(",best_k\n");
    let order: Vec<String> = month_flows().into_iter().chain(["profile".into(), "slopes".into()]).collect();
    for flow in &order {
        let scores = &c.k_scores[flow];
        table.push_str(flow);
        for s in scores {
            let _ = write!(table, ",{:.2}", s.mean_silhouette);
        }
        let best = scores.iter().find(|s| s.best).map(|s| s.k).unwrap_or(0);
        let _ = writeln!(table, ",{best}");
    }
    write_text(&out.join("silhouette_k.csv"), &table)?;

    let monthly: Vec<(&str, &ClusterSolution)> =
        order[..12].iter().map(|f| (f.as_str(), &c.solutions[f])).collect();
    write_text(&out.join("clusters_monthly.csv"), &cluster_table(stations, &monthly))?;
    write_text(&out.join("clusters_slopes.csv"), &cluster_table(stations, &[("slopes", &c.solutions["slopes"])]))?;
    write_text(&out.join("clusters_profile.csv"), &cluster_table(stations, &[("profile", &c.solutions["profile"])]))?;
    let json: BTreeMap<&str, serde_json::Value> = c.solutions.iter().map(|(f, s)| (f.as_str(), s.to_json())).collect();
    write_json(&out.join("clusters.json"), &json)
}

pub fn load_distances(out: &Path) -> Result<BTreeMap<String, DistanceMatrix>> {
    let mut map = BTreeMap::new();
    for flow in month_flows().into_iter().chain(["profile".into(), "slopes".into()]) {
        let d = DistanceMatrix::read_csv(out.join("dtw").join(format!("dtw_{flow}.csv")))?;
        map.insert(flow, d);
    }
    Ok(map)
}

// ---------------------------------------------------------------- dcor

#[derive(Debug, Clone)]
pub struct DcorOutputs {
    /// Keyed by flow: `01`..`12`, `slopes`, `full`.
    pub matrices: BTreeMap<String, CorrelationMatrix>,
    pub p_values: BTreeMap<String, CorrelationMatrix>,
}

/// Mean dcor over station pairs in the same group and in different groups.
pub fn group_dcor_means(m: &CorrelationMatrix, groups: &[Group]) -> (f64, f64) {
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            if groups[i] == groups[j] {
                within += m.values[i][j];
                nw += 1;
            } else {
                between += m.values[i][j];
                nb += 1;
            }
        }
    }
    (within / nw.max(1) as f64, between / nb.max(1) as f64)
}

pub fn dependence(cfg: &PipelineConfig, stations: &[Station]) -> Result<DcorOutputs> {
    let labels: Vec<String> = stations.iter().map(|s| s.meta.id.clone()).collect();
    let monthly: Vec<RegularSeries> = stations.iter().map(|s| s.monthly.clone()).collect();
    let mut inputs = mode_inputs(&monthly, DcorMode::MonthlyMean)?;
    inputs.extend(mode_inputs(&monthly, DcorMode::MonthlySlope)?);
    let mut out = DcorOutputs {
        matrices: BTreeMap::new(),
        p_values: BTreeMap::new(),
    };
    for (i, (flow, vectors)) in inputs.iter().enumerate() {
        out.matrices.insert(flow.clone(), dcor_matrix(&labels, vectors)?);
        if cfg.permutations > 0 {
            let seed = derive_seed(cfg.seed, STREAM_DCOR, i as u64);
            out.p_values
                .insert(flow.clone(), dcor_pvalue_matrix(&labels, vectors, cfg.permutations, seed)?);
        }
    }
    let full = monthly.iter().map(|s| s.dense()).collect::<Result<Vec<_>>>()?;
    out.matrices.insert("full".into(), dcor_matrix(&labels, &full)?);
    Ok(out)
}

pub fn write_dependence(out: &Path, stations: &[Station], d: &DcorOutputs) -> Result<()> {
    let dir = out.join("dcor");
    ensure_dir(&dir)?;
    let groups: Vec<Group> = stations.iter().map(|s| s.meta.group).collect();
    let mut summary = String::from("flow,within_group,between_group\n");
    for (flow, m) in &d.matrices {
        m.write_csv(dir.join(format!("dcor_{flow}.csv")))?;
        let (w, b) = group_dcor_means(m, &groups);
        let _ = writeln!(summary, "{flow},{w:.4},{b:.4}");
    }
    write_text(&out.join("dcor_summary.csv"), &summary)?;
    if !d.p_values.is_empty() {
        let json: BTreeMap<&str, &Vec<Vec<f64>>> = d.p_values.iter().map(|(f, m)| (f.as_str(), &m.values)).collect();
        write_json(&dir.join("dcor_pvalues.json"), &json)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- anomaly

#[derive(Debug, Clone)]
pub struct AnomalyOutputs {
    pub baseline: (i32, i32),
    pub stations: Vec<RegularSeries>,
    /// Per group: yearly mean anomaly, then its OLS and Sen slopes.
    pub groups: BTreeMap<Group, (Vec<f64>, f64, f64)>,
}

pub fn anomalies(cfg: &PipelineConfig, stations: &[Station]) -> Result<AnomalyOutputs> {
    let baseline = cfg.baseline_years();
    let series = stations
        .iter()
        .map(|s| anomaly(&s.annual, baseline))
        .collect::<Result<Vec<_>>>()?;
    let mut by_group: BTreeMap<Group, Vec<&RegularSeries>> = BTreeMap::new();
    for (s, a) in stations.iter().zip(&series) {
        by_group.entry(s.meta.group).or_default().push(a);
    }
    let mut groups = BTreeMap::new();
    for (g, members) in by_group {
        let n_years = members[0].len();
        let mean: Vec<f64> = (0..n_years)
            .map(|i| members.iter().map(|a| a.values[i].unwrap_or(f64::NAN)).sum::<f64>() / members.len() as f64)
            .collect();
        let (ols, sen) = if n_years >= 3 {
            (ols_trend(&mean)?.slope, sens_slope(&mean)?.slope)
        } else {
            (f64::NAN, f64::NAN)
        };
        groups.insert(g, (mean, ols, sen));
    }
    Ok(AnomalyOutputs {
        baseline,
        stations: series,
        groups,
    })
}

pub fn write_anomalies(out: &Path, stations: &[Station], a: &AnomalyOutputs) -> Result<()> {
    let mut long = String::from("station,group,year,anomaly\n");
    for (s, series) in stations.iter().zip(&a.stations) {
        for (i, v) in series.values.iter().enumerate() {
            let year = series.key(i).year;
            match v {
                Some(v) => {
                    let _ = writeln!(long, "{},{},{year},{v:.4}", s.meta.id, s.meta.group);
                }
                None => {
                    let _ = writeln!(long, "{},{},{year},NA", s.meta.id, s.meta.group);
                }
            }
        }
    }
    let mut trends = String::from("group,baseline,ols_slope,sen_slope\n");
    for (g, (_, ols, sen)) in &a.groups {
        let _ = writeln!(trends, "{g},{}-{},{ols:.4},{sen:.4}", a.baseline.0, a.baseline.1);
    }
    write_text(&out.join("anomalies_annual.csv"), &long)?;
    write_text(&out.join("anomaly_group_trends.csv"), &trends)
}

// ---------------------------------------------------------------- run-all

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub stations: Vec<Station>,
    pub trends: TrendOutputs,
    pub clusters: ClusterOutputs,
    pub dcor: DcorOutputs,
    pub anomalies: AnomalyOutputs,
    pub config_hash: String,
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config_hash: &'a str,
    config: toml::Table,
    stations: Vec<&'a str>,
    artifacts: Vec<Artifact>,
}

fn list_files(root: &Path, dir: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            list_files(root, &path, acc)?;
        } else {
            acc.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

fn write_run_manifest(out: &Path, cfg: &PipelineConfig, hash: &str, stations: &[Station]) -> Result<()> {
    let mut files = Vec::new();
    list_files(out, out, &mut files)?;
    files.sort();
    let artifacts = files
        .iter()
        .map(|rel| {
            let path = out.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            Ok(Artifact {
                path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_hash: hash,
        config: cfg.canonical().parse().expect("canonical config is valid TOML"),
        stations: stations.iter().map(|s| s.meta.id.as_str()).collect(),
        artifacts,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn run_stages(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let metas = load_stations(cfg).map_err(|e| e.in_stage("ingest"))?;
    let ingested = ingest(cfg, &metas).map_err(|e| e.in_stage("ingest"))?;
    write_ingest(out, &ingested).map_err(|e| e.in_stage("ingest"))?;
    let raw: Vec<RegularSeries> = ingested.into_iter().map(|s| s.monthly).collect();
    let stations = impute(&metas, &raw).map_err(|e| e.in_stage("impute"))?;
    write_series(out, &stations).map_err(|e| e.in_stage("impute"))?;
    let trends_out = trends(cfg, &stations).map_err(|e| e.in_stage("trends"))?;
    write_trends(out, &stations, &trends_out).map_err(|e| e.in_stage("trends"))?;
    let clusters = cluster(cfg, &stations).map_err(|e| e.in_stage("cluster"))?;
    write_cluster(out, &stations, &clusters).map_err(|e| e.in_stage("cluster"))?;
    let dcor = dependence(cfg, &stations).map_err(|e| e.in_stage("dcor"))?;
    write_dependence(out, &stations, &dcor).map_err(|e| e.in_stage("dcor"))?;
    let anomalies_out = anomalies(cfg, &stations).map_err(|e| e.in_stage("anomaly"))?;
    write_anomalies(out, &stations, &anomalies_out).map_err(|e| e.in_stage("anomaly"))?;
    let hash = cfg.hash();
    write_run_manifest(out, cfg, &hash, &stations).map_err(|e| e.in_stage("report"))?;
    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        stations,
        trends: trends_out,
        clusters,
        dcor,
        anomalies: anomalies_out,
        config_hash: hash,
    })
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no final component", out.display())))?;
    let mut staged = std::ffi::OsString::from(".");
    staged.push(name);
    staged.push(".partial");
    Ok(out.with_file_name(staged))
}

/// A directory may be replaced only if it is empty or holds an earlier bundle.
fn replaceable(dir: &Path) -> bool {
    dir.join("manifest.json").is_file()
        || std::fs::read_dir(dir).map(|mut d| d.next().is_none()).unwrap_or(false)
}

/// Run every stage into a staging directory next to `cfg.out_dir`, then move
/// it into place. On failure nothing is left behind.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    if out.exists() && !replaceable(out) {
        return Err(Error::Config(format!(
            "{} exists and does not hold a previous run; refusing to replace it",
            out.display()
        )));
    }
    let staging = staging_dir(out)?;
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    std::fs::create_dir_all(&staging)
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", staging.display())))?;
    match run_stages(cfg, &staging) {
        Ok(summary) => {
            if out.exists() {
                std::fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
            }
            std::fs::rename(&staging, out).map_err(|e| Error::io(out, e))?;
            Ok(summary)
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for stream in 0..4 {
            for i in 0..100 {
                assert!(seen.insert(derive_seed(7, stream, i)));
            }
        }
        assert_eq!(derive_seed(7, 1, 3), derive_seed(7, 1, 3));
    }

    #[test]
    fn staging_is_a_sibling() {
        assert_eq!(staging_dir(Path::new("/tmp/x/out")).unwrap(), PathBuf::from("/tmp/x/.out.partial"));
    }
}
