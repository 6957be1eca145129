mod common;

use std::path::Path;

use stationtrend::ingest::Group;
use stationtrend::pipeline::{self, PipelineConfig, SyntheticSpec};
use stationtrend::trend::sens_slope;
use stationtrend::Error;

use common::read_tree;

/// Four groups of `per_group` stations over `years` years ending 2021.
fn small_spec(seed: u64, per_group: usize, years: i32) -> SyntheticSpec {
    let mut spec = SyntheticSpec::four_groups(seed);
    spec.start_year = 2022 - years;
    for g in &mut spec.groups {
        g.n_stations = per_group;
    }
    spec
}

fn config(corpus: &Path, out: &Path, start: i32, end: i32) -> PipelineConfig {
    PipelineConfig {
        corpus_dir: corpus.to_path_buf(),
        out_dir: out.to_path_buf(),
        start_year: start,
        end_year: end,
        k_range: (2, 6),
        permutations: 99,
        ..PipelineConfig::default()
    }
}

fn stations_in_memory(cfg: &PipelineConfig) -> Vec<pipeline::Station> {
    let metas = pipeline::load_stations(cfg).unwrap();
    let raw: Vec<_> = pipeline::ingest(cfg, &metas).unwrap().into_iter().map(|s| s.monthly).collect();
    pipeline::impute(&metas, &raw).unwrap()
}

#[test]
fn run_all_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    pipeline::gen_corpus(&small_spec(11, 3, 10), &corpus).unwrap();
    let a = config(&corpus, &tmp.path().join("a"), 2012, 2021);
    let b = config(&corpus, &tmp.path().join("b"), 2012, 2021);
    let summary = pipeline::run_pipeline(&a).unwrap();
    pipeline::run_pipeline(&b).unwrap();
    let ta = read_tree(&a.out_dir);
    assert_eq!(ta, read_tree(&b.out_dir));

    let names: Vec<&str> = ta.iter().map(|(p, _)| p.as_str()).collect();
    for family in [
        "trends_annual.csv",
        "trends_monthly_sen.csv",
        "silhouette_k.csv",
        "clusters_monthly.csv",
        "clusters_slopes.csv",
        "dcor/dcor_slopes.csv",
        "manifest.json",
    ] {
        assert!(names.contains(&family), "{family} missing from {names:?}");
    }
    for m in 1..=12 {
        assert!(names.contains(&format!("dcor/dcor_{m:02}.csv").as_str()));
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_hash"], summary.config_hash.as_str());
    assert!(!tmp.path().join(".a.partial").exists());

    // rerunning over an existing bundle replaces it
    pipeline::run_pipeline(&a).unwrap();
    assert_eq!(read_tree(&a.out_dir), ta);
}

#[test]
fn staged_run_matches_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    pipeline::gen_corpus(&small_spec(5, 3, 8), &corpus).unwrap();
    let whole = config(&corpus, &tmp.path().join("whole"), 2014, 2021);
    pipeline::run_pipeline(&whole).unwrap();

    // every later stage reads only what the earlier one wrote
    let cfg = config(&corpus, &tmp.path().join("staged"), 2014, 2021);
    let out = cfg.out_dir.as_path();
    let metas = pipeline::load_stations(&cfg).unwrap();
    pipeline::write_ingest(out, &pipeline::ingest(&cfg, &metas).unwrap()).unwrap();
    let raw = pipeline::load_ingest(out, &metas).unwrap();
    pipeline::write_series(out, &pipeline::impute(&metas, &raw).unwrap()).unwrap();
    let s = pipeline::load_series(out, &metas).unwrap();
    pipeline::write_trends(out, &s, &pipeline::trends(&cfg, &s).unwrap()).unwrap();
    let s = pipeline::load_series(out, &metas).unwrap();
    pipeline::write_cluster(out, &s, &pipeline::cluster(&cfg, &s).unwrap()).unwrap();
    let s = pipeline::load_series(out, &metas).unwrap();
    pipeline::write_dependence(out, &s, &pipeline::dependence(&cfg, &s).unwrap()).unwrap();
    let s = pipeline::load_series(out, &metas).unwrap();
    pipeline::write_anomalies(out, &s, &pipeline::anomalies(&cfg, &s).unwrap()).unwrap();

    let strip = |t: Vec<(String, Vec<u8>)>| t.into_iter().filter(|(p, _)| p != "manifest.json").collect::<Vec<_>>();
    assert_eq!(strip(read_tree(out)), strip(read_tree(&whole.out_dir)));

    // reloaded distance matrices equal the in-memory ones
    let reloaded = pipeline::load_distances(out).unwrap();
    let fresh = pipeline::cluster(&cfg, &s).unwrap();
    assert_eq!(reloaded, fresh.distances);
}

#[test]
fn all_missing_month_aborts_at_imputation() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    pipeline::gen_corpus(&small_spec(3, 2, 3), &corpus).unwrap();
    // blank every March reading of one station
    let path = corpus.join("IL02.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let edited: String = text
        .lines()
        .map(|l| {
            if l.get(4..8) == Some("-03-") {
                format!("{},\n", &l[..16])
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    std::fs::write(&path, edited).unwrap();

    let cfg = config(&corpus, &tmp.path().join("out"), 2019, 2021);
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Stage { stage: "impute", .. }), "{msg}");
    assert!(msg.contains("IL02") && msg.contains("month 3"), "{msg}");
    assert_eq!(err.exit_code(), 3);
    assert!(!cfg.out_dir.exists());
    assert!(!tmp.path().join(".out.partial").exists());
}

#[test]
fn refuses_to_replace_unrelated_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("precious");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("notes.txt"), "keep me").unwrap();
    let cfg = config(&tmp.path().join("corpus"), &out, 2020, 2021);
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert_eq!(std::fs::read_to_string(out.join("notes.txt")).unwrap(), "keep me");
}

#[test]
fn narrower_window_weakens_trend_evidence() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    pipeline::gen_corpus(&small_spec(21, 3, 20), &corpus).unwrap();
    let mean_p = |start: i32, out: &str| {
        let cfg = config(&corpus, &tmp.path().join(out), start, 2021);
        let summary = pipeline::run_pipeline(&cfg).unwrap();
        // only the warming groups carry a trend to lose evidence for
        let p: Vec<f64> = summary
            .trends
            .annual
            .iter()
            .filter(|r| r.station.starts_with('I'))
            .map(|r| r.ols.p_value)
            .collect();
        p.iter().sum::<f64>() / p.len() as f64
    };
    let full = mean_p(2002, "full");
    let short = mean_p(2017, "short");
    assert!(short > full, "5-year mean p {short} vs 20-year {full}");
}

#[test]
fn noiseless_corpus_recovers_planted_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::four_groups(1);
    spec.groups.truncate(1);
    let g = &mut spec.groups[0];
    g.n_stations = 2;
    g.annual_slope = 0.05;
    g.noise_sd = 0.0;
    g.shared_sd = 0.0;
    g.missing_pct = 0.0;
    spec.hourly_sd = 0.0;
    pipeline::gen_corpus(&spec, tmp.path()).unwrap();
    let cfg = config(tmp.path(), &tmp.path().join("out"), 2002, 2021);
    let stations = stations_in_memory(&cfg);
    let t = pipeline::trends(&cfg, &stations).unwrap();
    for r in &t.annual {
        assert!((r.ols.slope - 0.05).abs() < 1e-6, "{}: {}", r.station, r.ols.slope);
    }
}

#[test]
fn planted_gap_rate_is_measured_back() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::four_groups(8);
    spec.groups.truncate(1);
    spec.groups[0].n_stations = 1;
    spec.groups[0].missing_pct = 23.3;
    spec.start_year = 2016;
    pipeline::gen_corpus(&spec, tmp.path()).unwrap();
    let cfg = config(tmp.path(), &tmp.path().join("out"), 2016, 2021);
    let metas = pipeline::load_stations(&cfg).unwrap();
    let ingested = pipeline::ingest(&cfg, &metas).unwrap();
    let pct = ingested[0].missingness.pct_missing;
    assert!((pct - 23.3).abs() <= 0.5, "{pct}");
}

#[test]
fn synthetic_stations_show_expected_trend_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::four_groups(2);
    spec.groups.retain(|g| matches!(g.label, Group::IL | Group::UKL));
    for g in &mut spec.groups {
        g.n_stations = 1;
        g.shared_sd = 0.0;
        if g.label == Group::UKL {
            g.noise_sd = 0.8;
        }
    }
    pipeline::gen_corpus(&spec, tmp.path()).unwrap();
    let cfg = config(tmp.path(), &tmp.path().join("out"), 2002, 2021);
    let stations = stations_in_memory(&cfg);
    let t = pipeline::trends(&cfg, &stations).unwrap();
    for r in &t.annual {
        let fits = [&r.ols, &r.s_estimator, &r.sen];
        if r.station.starts_with("IL") {
            for f in fits {
                assert!((0.03..=0.07).contains(&f.slope) && f.significant_5pct, "{f:?}");
            }
        } else {
            for f in fits {
                assert!(f.slope.abs() < 0.03 && !f.significant_5pct, "{f:?}");
            }
        }
    }
}

#[test]
fn italian_group_mean_anomaly_trend() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::four_groups(4);
    spec.groups.retain(|g| matches!(g.label, Group::IH | Group::IL));
    for g in &mut spec.groups {
        g.annual_slope = 0.0445;
    }
    pipeline::gen_corpus(&spec, tmp.path()).unwrap();
    let cfg = config(tmp.path(), &tmp.path().join("out"), 2002, 2021);
    let stations = stations_in_memory(&cfg);
    let a = pipeline::anomalies(&cfg, &stations).unwrap();
    // pool both Italian groups, as an areal average would
    let n_years = 20;
    let pooled: Vec<f64> = (0..n_years)
        .map(|i| a.stations.iter().map(|s| s.values[i].unwrap()).sum::<f64>() / a.stations.len() as f64)
        .collect();
    let slope = sens_slope(&pooled).unwrap().slope;
    assert!((slope - 0.0445).abs() < 0.01, "{slope}");
    let baseline_mean = pooled.iter().sum::<f64>() / n_years as f64;
    assert!(baseline_mean.abs() < 1e-9);
}

#[test]
fn group_mean_sen_slopes_track_planted_slopes() {
    // per-station slopes are independent once the group-shared signal is off, so
    // the group mean should sit within one standard error of the planted slope
    // about two times in three and essentially never beyond four
    let mut within_one = 0;
    let mut cases = 0;
    for seed in 0..4u64 {
        let tmp = tempfile::tempdir().unwrap();
        let mut spec = SyntheticSpec::four_groups(100 + seed);
        for g in &mut spec.groups {
            g.shared_sd = 0.0;
        }
        pipeline::gen_corpus(&spec, tmp.path()).unwrap();
        let cfg = config(tmp.path(), &tmp.path().join("out"), 2002, 2021);
        let stations = stations_in_memory(&cfg);
        let t = pipeline::trends(&cfg, &stations).unwrap();
        for g in &spec.groups {
            let slopes: Vec<f64> = stations
                .iter()
                .zip(&t.annual)
                .filter(|(s, _)| s.meta.group == g.label)
                .map(|(_, r)| r.sen.slope)
                .collect();
            let n = slopes.len() as f64;
            let mean = slopes.iter().sum::<f64>() / n;
            let sd = (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let se = sd / n.sqrt();
            let dev = (mean - g.annual_slope).abs();
            eprintln!("seed {seed} {}: mean {mean:.5} planted {} se {se:.5}", g.label, g.annual_slope);
            assert!(dev < 4.0 * se);
            within_one += (dev <= se) as usize;
            cases += 1;
        }
    }
    assert!(within_one * 2 >= cases, "{within_one} of {cases} within one standard error");
}
