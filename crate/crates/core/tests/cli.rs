use std::path::Path;
use std::process::{Command, Output};

fn stationtrend(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stationtrend"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SPEC: &str = r#"
seed = 9
start_year = 2016
end_year = 2021

[[groups]]
label = "IL"
n_stations = 3
annual_slope = 0.05
seasonal_profile = [2.0, 3.0, 10.0, 13.5, 18.0, 21.5, 24.0, 23.0, 18.5, 14.0, 5.0, 2.0]
noise_sd = 0.3
missing_pct = 1.5

[[groups]]
label = "UKH"
n_stations = 3
annual_slope = -0.005
seasonal_profile = [-2.0, -2.0, 0.5, 3.0, 7.0, 11.5, 14.0, 13.5, 10.0, 6.5, 2.0, -1.0]
noise_sd = 0.4
missing_pct = 20.0
"#;

#[test]
fn generate_then_run_staged_and_whole() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("spec.toml"), SPEC).unwrap();
    std::fs::write(
        dir.join("run.toml"),
        "corpus_dir = \"corpus\"\nstart_year = 2016\nend_year = 2021\nk_range = \"2-4\"\nk = 2\npermutations = 99\n",
    )
    .unwrap();

    let o = stationtrend(dir, &["gen-corpus", "--spec", "spec.toml", "--out", "corpus"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("wrote 6 stations"));

    let o = stationtrend(dir, &["run-all", "--config", "run.toml", "--out", "bundle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("bundle/manifest.json").is_file());

    for stage in ["ingest", "impute", "trends", "cluster", "dcor", "anomaly"] {
        let o = stationtrend(dir, &[stage, "--config", "run.toml", "--out", "staged"]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.join("bundle/trends_annual.csv")).unwrap();
    let b = std::fs::read(dir.join("staged/trends_annual.csv")).unwrap();
    assert_eq!(a, b);

    // flags override the file
    let o = stationtrend(dir, &["run-all", "--config", "run.toml", "--out", "other", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let manifest = std::fs::read_to_string(dir.join("other/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"), "{manifest}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let o = stationtrend(dir, &["run-all", "--no-such-flag"]);
    assert_eq!(code(&o), 2);

    let o = stationtrend(dir, &["run-all", "--lambda", "-1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let o = stationtrend(dir, &["run-all", "--k-range", "5-2"]);
    assert_eq!(code(&o), 2);

    let o = stationtrend(dir, &["run-all", "--corpus", "missing"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ingest stage failed"));

    // a stage whose inputs were never produced
    std::fs::create_dir(dir.join("corpus")).unwrap();
    std::fs::write(dir.join("corpus/stations.csv"), "id,name,group,region,lat,lon,alt_m,cadence_min\nX1,x,IL,Piemonte,45.0,7.0,250,60\n").unwrap();
    let o = stationtrend(dir, &["trends"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("trends stage failed"));
}
