use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stationtrend::pipeline::{self, ConfigOverrides, PipelineConfig, SyntheticSpec};
use stationtrend::{Error, Result};

/// Station temperature trends, DTW clustering and distance-correlation analysis.
#[derive(Parser, Debug)]
#[command(name = "stationtrend", version)]
struct Cli {
    /// Flat key = value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (the corpus directory for gen-corpus).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Overrides {
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    start_year: Option<i32>,
    #[arg(long, global = true)]
    end_year: Option<i32>,
    /// manhattan or euclidean
    #[arg(long, global = true)]
    local_dist: Option<String>,
    /// Step weights "horizontal,vertical,diagonal"
    #[arg(long, global = true)]
    weights: Option<String>,
    /// Off-diagonal penalty
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// e.g. 2-6
    #[arg(long, global = true)]
    k_range: Option<String>,
    /// dcor permutations (0 disables p-values)
    #[arg(long, global = true)]
    permutations: Option<usize>,
    /// Anomaly baseline years, e.g. 1991-2020
    #[arg(long, global = true)]
    baseline: Option<String>,
    /// Offset for naive timestamps: UTC or ±HH:MM
    #[arg(long, global = true)]
    timezone: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic hourly corpus and its stations.csv
    GenCorpus {
        /// TOML corpus spec; the built-in four-group corpus when absent
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Parse station files into monthly aggregates and a missingness table
    Ingest,
    /// Fill gaps in the ingested monthly series and derive annual means
    Impute,
    /// Annual trend table and monthly Sen slopes
    Trends,
    /// DTW distance matrices, k sensitivity and cluster tables
    Cluster,
    /// Distance-correlation matrices
    Dcor,
    /// Annual anomalies against the baseline
    Anomaly,
    /// Every stage into a fresh output bundle
    RunAll,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    let o = &cli.overrides;
    cfg.apply(&ConfigOverrides {
        corpus_dir: o.corpus.clone(),
        manifest: o.manifest.clone(),
        start_year: o.start_year,
        end_year: o.end_year,
        local_dist: o.local_dist.clone(),
        weights: o.weights.clone(),
        lambda: o.lambda,
        k: o.k,
        k_range: o.k_range.clone(),
        permutations: o.permutations,
        seed: cli.seed,
        baseline: o.baseline.clone(),
        timezone: o.timezone.clone(),
        out_dir: cli.out.clone(),
    })?;
    Ok(cfg)
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::GenCorpus { spec } = &cli.command {
        let mut s = match spec {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                SyntheticSpec::from_toml(&text)?
            }
            None => SyntheticSpec::four_groups(42),
        };
        if let Some(seed) = cli.seed {
            s.seed = seed;
        }
        let dir = cli
            .out
            .clone()
            .or_else(|| cli.overrides.corpus.clone())
            .unwrap_or_else(|| PathBuf::from("corpus"));
        let metas = pipeline::gen_corpus(&s, &dir)?;
        println!("wrote {} stations to {}", metas.len(), dir.display());
        return Ok(());
    }

    let cfg = config(cli)?;
    let out = cfg.out_dir.as_path();
    let metas = staged("ingest", pipeline::load_stations(&cfg))?;
    match cli.command {
        Command::GenCorpus { .. } => unreachable!(),
        Command::RunAll => {
            let summary = pipeline::run_pipeline(&cfg)?;
            println!(
                "{} stations, config {}; bundle in {}",
                summary.stations.len(),
                &summary.config_hash[..12],
                summary.out_dir.display()
            );
        }
        Command::Ingest => {
            let ingested = staged("ingest", pipeline::ingest(&cfg, &metas))?;
            staged("ingest", pipeline::write_ingest(out, &ingested))?;
            for s in &ingested {
                println!("{}\t{:.2}% missing", s.meta.id, s.missingness.pct_missing);
            }
        }
        Command::Impute => {
            let raw = staged("impute", pipeline::load_ingest(out, &metas))?;
            let stations = staged("impute", pipeline::impute(&metas, &raw))?;
            staged("impute", pipeline::write_series(out, &stations))?;
            println!("imputed {} stations", stations.len());
        }
        Command::Trends => {
            let stations = staged("trends", pipeline::load_series(out, &metas))?;
            let t = staged("trends", pipeline::trends(&cfg, &stations))?;
            staged("trends", pipeline::write_trends(out, &stations, &t))?;
            println!("{}", stationtrend::trend::TrendReport::CSV_HEADER);
            for r in &t.annual {
                println!("{}", r.csv_row());
            }
        }
        Command::Cluster => {
            let stations = staged("cluster", pipeline::load_series(out, &metas))?;
            let c = staged("cluster", pipeline::cluster(&cfg, &stations))?;
            staged("cluster", pipeline::write_cluster(out, &stations, &c))?;
            for (flow, scores) in &c.k_scores {
                let best = scores.iter().find(|s| s.best).expect("one best k");
                println!("{flow}\tbest k {} (silhouette {:.2})", best.k, best.mean_silhouette);
            }
        }
        Command::Dcor => {
            let stations = staged("dcor", pipeline::load_series(out, &metas))?;
            let d = staged("dcor", pipeline::dependence(&cfg, &stations))?;
            staged("dcor", pipeline::write_dependence(out, &stations, &d))?;
            println!("wrote {} dcor matrices", d.matrices.len());
        }
        Command::Anomaly => {
            let stations = staged("anomaly", pipeline::load_series(out, &metas))?;
            let a = staged("anomaly", pipeline::anomalies(&cfg, &stations))?;
            staged("anomaly", pipeline::write_anomalies(out, &stations, &a))?;
            for (g, (_, ols, sen)) in &a.groups {
                println!("{g}\tOLS {ols:.4}\tSen {sen:.4} °C/yr");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
