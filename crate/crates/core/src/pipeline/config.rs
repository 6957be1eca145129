use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dtw::{DtwConfig, LocalDistance, StepWeights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    /// Defaults to `<corpus_dir>/stations.csv`.
    pub manifest: Option<PathBuf>,
    pub start_year: i32,
    pub end_year: i32,
    pub dtw: DtwConfig,
    pub k: usize,
    pub k_range: (usize, usize),
    /// Permutations per dcor p-value; 0 skips the p-value matrices.
    pub permutations: usize,
    pub seed: u64,
    /// Anomaly baseline years; defaults to the analysis window.
    pub baseline: Option<(i32, i32)>,
    /// Offset applied to naive timestamps in station files.
    pub timezone: String,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("corpus"),
            manifest: None,
            start_year: 2002,
            end_year: 2021,
            dtw: DtwConfig::default(),
            k: 4,
            k_range: (2, 6),
            permutations: 199,
            seed: 42,
            baseline: None,
            timezone: "UTC".into(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Individual overrides, usually from command-line flags. Set fields win over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub corpus_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub start_year: Option<i32>,
    pub end_year: Option<i32>,
    pub local_dist: Option<String>,
    pub weights: Option<String>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub k_range: Option<String>,
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
    pub baseline: Option<String>,
    pub timezone: Option<String>,
    pub out_dir: Option<PathBuf>,
}

/// `a-b`, `a..b` or `a..=b`, inclusive.
pub fn parse_range<T: std::str::FromStr>(s: &str) -> Result<(T, T)> {
    let s = s.trim();
    let bad = || Error::Config(format!("expected a range like 2-6, got {s:?}"));
    let (a, b) = if let Some((a, b)) = s.split_once("..=") {
        (a, b)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b)
    } else {
        // skip a leading sign so negative years still split on the separator
        let cut = s.char_indices().skip(1).find(|(_, c)| *c == '-').map(|(i, _)| i).ok_or_else(bad)?;
        (&s[..cut], &s[cut + 1..])
    };
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn value_as_string(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| value_as_string(key, i))
            .collect::<Result<Vec<_>>>()
            .map(|parts| parts.join(",")),
        other => Err(Error::Config(format!("{key}: unsupported value {other}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
}

impl PipelineConfig {
    /// Read a flat `key = value` file. Relative paths resolve against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with_base(&text, base)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config syntax: {e}")))?;
        let mut ov = ConfigOverrides::default();
        let rel = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() { base.join(p) } else { p }
        };
        for (key, value) in &table {
            let raw = value_as_string(key, value)?;
            match key.as_str() {
                "corpus_dir" => ov.corpus_dir = Some(rel(raw)),
                "manifest" => ov.manifest = Some(rel(raw)),
                "start_year" => ov.start_year = Some(parse_num(key, &raw)?),
                "end_year" => ov.end_year = Some(parse_num(key, &raw)?),
                "local_dist" => ov.local_dist = Some(raw),
                "weights" => ov.weights = Some(raw),
                "lambda" => ov.lambda = Some(parse_num(key, &raw)?),
                "k" => ov.k = Some(parse_num(key, &raw)?),
                "k_range" => ov.k_range = Some(raw),
                "permutations" => ov.permutations = Some(parse_num(key, &raw)?),
                "seed" => ov.seed = Some(parse_num(key, &raw)?),
                "baseline" => ov.baseline = Some(raw),
                "timezone" => ov.timezone = Some(raw),
                "out_dir" => ov.out_dir = Some(rel(raw)),
                other => return Err(Error::Config(format!("unknown config key {other:?}"))),
            }
        }
        let mut cfg = Self::default();
        cfg.apply(&ov)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &ConfigOverrides) -> Result<()> {
        if let Some(v) = &ov.corpus_dir {
            self.corpus_dir = v.clone();
        }
        if let Some(v) = &ov.manifest {
            self.manifest = Some(v.clone());
        }
        if let Some(v) = ov.start_year {
            self.start_year = v;
        }
        if let Some(v) = ov.end_year {
            self.end_year = v;
        }
        if let Some(v) = &ov.local_dist {
            self.dtw.local_distance = v.parse::<LocalDistance>()?;
        }
        if let Some(v) = &ov.weights {
            self.dtw.weights = v.parse::<StepWeights>()?;
        }
        if let Some(v) = ov.lambda {
            self.dtw.lambda = v;
        }
        if let Some(v) = ov.k {
            self.k = v;
        }
        if let Some(v) = &ov.k_range {
            self.k_range = parse_range(v)?;
        }
        if let Some(v) = ov.permutations {
            self.permutations = v;
        }
        if let Some(v) = ov.seed {
            self.seed = v;
        }
        if let Some(v) = &ov.baseline {
            self.baseline = Some(parse_range(v)?);
        }
        if let Some(v) = &ov.timezone {
            self.timezone = v.clone();
        }
        if let Some(v) = &ov.out_dir {
            self.out_dir = v.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_year > self.end_year {
            return Err(Error::Config(format!(
                "start_year {} after end_year {}",
                self.start_year, self.end_year
            )));
        }
        self.dtw.validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.k_range.0 < 2 || self.k_range.1 < self.k_range.0 {
            return Err(Error::Config(format!(
                "k_range {}-{} must satisfy 2 <= min <= max",
                self.k_range.0, self.k_range.1
            )));
        }
        if self.permutations != 0 && self.permutations < crate::dependence::MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "permutations must be 0 or at least {}",
                crate::dependence::MIN_PERMUTATIONS
            )));
        }
        if let Some((a, b)) = self.baseline {
            if a > b {
                return Err(Error::Config(format!("baseline {a}-{b} is reversed")));
            }
        }
        self.timezone
            .parse::<crate::ingest::SourceTimezone>()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.corpus_dir.join("stations.csv"))
    }

    pub fn k_range(&self) -> RangeInclusive<usize> {
        self.k_range.0..=self.k_range.1
    }

    pub fn baseline_years(&self) -> (i32, i32) {
        self.baseline.unwrap_or((self.start_year, self.end_year))
    }

    /// Canonical rendering of everything that affects results (the output
    /// location is excluded).
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let (b0, b1) = self.baseline_years();
        let _ = writeln!(s, "corpus_dir = {:?}", self.corpus_dir.display().to_string());
        let _ = writeln!(s, "manifest = {:?}", self.manifest_path().display().to_string());
        let _ = writeln!(s, "start_year = {}", self.start_year);
        let _ = writeln!(s, "end_year = {}", self.end_year);
        let _ = writeln!(s, "local_dist = \"{}\"", self.dtw.local_distance);
        let _ = writeln!(s, "weights = \"{}\"", self.dtw.weights);
        let _ = writeln!(s, "lambda = {:?}", self.dtw.lambda);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "k_range = \"{}-{}\"", self.k_range.0, self.k_range.1);
        let _ = writeln!(s, "permutations = {}", self.permutations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "baseline = \"{b0}-{b1}\"");
        let _ = writeln!(s, "timezone = {:?}", self.timezone);
        s
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let text = r#"
corpus_dir = "data"
start_year = 2005
end_year = 2010
local_dist = "euclidean"
weights = [1, 1, 1]
lambda = 0.5
k = 3
k_range = "2-5"
permutations = 0
seed = 9
baseline = "2005-2007"
"#;
        let cfg = PipelineConfig::from_str_with_base(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.corpus_dir, PathBuf::from("/cfg/data"));
        assert_eq!(cfg.manifest_path(), PathBuf::from("/cfg/data/stations.csv"));
        assert_eq!((cfg.start_year, cfg.end_year), (2005, 2010));
        assert_eq!(cfg.dtw.local_distance, LocalDistance::Euclidean);
        assert_eq!(cfg.dtw.weights, StepWeights::UNIT);
        assert_eq!(cfg.dtw.lambda, 0.5);
        assert_eq!(cfg.k_range(), 2..=5);
        assert_eq!(cfg.baseline, Some((2005, 2007)));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = PipelineConfig::from_str_with_base("seed = 1\nk = 3", Path::new(".")).unwrap();
        cfg.apply(&ConfigOverrides {
            seed: Some(77),
            k_range: Some("3..=4".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.seed, 77);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.k_range, (3, 4));
    }

    #[test]
    fn rejects_bad_values() {
        let base = Path::new(".");
        for text in [
            "start_year = 2010\nend_year = 2000",
            "bogus = 1",
            "k_range = \"1-4\"",
            "permutations = 10",
            "weights = \"1,1\"",
            "lambda = -1.0",
            "timezone = \"Mars/Olympus\"",
            "k = ",
        ] {
            let err = PipelineConfig::from_str_with_base(text, base).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = PipelineConfig::default();
        let h = a.hash();
        a.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), h);
        a.seed += 1;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range::<i32>("1991-2020").unwrap(), (1991, 2020));
        assert_eq!(parse_range::<usize>("2..6").unwrap(), (2, 6));
        assert!(parse_range::<usize>("6").is_err());
    }
}
