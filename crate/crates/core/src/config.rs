//! Pipeline configuration: defaults, the key-value config-file format, and
//! flag overrides. The run manifest echoes a config back out in the same
//! format, so a manifest can be replayed as a config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::FilterConfig;
use crate::netmetrics::IndicatorCodes;
use crate::pca::Period;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub filter: FilterConfig,
    /// Monte Carlo permutations per link significance test.
    pub mc_samples: usize,
    pub alpha: f64,
    /// Ascending prune thresholds; a single entry means no sweep. The first
    /// entry is the primary threshold used for correlations and PCA.
    pub prune_thresholds: Vec<f64>,
    pub presence_fraction: f64,
    pub periods: Vec<Period>,
    pub rng_seed: u64,
    pub redundant_codes: BTreeSet<String>,
    pub indicator_codes: IndicatorCodes,
    /// Thresholds reported by the quality-ratio sweep.
    pub qr_sweep_thresholds: Vec<f64>,
    pub dump_features: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            out_dir: PathBuf::new(),
            filter: FilterConfig::default(),
            mc_samples: 1000,
            alpha: 0.05,
            prune_thresholds: vec![0.4],
            presence_fraction: 0.8,
            periods: crate::pca::default_periods(),
            rng_seed: 42,
            redundant_codes: BTreeSet::new(),
            indicator_codes: IndicatorCodes::default(),
            qr_sweep_thresholds: vec![0.3, 0.5, 0.8],
            dump_features: false,
        }
    }
}

/// Optional command-line overrides; set fields win over the config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub qr_threshold: Option<f64>,
    pub min_statements: Option<usize>,
    pub max_gap_days: Option<i64>,
    pub mc_samples: Option<usize>,
    pub alpha: Option<f64>,
    pub prune_thresholds: Option<Vec<f64>>,
    pub presence_fraction: Option<f64>,
    pub periods: Option<Vec<Period>>,
    pub rng_seed: Option<u64>,
}

impl PipelineConfig {
    /// Layer defaults, an optional config file, and flag overrides, then
    /// validate.
    pub fn resolve(config_file: Option<&Path>, overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_file_text(&text)?;
        }
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, ov: &ConfigOverrides) {
        if let Some(v) = &ov.input {
            self.input = v.clone();
        }
        if let Some(v) = &ov.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = ov.qr_threshold {
            self.filter.qr_threshold = v;
        }
        if let Some(v) = ov.min_statements {
            self.filter.min_statements = v;
        }
        if let Some(v) = ov.max_gap_days {
            self.filter.max_gap_days = v;
        }
        if let Some(v) = ov.mc_samples {
            self.mc_samples = v;
        }
        if let Some(v) = ov.alpha {
            self.alpha = v;
        }
        if let Some(v) = &ov.prune_thresholds {
            self.prune_thresholds = v.clone();
        }
        if let Some(v) = ov.presence_fraction {
            self.presence_fraction = v;
        }
        if let Some(v) = &ov.periods {
            self.periods = v.clone();
        }
        if let Some(v) = ov.rng_seed {
            self.rng_seed = v;
        }
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines are
    /// ignored, unknown keys are an error.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {lineno}: expected 'key = value'"))
            })?;
            let key = key.trim();
            let value = value.trim();
            self.apply_key(key, value).map_err(|e| {
                Error::Config(format!("config line {lineno} ({key}): {e}"))
            })?;
        }
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| format!("{e}"))
        }
        match key {
            "input" => self.input = PathBuf::from(value),
            "out" => self.out_dir = PathBuf::from(value),
            "qr_threshold" => self.filter.qr_threshold = num(value)?,
            "min_statements" => self.filter.min_statements = num(value)?,
            "max_sample_years" => self.filter.max_sample_years = num(value)?,
            "max_gap_days" => self.filter.max_gap_days = num(value)?,
            "fiscal_window_months" => self.filter.fiscal_window_months = num(value)?,
            "sample_start_year" => self.filter.sample_start_year = num(value)?,
            "sample_end_year" => self.filter.sample_end_year = num(value)?,
            "mc_samples" => self.mc_samples = num(value)?,
            "alpha" => self.alpha = num(value)?,
            "prune" => self.prune_thresholds = parse_float_list(value)?,
            "presence_fraction" => self.presence_fraction = num(value)?,
            "periods" => self.periods = parse_periods(value)?,
            "seed" => self.rng_seed = num(value)?,
            "redundant_codes" => {
                self.redundant_codes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
            }
            "net_income_code" => self.indicator_codes.net_income = value.to_string(),
            "total_debts_code" => self.indicator_codes.total_debts = value.to_string(),
            "total_assets_code" => self.indicator_codes.total_assets = value.to_string(),
            "qr_sweep" => self.qr_sweep_thresholds = parse_float_list(value)?,
            "dump_features" => {
                self.dump_features = match value {
                    "true" => true,
                    "false" => false,
                    other => return Err(format!("expected true/false, got '{other}'")),
                }
            }
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("input path is required".to_string()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("output directory is required".to_string()));
        }
        self.filter.validate()?;
        if self.mc_samples < 100 {
            return Err(Error::Config(format!(
                "mc_samples must be at least 100, got {}",
                self.mc_samples
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        validate_threshold_list("prune", &self.prune_thresholds)?;
        validate_threshold_list("qr_sweep", &self.qr_sweep_thresholds)?;
        if !(self.presence_fraction > 0.0 && self.presence_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "presence_fraction must be in (0, 1], got {}",
                self.presence_fraction
            )));
        }
        self.validate_periods_partition()?;
        Ok(())
    }

    /// Periods must tile the sample years exactly.
    fn validate_periods_partition(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::Config("at least one period is required".to_string()));
        }
        let mut expected = self.filter.sample_start_year;
        for p in &self.periods {
            if p.start_year != expected {
                return Err(Error::Config(format!(
                    "periods must partition the sample years {}..{}; period {} starts at {} \
                     where {expected} was expected",
                    self.filter.sample_start_year,
                    self.filter.sample_end_year,
                    p.label,
                    p.start_year
                )));
            }
            if p.end_year < p.start_year {
                return Err(Error::Config(format!("period {} is empty", p.label)));
            }
            expected = p.end_year + 1;
        }
        if expected != self.filter.sample_end_year + 1 {
            return Err(Error::Config(format!(
                "periods must end at sample_end_year {}, but end at {}",
                self.filter.sample_end_year,
                expected - 1
            )));
        }
        Ok(())
    }

    /// Serialize as config-file lines; `parse(to_key_values(c)) == c`.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let f = &self.filter;
        let floats = |v: &[f64]| {
            v.iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        vec![
            ("input".into(), self.input.display().to_string()),
            ("out".into(), self.out_dir.display().to_string()),
            ("qr_threshold".into(), f.qr_threshold.to_string()),
            ("min_statements".into(), f.min_statements.to_string()),
            ("max_sample_years".into(), f.max_sample_years.to_string()),
            ("max_gap_days".into(), f.max_gap_days.to_string()),
            (
                "fiscal_window_months".into(),
                f.fiscal_window_months.to_string(),
            ),
            ("sample_start_year".into(), f.sample_start_year.to_string()),
            ("sample_end_year".into(), f.sample_end_year.to_string()),
            ("mc_samples".into(), self.mc_samples.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("prune".into(), floats(&self.prune_thresholds)),
            (
                "presence_fraction".into(),
                self.presence_fraction.to_string(),
            ),
            (
                "periods".into(),
                self.periods
                    .iter()
                    .map(|p| p.label.clone())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("seed".into(), self.rng_seed.to_string()),
            (
                "redundant_codes".into(),
                self.redundant_codes
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "net_income_code".into(),
                self.indicator_codes.net_income.clone(),
            ),
            (
                "total_debts_code".into(),
                self.indicator_codes.total_debts.clone(),
            ),
            (
                "total_assets_code".into(),
                self.indicator_codes.total_assets.clone(),
            ),
            ("qr_sweep".into(), floats(&self.qr_sweep_thresholds)),
            ("dump_features".into(), self.dump_features.to_string()),
        ]
    }

    /// The prune threshold used for correlations and PCA.
    pub fn primary_threshold(&self) -> f64 {
        self.prune_thresholds[0]
    }
}

fn validate_threshold_list(name: &str, thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config(format!("{name} list must not be empty")));
    }
    if let Some(&bad) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Config(format!(
            "{name} thresholds must lie in [0, 1], got {bad}"
        )));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(format!(
            "{name} thresholds must be sorted ascending"
        )));
    }
    Ok(())
}

/// Parse a comma-separated list of floats, e.g. `0.35,0.4,0.45`.
pub fn parse_float_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}

/// Parse a comma-separated list of `START-END` year ranges, e.g.
/// `2001-2006,2007-2009,2010-2013`.
pub fn parse_periods(value: &str) -> std::result::Result<Vec<Period>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (a, b) = s
                .split_once('-')
                .ok_or_else(|| format!("'{s}': expected START-END"))?;
            let start = a.trim().parse::<i32>().map_err(|e| format!("'{s}': {e}"))?;
            let end = b.trim().parse::<i32>().map_err(|e| format!("'{s}': {e}"))?;
            Ok(Period::new(start, end))
        })
        .collect()
}
