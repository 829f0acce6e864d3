//! Deterministic synthetic statement panels with planted group structure,
//! for exercising the pipeline without proprietary data.

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ingest::StatementRecord;

/// Variable code used for the size proxy in generated data.
pub const TOTAL_ASSETS_CODE: &str = "TOTAL_ASSETS";
/// Ratio variable doubling as the net-income indicator.
pub const NET_INCOME_CODE: &str = "NET_INCOME";
/// Ratio variable doubling as the total-debts indicator.
pub const TOTAL_DEBTS_CODE: &str = "TOTAL_DEBTS";

const COUNTRIES: [&str; 8] = ["US", "JP", "DE", "GB", "FR", "IT", "CH", "CN"];

/// Parameters of the planted-group panel generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_banks: usize,
    pub n_groups: usize,
    /// Ratio variables per bank (the size proxy is emitted on top). The
    /// first two are named `NET_INCOME` and `TOTAL_DEBTS` so indicator
    /// defaults work out of the box; at least 2 are required.
    pub n_variables: usize,
    pub start_year: i32,
    pub end_year: i32,
    /// Std-dev of the Gaussian perturbation applied to each bank's ratios.
    pub within_noise: f64,
    /// Scale of the Gaussian offsets that separate group templates.
    pub between_separation: f64,
    /// Probability that any single observation is dropped.
    pub missing_rate: f64,
    /// log10 bounds for total assets, drawn log-uniformly.
    pub size_log_range: (f64, f64),
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_banks: 60,
            n_groups: 3,
            n_variables: 20,
            start_year: 2001,
            end_year: 2013,
            within_noise: 0.05,
            between_separation: 2.0,
            missing_rate: 0.02,
            size_log_range: (2.0, 6.0),
            rng_seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn n_years(&self) -> usize {
        (self.end_year - self.start_year + 1) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_banks == 0 {
            return Err(Error::Config("n_banks must be positive".to_string()));
        }
        if self.n_groups == 0 || self.n_groups > self.n_banks {
            return Err(Error::Config(format!(
                "n_groups must be in 1..={}, got {}",
                self.n_banks, self.n_groups
            )));
        }
        if self.n_variables < 2 {
            return Err(Error::Config(format!(
                "n_variables must be at least 2, got {}",
                self.n_variables
            )));
        }
        if self.start_year > self.end_year {
            return Err(Error::Config(format!(
                "start_year {} is after end_year {}",
                self.start_year, self.end_year
            )));
        }
        if self.within_noise < 0.0 || self.between_separation < 0.0 {
            return Err(Error::Config(
                "noise and separation must be nonnegative".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!(
                "missing_rate must be in [0, 1), got {}",
                self.missing_rate
            )));
        }
        if self.size_log_range.0 > self.size_log_range.1 {
            return Err(Error::Config(
                "size_log_range must be (low, high) with low <= high".to_string(),
            ));
        }
        Ok(())
    }
}

/// Planted group membership and realized data quality for one bank.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub bank_id: String,
    pub group: usize,
    pub quality_ratio: f64,
}

pub fn variable_codes(n_variables: usize) -> Vec<String> {
    let mut codes = vec![NET_INCOME_CODE.to_string(), TOTAL_DEBTS_CODE.to_string()];
    codes.extend((2..n_variables).map(|v| format!("VAR_{v:02}")));
    codes
}

/// Generate statement records with planted groups.
///
/// Each group gets a template ratio vector; each bank's vector is its group
/// template plus Gaussian noise, held fixed across years and scaled by a
/// log-uniformly drawn total assets. Observations are then dropped i.i.d.
/// at `missing_rate`. Output is byte-stable for a given spec.
pub fn generate(spec: &SyntheticSpec) -> Result<(Vec<StatementRecord>, Vec<GroundTruth>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let codes = variable_codes(spec.n_variables);

    // Group templates around plausible ratio baselines.
    let baseline = |code: &str| -> f64 {
        match code {
            NET_INCOME_CODE => 0.01,
            TOTAL_DEBTS_CODE => 0.85,
            _ => 0.5,
        }
    };
    let templates: Vec<Vec<f64>> = (0..spec.n_groups)
        .map(|_| {
            codes
                .iter()
                .map(|code| {
                    let offset: f64 = rng.sample(StandardNormal);
                    baseline(code) + spec.between_separation * offset
                })
                .collect()
        })
        .collect();

    let possible = (spec.n_variables + 1) * spec.n_years();
    let mut records = Vec::new();
    let mut truth = Vec::with_capacity(spec.n_banks);
    for bank in 0..spec.n_banks {
        let group = bank % spec.n_groups;
        let bank_id = format!("B{bank:03}");
        let country = COUNTRIES[group % COUNTRIES.len()].to_string();

        let (lo, hi) = spec.size_log_range;
        let exponent = lo + (hi - lo) * rng.random::<f64>();
        let total_assets = 10f64.powf(exponent);
        let ratios: Vec<f64> = templates[group]
            .iter()
            .map(|t| {
                let noise: f64 = rng.sample(StandardNormal);
                t + spec.within_noise * noise
            })
            .collect();

        let mut kept = 0usize;
        for year in spec.start_year..=spec.end_year {
            let date = NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date");
            let mut emit = |code: &str, value: f64, rng: &mut ChaCha8Rng| {
                if rng.random::<f64>() >= spec.missing_rate {
                    kept += 1;
                    records.push(StatementRecord {
                        bank_id: bank_id.clone(),
                        country: Some(country.clone()),
                        statement_date: date,
                        variable_code: code.to_string(),
                        value,
                    });
                }
            };
            emit(TOTAL_ASSETS_CODE, total_assets, &mut rng);
            for (code, ratio) in codes.iter().zip(&ratios) {
                emit(code, ratio * total_assets, &mut rng);
            }
        }
        truth.push(GroundTruth {
            bank_id,
            group,
            quality_ratio: kept as f64 / possible as f64,
        });
    }
    Ok((records, truth))
}
