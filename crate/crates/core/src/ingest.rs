//! Statement-panel ingestion: CSV parsing, fiscal-year assignment, and the
//! quality/continuity filters that select a stable set of banks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// One observation: a single statement field of one bank on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct StatementRecord {
    pub bank_id: String,
    /// ISO 3166-1 alpha-2 code; informational only.
    pub country: Option<String>,
    pub statement_date: NaiveDate,
    pub variable_code: String,
    /// Value in a single common currency unit (inputs are assumed
    /// pre-converted; no FX handling here).
    pub value: f64,
}

/// A rejected input row with its 1-based line number.
#[derive(Debug, Clone)]
pub struct ParseIssue {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

const REQUIRED_COLUMNS: [&str; 5] = [
    "bank_id",
    "country",
    "statement_date",
    "variable_code",
    "value",
];

/// Parse the delimited input format: comma-separated, UTF-8, header row with
/// columns `bank_id,country,statement_date,variable_code,value`.
///
/// Rows that fail to parse are returned as [`ParseIssue`]s instead of
/// aborting, so callers can report every bad line at once.
pub fn parse_records<R: Read>(reader: R) -> Result<(Vec<StatementRecord>, Vec<ParseIssue>)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|e| Error::Validation(format!("cannot read header row: {e}")))?
        .clone();
    let mut columns = [0usize; 5];
    for (slot, name) in columns.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("missing required column '{name}'")))?;
    }
    let [col_bank, col_country, col_date, col_code, col_value] = columns;

    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (row_idx, row) in csv_reader.records().enumerate() {
        // Header occupies line 1, so the first data row is line 2. The csv
        // position is used when available; multi-line quoted fields shift it.
        let fallback_line = row_idx as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(fallback_line, |p| p.line());
                issues.push(ParseIssue {
                    line,
                    message: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let line = row.position().map_or(fallback_line, |p| p.line());
        let mut reject = |message: String| issues.push(ParseIssue { line, message });

        let bank_id = row.get(col_bank).unwrap_or("").to_string();
        if bank_id.is_empty() {
            reject("empty bank_id".to_string());
            continue;
        }
        let code = row.get(col_code).unwrap_or("").to_string();
        if code.is_empty() {
            reject("empty variable_code".to_string());
            continue;
        }
        let raw_date = row.get(col_date).unwrap_or("");
        let statement_date = match NaiveDate::parse_from_str(raw_date, "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => {
                reject(format!("unparsable statement_date '{raw_date}'"));
                continue;
            }
        };
        let raw_value = row.get(col_value).unwrap_or("");
        let value = match raw_value.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                reject(format!("unparsable value '{raw_value}'"));
                continue;
            }
        };
        let country = match row.get(col_country).unwrap_or("") {
            "" => None,
            c => Some(c.to_string()),
        };
        records.push(StatementRecord {
            bank_id,
            country,
            statement_date,
            variable_code: code,
            value,
        });
    }
    Ok((records, issues))
}

pub fn read_records(path: &Path) -> Result<(Vec<StatementRecord>, Vec<ParseIssue>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(std::io::BufReader::new(file))
}

/// Filtering criteria for the stable-bank selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Minimum quality ratio a bank must reach to be retained.
    pub qr_threshold: f64,
    /// Minimum number of annual statements inside the sample period.
    pub min_statements: usize,
    /// Number of possible fiscal years; must match the sample span.
    pub max_sample_years: usize,
    /// Maximum allowed gap, in days, between consecutive statements.
    pub max_gap_days: i64,
    /// Months before/after Dec 31 that still belong to that fiscal year.
    pub fiscal_window_months: u32,
    pub sample_start_year: i32,
    pub sample_end_year: i32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            qr_threshold: 0.5,
            min_statements: 10,
            max_sample_years: 13,
            max_gap_days: 700,
            fiscal_window_months: 3,
            sample_start_year: 2001,
            sample_end_year: 2013,
        }
    }
}

impl FilterConfig {
    pub fn sample_years(&self) -> std::ops::RangeInclusive<i32> {
        self.sample_start_year..=self.sample_end_year
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.qr_threshold) {
            return Err(Error::Config(format!(
                "qr_threshold must be in [0, 1], got {}",
                self.qr_threshold
            )));
        }
        if self.sample_start_year > self.sample_end_year {
            return Err(Error::Config(format!(
                "sample_start_year {} is after sample_end_year {}",
                self.sample_start_year, self.sample_end_year
            )));
        }
        let span = (self.sample_end_year - self.sample_start_year + 1) as usize;
        if self.max_sample_years != span {
            return Err(Error::Config(format!(
                "max_sample_years {} does not match the sample span {span}",
                self.max_sample_years
            )));
        }
        if self.min_statements > self.max_sample_years {
            return Err(Error::Config(format!(
                "min_statements {} exceeds max_sample_years {}",
                self.min_statements, self.max_sample_years
            )));
        }
        if self.fiscal_window_months > 6 {
            return Err(Error::Config(format!(
                "fiscal_window_months must be at most 6 for unambiguous assignment, got {}",
                self.fiscal_window_months
            )));
        }
        if self.max_gap_days < 0 {
            return Err(Error::Config(format!(
                "max_gap_days must be nonnegative, got {}",
                self.max_gap_days
            )));
        }
        Ok(())
    }
}

/// Map a statement date to its fiscal year.
///
/// A date within `window_months` months before or after December 31 of year
/// `y` belongs to fiscal year `y`; with a 3-month window, `[Oct 1 of y,
/// Mar 31 of y+1]` maps to `y`. Dates in the uncovered middle of the year are
/// rejected.
pub fn assign_fiscal_year(date: NaiveDate, window_months: u32) -> Result<i32> {
    if window_months > 6 {
        return Err(Error::Config(format!(
            "fiscal window of {window_months} months makes assignment ambiguous (max 6)"
        )));
    }
    let month = date.month();
    if month >= 13 - window_months {
        Ok(date.year())
    } else if month <= window_months {
        Ok(date.year() - 1)
    } else {
        Err(Error::UnassignableDate {
            date,
            window_months,
        })
    }
}

/// Remove total/sub-total variable codes, keeping the size proxy even when
/// it is listed (it is needed for normalization downstream).
pub fn drop_redundant_variables(
    records: Vec<StatementRecord>,
    redundant_codes: &BTreeSet<String>,
    size_proxy_code: &str,
) -> Vec<StatementRecord> {
    if redundant_codes.contains(size_proxy_code) {
        log::warn!(
            "size proxy '{size_proxy_code}' listed among redundant codes; retaining it anyway"
        );
    }
    records
        .into_iter()
        .filter(|r| r.variable_code == size_proxy_code || !redundant_codes.contains(&r.variable_code))
        .collect()
}

/// A bank's validated per-fiscal-year statement vectors.
#[derive(Debug, Clone)]
pub struct BankPanel {
    pub bank_id: String,
    pub country: Option<String>,
    /// Fiscal year -> (variable code -> value). Only sample-period years.
    pub years: BTreeMap<i32, BTreeMap<String, f64>>,
    /// Fraction of possible variable observations that are present.
    pub quality_ratio: f64,
    /// Dates of the statements that were kept, ascending.
    pub statement_dates: Vec<NaiveDate>,
}

/// V_OK / V_ALL: available usable observations over the maximum possible
/// (all retained variable codes x all sample years).
pub fn compute_quality_ratio(
    panel: &BankPanel,
    retained_codes: &BTreeSet<String>,
    sample_years: std::ops::RangeInclusive<i32>,
) -> Result<f64> {
    if retained_codes.is_empty() {
        return Err(Error::Config(
            "quality ratio needs a nonempty retained variable-code set".to_string(),
        ));
    }
    if sample_years.is_empty() {
        return Err(Error::Config(
            "quality ratio needs a nonempty sample-year range".to_string(),
        ));
    }
    let n_years = (*sample_years.end() - *sample_years.start() + 1) as usize;
    let v_all = retained_codes.len() * n_years;
    let v_ok: usize = panel
        .years
        .iter()
        .filter(|(year, _)| sample_years.contains(year))
        .map(|(_, vars)| vars.keys().filter(|c| retained_codes.contains(*c)).count())
        .sum();
    Ok(v_ok as f64 / v_all as f64)
}

/// Group records into per-bank panels: assign fiscal years, resolve duplicate
/// statements within a fiscal year, restrict to the sample period, and
/// compute each bank's quality ratio against `retained_codes`.
///
/// When two statements land in the same fiscal year, the one dated closest to
/// December 31 wins; ties go to the later date. Returns panels sorted by
/// bank id plus human-readable warnings for everything that was skipped.
pub fn build_panels(
    records: &[StatementRecord],
    config: &FilterConfig,
    retained_codes: &BTreeSet<String>,
) -> Result<(Vec<BankPanel>, Vec<String>)> {
    config.validate()?;
    let mut warnings = Vec::new();

    // bank -> date -> variable map, plus the first country seen per bank.
    let mut by_bank: BTreeMap<&str, BTreeMap<NaiveDate, BTreeMap<String, f64>>> = BTreeMap::new();
    let mut countries: BTreeMap<&str, String> = BTreeMap::new();
    for rec in records {
        let dates = by_bank.entry(&rec.bank_id).or_default();
        let vars = dates.entry(rec.statement_date).or_default();
        if vars.insert(rec.variable_code.clone(), rec.value).is_some() {
            let w = format!(
                "bank {}: duplicate observation of {} on {}; keeping the last",
                rec.bank_id, rec.variable_code, rec.statement_date
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        if let Some(c) = &rec.country {
            countries.entry(&rec.bank_id).or_insert_with(|| c.clone());
        }
    }

    let mut panels = Vec::new();
    for (bank_id, dates) in by_bank {
        // fiscal year -> best (date, vars) so far
        let mut chosen: BTreeMap<i32, (NaiveDate, BTreeMap<String, f64>)> = BTreeMap::new();
        for (date, vars) in dates {
            let year = match assign_fiscal_year(date, config.fiscal_window_months) {
                Ok(y) => y,
                Err(_) => {
                    let w = format!(
                        "bank {bank_id}: statement dated {date} falls outside every \
                         fiscal-year window; skipped"
                    );
                    log::warn!("{w}");
                    warnings.push(w);
                    continue;
                }
            };
            if !config.sample_years().contains(&year) {
                continue;
            }
            match chosen.entry(year) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((date, vars));
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let incumbent = e.get().0;
                    let keep_new = {
                        let d_new = distance_to_year_end(date, year);
                        let d_old = distance_to_year_end(incumbent, year);
                        d_new < d_old || (d_new == d_old && date > incumbent)
                    };
                    let (kept, dropped) = if keep_new {
                        e.insert((date, vars));
                        (date, incumbent)
                    } else {
                        (incumbent, date)
                    };
                    let w = format!(
                        "bank {bank_id}: statements {dropped} and {kept} both map to fiscal \
                         year {year}; keeping {kept}"
                    );
                    log::warn!("{w}");
                    warnings.push(w);
                }
            }
        }
        if chosen.is_empty() {
            continue;
        }
        let mut statement_dates: Vec<NaiveDate> = chosen.values().map(|(d, _)| *d).collect();
        statement_dates.sort_unstable();
        let years: BTreeMap<i32, BTreeMap<String, f64>> =
            chosen.into_iter().map(|(y, (_, vars))| (y, vars)).collect();
        let mut panel = BankPanel {
            bank_id: bank_id.to_string(),
            country: countries.get(bank_id).cloned(),
            years,
            quality_ratio: 0.0,
            statement_dates,
        };
        panel.quality_ratio =
            compute_quality_ratio(&panel, retained_codes, config.sample_years())?;
        panels.push(panel);
    }
    Ok((panels, warnings))
}

fn distance_to_year_end(date: NaiveDate, fiscal_year: i32) -> i64 {
    let year_end = NaiveDate::from_ymd_opt(fiscal_year, 12, 31).expect("valid year end");
    (date - year_end).num_days().abs()
}

/// Keep banks that satisfy all three stability criteria: quality ratio at or
/// above the threshold, enough annual statements, and no reporting gap wider
/// than the cap. Output is sorted by bank id.
pub fn filter_banks(panels: Vec<BankPanel>, config: &FilterConfig) -> Vec<BankPanel> {
    let mut kept: Vec<BankPanel> = panels
        .into_iter()
        .filter(|p| {
            p.quality_ratio >= config.qr_threshold
                && p.statement_dates.len() >= config.min_statements
                && max_gap_days(&p.statement_dates) <= config.max_gap_days
        })
        .collect();
    kept.sort_by(|a, b| a.bank_id.cmp(&b.bank_id));
    kept
}

fn max_gap_days(dates: &[NaiveDate]) -> i64 {
    dates
        .windows(2)
        .map(|w| (w[1] - w[0]).num_days())
        .max()
        .unwrap_or(0)
}

/// One row of the quality-ratio sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct QrSweepRow {
    pub qr_threshold: f64,
    pub year: i32,
    pub nodes: usize,
    pub edges: usize,
}

/// For each quality-ratio threshold, re-filter the panels and report per-year
/// node and edge counts produced by `per_year`. Thresholds must be ascending;
/// bank sets are then nested across thresholds by construction.
pub fn qr_sweep<F>(
    panels: &[BankPanel],
    thresholds: &[f64],
    config: &FilterConfig,
    mut per_year: F,
) -> Result<Vec<QrSweepRow>>
where
    F: FnMut(&[BankPanel], i32) -> Result<(usize, usize)>,
{
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(
            "qr sweep thresholds must be sorted ascending".to_string(),
        ));
    }
    let mut rows = Vec::new();
    for &threshold in thresholds {
        let mut cfg = config.clone();
        cfg.qr_threshold = threshold;
        let filtered = filter_banks(panels.to_vec(), &cfg);
        for year in config.sample_years() {
            let (nodes, edges) = per_year(&filtered, year)?;
            rows.push(QrSweepRow {
                qr_threshold: threshold,
                year,
                nodes,
                edges,
            });
        }
    }
    Ok(rows)
}
