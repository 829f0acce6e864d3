//! Scaled principal component analysis for community characterization:
//! correlation-matrix PCA, eigenvalue-above-1 retention, per-measure
//! explained-variance contributions, and top/bottom-3 rankings per period.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Fitted correlation-matrix PCA.
#[derive(Debug, Clone)]
pub struct PcaModel {
    /// Measures that survived the constant-column drop, in input order.
    pub measure_codes: Vec<String>,
    /// Descending; their sum equals the number of measures.
    pub eigenvalues: Vec<f64>,
    /// `loadings[j][k]` = eigenvector entry (measure j, component k) times
    /// sqrt(eigenvalue k).
    pub loadings: Vec<Vec<f64>>,
    /// Number of components with eigenvalue > 1.
    pub retained: usize,
}

impl PcaModel {
    pub fn n_measures(&self) -> usize {
        self.measure_codes.len()
    }

    /// Documented fallback for the degenerate case where no eigenvalue
    /// exceeds 1: keep the leading component.
    pub fn retain_at_least_one(&mut self) {
        if self.retained == 0 && !self.eigenvalues.is_empty() {
            self.retained = 1;
        }
    }
}

/// Standardize each column to zero mean and unit variance, eigendecompose
/// the correlation matrix, and retain components with eigenvalue > 1.
///
/// `data` is row-major: one row per community member, one column per entry
/// of `measure_codes`. Constant columns are dropped with a warning; at least
/// two members and two non-constant measures are required.
pub fn fit_scaled_pca(data: &[Vec<f64>], measure_codes: &[String]) -> Result<PcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 members, got {n}"
        )));
    }
    for row in data {
        assert_eq!(row.len(), measure_codes.len(), "ragged PCA data row");
    }

    // Drop constant columns: they carry no variance to explain.
    let mut kept_columns = Vec::new();
    let mut codes = Vec::new();
    for (j, code) in measure_codes.iter().enumerate() {
        let first = data[0][j];
        if data.iter().any(|row| row[j] != first) {
            kept_columns.push(j);
            codes.push(code.clone());
        } else {
            log::warn!("measure '{code}' is constant across members; dropped from PCA");
        }
    }
    let p = kept_columns.len();
    if p < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 non-constant measures, got {p}"
        )));
    }

    // Standardized scores, column-major over kept columns.
    let mut z = vec![vec![0.0; n]; p];
    for (col, &j) in kept_columns.iter().enumerate() {
        let mean = data.iter().map(|row| row[j]).sum::<f64>() / n as f64;
        let ss: f64 = data.iter().map(|row| (row[j] - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        for (i, row) in data.iter().enumerate() {
            z[col][i] = (row[j] - mean) / sd;
        }
    }

    // Correlation matrix with the diagonal pinned at 1.
    let mut corr = DMatrix::zeros(p, p);
    for a in 0..p {
        corr[(a, a)] = 1.0;
        for b in (a + 1)..p {
            let r = z[a]
                .iter()
                .zip(&z[b])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / (n - 1) as f64;
            let r = r.clamp(-1.0, 1.0);
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }

    let (eigenvalues, eigenvectors) = eigen_sorted(&corr);
    let retained = eigenvalues.iter().filter(|&&l| l > 1.0).count();
    let loadings = (0..p)
        .map(|j| {
            (0..p)
                .map(|k| eigenvectors[k][j] * eigenvalues[k].sqrt())
                .collect()
        })
        .collect();
    Ok(PcaModel {
        measure_codes: codes,
        eigenvalues,
        loadings,
        retained,
    })
}

/// Eigendecompose a symmetric matrix, ordering components by descending
/// eigenvalue. Eigenvectors are oriented so their largest-magnitude entry is
/// positive; exact eigenvalue ties are broken by lexicographic comparison of
/// the oriented vectors. Tiny negative eigenvalues are clamped to zero.
pub(crate) fn eigen_sorted(matrix: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = matrix.clone().symmetric_eigen();
    let p = matrix.nrows();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..p)
        .map(|k| {
            let value = eig.eigenvalues[k].max(0.0);
            let mut vector: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let dominant = vector
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if vector[dominant] < 0.0 {
                for entry in vector.iter_mut() {
                    *entry = -*entry;
                }
            }
            (value, vector)
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let eigenvalues = pairs.iter().map(|(v, _)| *v).collect();
    let eigenvectors = pairs.into_iter().map(|(_, v)| v).collect();
    (eigenvalues, eigenvectors)
}

/// Fraction of each standardized measure's unit variance captured by the
/// retained components: the communality sum over retained loadings squared.
pub fn measure_contributions(model: &PcaModel) -> Result<BTreeMap<String, f64>> {
    if model.retained == 0 {
        return Err(Error::NoRetainedComponents);
    }
    Ok(model
        .measure_codes
        .iter()
        .enumerate()
        .map(|(j, code)| {
            let communality: f64 = model.loadings[j][..model.retained]
                .iter()
                .map(|l| l * l)
                .sum();
            (code.clone(), communality.clamp(0.0, 1.0))
        })
        .collect())
}

/// A labeled year range used for sub-period averaging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Period {
    pub label: String,
    pub start_year: i32,
    pub end_year: i32,
}

impl Period {
    pub fn new(start_year: i32, end_year: i32) -> Period {
        Period {
            label: format!("{start_year}-{end_year}"),
            start_year,
            end_year,
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start_year..=self.end_year).contains(&year)
    }
}

/// Pre-crisis, crisis, post-crisis sub-periods.
pub fn default_periods() -> Vec<Period> {
    vec![
        Period::new(2001, 2006),
        Period::new(2007, 2009),
        Period::new(2010, 2013),
    ]
}

fn validate_periods(periods: &[Period]) -> Result<()> {
    if periods.is_empty() {
        return Err(Error::Config("at least one period is required".to_string()));
    }
    for p in periods {
        if p.start_year > p.end_year {
            return Err(Error::Config(format!(
                "period {} has start after end",
                p.label
            )));
        }
    }
    for w in periods.windows(2) {
        if w[1].start_year <= w[0].end_year {
            return Err(Error::Config(format!(
                "periods {} and {} overlap or are out of order",
                w[0].label, w[1].label
            )));
        }
    }
    Ok(())
}

/// Mean contributions per measure for one community over one period, with
/// the three strongest and weakest measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRanking {
    pub community_id: usize,
    pub period: String,
    /// Mean contribution per measure across the period's fitted years.
    pub contributions: BTreeMap<String, f64>,
    /// Descending by mean contribution.
    pub top3: Vec<(String, f64)>,
    /// Ascending by mean contribution.
    pub bottom3: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct RankingReport {
    pub rankings: Vec<ContributionRanking>,
    /// (community, period) combinations without data, with the reason.
    pub skipped: Vec<String>,
}

/// Average each community's yearly contributions within each period and rank
/// measures by the period means. `yearly` maps (community, year) to that
/// fit's contribution map. Periods must be ascending and non-overlapping.
pub fn period_rankings(
    yearly: &BTreeMap<(usize, i32), BTreeMap<String, f64>>,
    periods: &[Period],
) -> Result<RankingReport> {
    validate_periods(periods)?;
    let communities: BTreeSet<usize> = yearly.keys().map(|&(c, _)| c).collect();
    let mut report = RankingReport::default();
    for &community in &communities {
        for period in periods {
            let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            let mut years_hit = 0;
            for ((c, year), contributions) in yearly {
                if *c != community || !period.contains(*year) {
                    continue;
                }
                years_hit += 1;
                for (code, &value) in contributions {
                    let entry = sums.entry(code).or_insert((0.0, 0));
                    entry.0 += value;
                    entry.1 += 1;
                }
            }
            if years_hit == 0 {
                report.skipped.push(format!(
                    "community {community} absent in period {}",
                    period.label
                ));
                continue;
            }
            let means: BTreeMap<String, f64> = sums
                .into_iter()
                .map(|(code, (sum, count))| (code.to_string(), sum / count as f64))
                .collect();

            // One descending sort; ties fall back to code order so top3 and
            // bottom3 stay disjoint whenever six measures exist.
            let mut ranked: Vec<(String, f64)> =
                means.iter().map(|(c, &v)| (c.clone(), v)).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let top3: Vec<(String, f64)> = ranked.iter().take(3).cloned().collect();
            let bottom3: Vec<(String, f64)> = ranked.iter().rev().take(3).cloned().collect();
            report.rankings.push(ContributionRanking {
                community_id: community,
                period: period.label.clone(),
                contributions: means,
                top3,
                bottom3,
            });
        }
    }
    Ok(report)
}
