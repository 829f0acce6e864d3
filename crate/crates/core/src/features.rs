//! Per-year feature matrices: each bank's statement vector divided by its
//! total assets, so rows are size-free ratio vectors.

use std::collections::BTreeSet;

use crate::ingest::BankPanel;

/// Banks x variables matrix of total-assets-normalized ratios for one year.
///
/// Missing entries are zero after normalization; `presence` records which
/// entries were actually observed.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub year: i32,
    pub bank_ids: Vec<String>,
    /// Column order, sorted by variable code.
    pub variable_codes: Vec<String>,
    /// Row-major values; `rows[i][j]` is variable `j` of bank `i` over the
    /// bank's total assets.
    pub rows: Vec<Vec<f64>>,
    pub presence: Vec<Vec<bool>>,
    /// Raw total assets per bank for the year (positive by construction).
    pub total_assets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_banks(&self) -> usize {
        self.bank_ids.len()
    }
}

/// Build the feature matrix for one fiscal year.
///
/// Banks without a statement that year, or with missing/non-positive total
/// assets, are excluded (normalization is undefined for them). Rows that end
/// up with zero norm are dropped as well; both cases are logged. The column
/// universe is the union of codes observed by the included banks. The size
/// proxy itself is skipped unless `include_size_proxy` is set, in which case
/// its column is identically 1 wherever total assets is present.
pub fn build_feature_matrix(
    panels: &[BankPanel],
    year: i32,
    size_proxy_code: &str,
    include_size_proxy: bool,
) -> FeatureMatrix {
    // First pass: banks usable this year.
    let mut included: Vec<&BankPanel> = Vec::new();
    for panel in panels {
        let Some(vars) = panel.years.get(&year) else {
            continue;
        };
        match vars.get(size_proxy_code) {
            Some(&ta) if ta > 0.0 => included.push(panel),
            _ => log::warn!(
                "bank {} has missing or non-positive total assets in {year}; excluded",
                panel.bank_id
            ),
        }
    }
    included.sort_by(|a, b| a.bank_id.cmp(&b.bank_id));

    loop {
        let mut codes: BTreeSet<&str> = BTreeSet::new();
        for panel in &included {
            for code in panel.years[&year].keys() {
                if include_size_proxy || code != size_proxy_code {
                    codes.insert(code);
                }
            }
        }
        let variable_codes: Vec<String> = codes.iter().map(|c| c.to_string()).collect();

        let mut bank_ids = Vec::with_capacity(included.len());
        let mut rows = Vec::with_capacity(included.len());
        let mut presence = Vec::with_capacity(included.len());
        let mut total_assets = Vec::with_capacity(included.len());
        let mut dropped_zero = Vec::new();
        for panel in &included {
            let vars = &panel.years[&year];
            let ta = vars[size_proxy_code];
            let mut row = Vec::with_capacity(variable_codes.len());
            let mut mask = Vec::with_capacity(variable_codes.len());
            for code in &variable_codes {
                match vars.get(code) {
                    Some(&v) => {
                        row.push(v / ta);
                        mask.push(true);
                    }
                    None => {
                        row.push(0.0);
                        mask.push(false);
                    }
                }
            }
            if row.iter().all(|&v| v == 0.0) {
                log::warn!(
                    "bank {} has an all-zero feature row in {year}; dropped",
                    panel.bank_id
                );
                dropped_zero.push(panel.bank_id.clone());
                continue;
            }
            bank_ids.push(panel.bank_id.clone());
            rows.push(row);
            presence.push(mask);
            total_assets.push(ta);
        }

        if dropped_zero.is_empty() {
            return FeatureMatrix {
                year,
                bank_ids,
                variable_codes,
                rows,
                presence,
                total_assets,
            };
        }
        // Recompute the column universe without the dropped banks. Dropping
        // cannot cascade: removing a column where a surviving row is zero
        // leaves that row's norm unchanged.
        included.retain(|p| !dropped_zero.contains(&p.bank_id));
    }
}

/// Codes whose observed frequency across all bank-years reaches
/// `presence_fraction`. The fraction must lie in (0, 1].
pub fn popular_variables(
    matrices: &[FeatureMatrix],
    presence_fraction: f64,
) -> crate::error::Result<BTreeSet<String>> {
    if !(presence_fraction > 0.0 && presence_fraction <= 1.0) {
        return Err(crate::error::Error::Config(format!(
            "presence_fraction must be in (0, 1], got {presence_fraction}"
        )));
    }
    let total_bank_years: usize = matrices.iter().map(|m| m.n_banks()).sum();
    if total_bank_years == 0 {
        return Ok(BTreeSet::new());
    }
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for m in matrices {
        for mask in &m.presence {
            for (j, &seen) in mask.iter().enumerate() {
                if seen {
                    *counts.entry(&m.variable_codes[j]).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(counts
        .into_iter()
        .filter(|(_, c)| *c as f64 / total_bank_years as f64 >= presence_fraction)
        .map(|(code, _)| code.to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    const TA: &str = "TOTAL_ASSETS";

    fn panel(bank: &str, year: i32, vars: &[(&str, f64)]) -> BankPanel {
        let map: BTreeMap<String, f64> =
            vars.iter().map(|(c, v)| (c.to_string(), *v)).collect();
        BankPanel {
            bank_id: bank.to_string(),
            country: None,
            years: BTreeMap::from([(year, map)]),
            quality_ratio: 1.0,
            statement_dates: vec![chrono::NaiveDate::from_ymd_opt(year, 12, 31).unwrap()],
        }
    }

    #[test]
    fn entries_are_ratios() {
        let panels = vec![panel("b", 2005, &[(TA, 100.0), ("LOANS", 40.0)])];
        let m = build_feature_matrix(&panels, 2005, TA, false);
        assert_eq!(m.variable_codes, vec!["LOANS"]);
        assert_eq!(m.rows[0][0], 0.4);
        assert!(m.presence[0][0]);
        assert_eq!(m.total_assets[0], 100.0);
    }

    #[test]
    fn missing_variable_is_zero_with_false_mask() {
        let panels = vec![
            panel("a", 2005, &[(TA, 100.0), ("X", 10.0), ("Y", 20.0)]),
            panel("b", 2005, &[(TA, 50.0), ("Y", 5.0)]),
        ];
        let m = build_feature_matrix(&panels, 2005, TA, false);
        assert_eq!(m.variable_codes, vec!["X", "Y"]);
        let b = m.bank_ids.iter().position(|id| id == "b").unwrap();
        let x = 0;
        assert_eq!(m.rows[b][x], 0.0);
        assert!(!m.presence[b][x]);
    }

    #[test]
    fn proportional_statements_give_identical_rows() {
        let k = 7.25;
        let base = [(TA, 200.0), ("X", 30.0), ("Y", 90.0)];
        let scaled: Vec<(&str, f64)> = base.iter().map(|&(c, v)| (c, v * k)).collect();
        let panels = vec![panel("a", 2005, &base), panel("b", 2005, &scaled)];
        let m = build_feature_matrix(&panels, 2005, TA, false);
        for j in 0..m.variable_codes.len() {
            assert!((m.rows[0][j] - m.rows[1][j]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_total_assets_excludes_bank() {
        let panels = vec![
            panel("a", 2005, &[(TA, 100.0), ("X", 10.0)]),
            panel("neg", 2005, &[(TA, -5.0), ("X", 10.0)]),
            panel("zero", 2005, &[(TA, 0.0), ("X", 10.0)]),
            panel("none", 2005, &[("X", 10.0)]),
        ];
        let m = build_feature_matrix(&panels, 2005, TA, false);
        assert_eq!(m.bank_ids, vec!["a"]);
    }

    #[test]
    fn all_zero_row_is_dropped_and_columns_recomputed() {
        // Bank "only_ta" observes nothing but the size proxy; its row is
        // all-zero once the proxy column is excluded.
        let panels = vec![
            panel("a", 2005, &[(TA, 100.0), ("X", 10.0)]),
            panel("only_ta", 2005, &[(TA, 100.0), ("Z", 0.0)]),
        ];
        let m = build_feature_matrix(&panels, 2005, TA, false);
        assert_eq!(m.bank_ids, vec!["a"]);
        // Column Z was observed only by the dropped bank.
        assert_eq!(m.variable_codes, vec!["X"]);
    }

    #[test]
    fn size_proxy_column_is_unity_when_included() {
        let panels = vec![
            panel("a", 2005, &[(TA, 100.0), ("X", 10.0)]),
            panel("b", 2005, &[(TA, 250.0), ("X", 10.0)]),
        ];
        let m = build_feature_matrix(&panels, 2005, TA, true);
        let j = m
            .variable_codes
            .iter()
            .position(|c| c == TA)
            .expect("size proxy column present");
        for row in &m.rows {
            assert_eq!(row[j], 1.0);
        }
    }

    #[test]
    fn popular_variables_thresholds() {
        // 4 banks in one year: X present for all, Y for 3 of 4 (75%).
        let panels: Vec<BankPanel> = (0..4)
            .map(|i| {
                let mut vars = vec![(TA, 100.0), ("X", 1.0)];
                if i < 3 {
                    vars.push(("Y", 2.0));
                }
                panel(&format!("b{i}"), 2005, &vars)
            })
            .collect();
        let m = build_feature_matrix(&panels, 2005, TA, false);

        let all = popular_variables(std::slice::from_ref(&m), 1.0).unwrap();
        assert_eq!(all, BTreeSet::from(["X".to_string()]));

        let loose = popular_variables(std::slice::from_ref(&m), 0.001).unwrap();
        assert_eq!(loose, BTreeSet::from(["X".to_string(), "Y".to_string()]));

        // 75% presence misses a 0.8 threshold.
        let tight = popular_variables(std::slice::from_ref(&m), 0.8).unwrap();
        assert_eq!(tight, BTreeSet::from(["X".to_string()]));

        assert!(popular_variables(&[m], 0.0).is_err());
    }
}
