//! Node-level network statistics, per-bank economic indicators, and yearly
//! Pearson correlations between the two with a parametric significance test.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ingest::BankPanel;
use crate::simgraph::SimilarityGraph;

/// Network statistics of one node on the pruned graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetrics {
    pub bank_id: String,
    /// Sum of incident edge weights.
    pub strength: f64,
    /// Triangles through the node over possible triangles, on the unweighted
    /// skeleton; 0 when degree < 2.
    pub clustering: f64,
}

/// Variable codes that identify the indicator inputs in the data dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorCodes {
    pub net_income: String,
    pub total_debts: String,
    pub total_assets: String,
}

impl Default for IndicatorCodes {
    fn default() -> Self {
        IndicatorCodes {
            net_income: "NET_INCOME".to_string(),
            total_debts: "TOTAL_DEBTS".to_string(),
            total_assets: "TOTAL_ASSETS".to_string(),
        }
    }
}

/// Economic indicators of one bank in one year. Fields are `None` when the
/// underlying statement field is missing, so correlations can drop banks
/// pairwise rather than listwise.
#[derive(Debug, Clone, PartialEq)]
pub struct EconIndicators {
    pub bank_id: String,
    /// Net income over total assets.
    pub roa: Option<f64>,
    /// Total debts over total assets.
    pub leverage: Option<f64>,
    /// Total assets; positive whenever present.
    pub size: Option<f64>,
}

/// One yearly correlation estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPoint {
    pub year: i32,
    pub x_name: String,
    pub y_name: String,
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub significant: bool,
}

/// A (year, pair) combination that could not be estimated, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    pub year: i32,
    pub x_name: String,
    pub y_name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct CorrelationSeries {
    pub points: Vec<CorrelationPoint>,
    pub skipped: Vec<SkippedPoint>,
}

/// Strength of one node, looked up by bank id.
pub fn node_strength(graph: &SimilarityGraph, bank_id: &str) -> Result<f64> {
    let node = graph
        .node_index(bank_id)
        .ok_or_else(|| Error::UnknownNode(bank_id.to_string()))?;
    Ok(graph.strengths()[node])
}

/// Local clustering coefficient of one node, looked up by bank id.
pub fn clustering_coefficient(graph: &SimilarityGraph, bank_id: &str) -> Result<f64> {
    let node = graph
        .node_index(bank_id)
        .ok_or_else(|| Error::UnknownNode(bank_id.to_string()))?;
    Ok(clustering_by_index(&graph.adjacency(), node))
}

fn clustering_by_index(adj: &[Vec<(usize, f64)>], node: usize) -> f64 {
    let neighbors: Vec<usize> = adj[node].iter().map(|&(n, _)| n).collect();
    let k = neighbors.len();
    if k < 2 {
        return 0.0;
    }
    let mut triangles = 0usize;
    for (i, &a) in neighbors.iter().enumerate() {
        for &b in &neighbors[i + 1..] {
            if adj[a].binary_search_by(|probe| probe.0.cmp(&b)).is_ok() {
                triangles += 1;
            }
        }
    }
    2.0 * triangles as f64 / (k * (k - 1)) as f64
}

/// Strength and clustering for every node, in graph node order.
pub fn node_metrics(graph: &SimilarityGraph) -> Vec<NodeMetrics> {
    let adj = graph.adjacency();
    let strengths = graph.strengths();
    graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, bank_id)| NodeMetrics {
            bank_id: bank_id.clone(),
            strength: strengths[i],
            clustering: clustering_by_index(&adj, i),
        })
        .collect()
}

/// Indicators for every bank with positive total assets in the year, sorted
/// by bank id.
pub fn econ_indicators(
    panels: &[BankPanel],
    year: i32,
    codes: &IndicatorCodes,
) -> Vec<EconIndicators> {
    let mut out: Vec<EconIndicators> = panels
        .iter()
        .filter_map(|panel| {
            let vars = panel.years.get(&year)?;
            let ta = match vars.get(&codes.total_assets) {
                Some(&ta) if ta > 0.0 => ta,
                _ => return None,
            };
            Some(EconIndicators {
                bank_id: panel.bank_id.clone(),
                roa: vars.get(&codes.net_income).map(|v| v / ta),
                leverage: vars.get(&codes.total_debts).map(|v| v / ta),
                size: Some(ta),
            })
        })
        .collect();
    out.sort_by(|a, b| a.bank_id.cmp(&b.bank_id));
    out
}

/// Outcome of one Pearson test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonTest {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub significant: bool,
}

/// Sample Pearson correlation with a two-sided t-test:
/// t = r * sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom.
pub fn pearson_with_test(x: &[f64], y: &[f64], alpha: f64) -> Result<PearsonTest> {
    assert_eq!(x.len(), y.len(), "series must be aligned");
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientSample { n, min: 3 });
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantSeries("x".to_string()));
    }
    if syy == 0.0 {
        return Err(Error::ConstantSeries("y".to_string()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::Internal(format!("t-distribution with df {df}: {e}")))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(PearsonTest {
        r,
        p_value,
        n,
        significant: p_value < alpha,
    })
}

/// Network metric named on the x side of a correlation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    Strength,
    Clustering,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Strength => "strength",
            MetricName::Clustering => "clustering",
        }
    }
}

/// Economic indicator named on the y side of a correlation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorName {
    Roa,
    Leverage,
    Size,
}

impl IndicatorName {
    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorName::Roa => "roa",
            IndicatorName::Leverage => "leverage",
            IndicatorName::Size => "size",
        }
    }
}

/// The comparisons reported by default: strength vs leverage, strength vs
/// size, clustering vs ROA.
pub fn default_pairs() -> Vec<(MetricName, IndicatorName)> {
    vec![
        (MetricName::Strength, IndicatorName::Leverage),
        (MetricName::Strength, IndicatorName::Size),
        (MetricName::Clustering, IndicatorName::Roa),
    ]
}

/// One Pearson estimate per (year, pair), joining metrics and indicators on
/// bank id and dropping banks with a missing indicator pairwise. Years or
/// pairs that cannot be estimated become skipped entries with a reason.
pub fn yearly_correlation_series(
    years: &[(i32, Vec<NodeMetrics>, Vec<EconIndicators>)],
    pairs: &[(MetricName, IndicatorName)],
    alpha: f64,
) -> CorrelationSeries {
    let mut series = CorrelationSeries::default();
    for (year, metrics, indicators) in years {
        let by_bank: BTreeMap<&str, &EconIndicators> = indicators
            .iter()
            .map(|ind| (ind.bank_id.as_str(), ind))
            .collect();
        for &(metric, indicator) in pairs {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for m in metrics {
                let Some(ind) = by_bank.get(m.bank_id.as_str()) else {
                    continue;
                };
                let y = match indicator {
                    IndicatorName::Roa => ind.roa,
                    IndicatorName::Leverage => ind.leverage,
                    IndicatorName::Size => ind.size,
                };
                let Some(y) = y else { continue };
                let x = match metric {
                    MetricName::Strength => m.strength,
                    MetricName::Clustering => m.clustering,
                };
                xs.push(x);
                ys.push(y);
            }
            match pearson_with_test(&xs, &ys, alpha) {
                Ok(test) => series.points.push(CorrelationPoint {
                    year: *year,
                    x_name: metric.as_str().to_string(),
                    y_name: indicator.as_str().to_string(),
                    r: test.r,
                    p_value: test.p_value,
                    n: test.n,
                    significant: test.significant,
                }),
                Err(e) => series.skipped.push(SkippedPoint {
                    year: *year,
                    x_name: metric.as_str().to_string(),
                    y_name: indicator.as_str().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgraph::SimEdge;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph {
            year: 2005,
            nodes: (0..n).map(|i| format!("b{i}")).collect(),
            edges: edges
                .iter()
                .map(|&(src, dst, weight)| SimEdge {
                    src,
                    dst,
                    cosine: 0.0,
                    weight,
                    significant: true,
                })
                .collect(),
        }
    }

    #[test]
    fn strength_sums_incident_weights() {
        let g = graph(4, &[(0, 1, 0.5), (0, 2, 0.5), (0, 3, 0.5)]);
        assert_eq!(node_strength(&g, "b0").unwrap(), 1.5);
        assert_eq!(node_strength(&g, "b1").unwrap(), 0.5);
    }

    #[test]
    fn strength_of_isolated_node_is_zero() {
        let g = graph(3, &[(0, 1, 0.9)]);
        assert_eq!(node_strength(&g, "b2").unwrap(), 0.0);
    }

    #[test]
    fn strength_drops_by_removed_edge_weight() {
        let g = graph(3, &[(0, 1, 0.4), (0, 2, 0.25)]);
        let before = node_strength(&g, "b0").unwrap();
        let g2 = graph(3, &[(0, 1, 0.4)]);
        let after = node_strength(&g2, "b0").unwrap();
        assert!((before - after - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unknown_node_is_an_error() {
        let g = graph(2, &[(0, 1, 1.0)]);
        assert!(matches!(
            node_strength(&g, "nope"),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            clustering_coefficient(&g, "nope"),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn clustering_on_small_motifs() {
        // Triangle.
        let tri = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        assert_eq!(clustering_coefficient(&tri, "b0").unwrap(), 1.0);
        // Middle of a path.
        let path = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(clustering_coefficient(&path, "b1").unwrap(), 0.0);
        // Degree < 2.
        assert_eq!(clustering_coefficient(&path, "b0").unwrap(), 0.0);
        // Hub of a 4-clique.
        let clique = graph(
            4,
            &[
                (0, 1, 1.0),
                (0, 2, 1.0),
                (0, 3, 1.0),
                (1, 2, 1.0),
                (1, 3, 1.0),
                (2, 3, 1.0),
            ],
        );
        assert_eq!(clustering_coefficient(&clique, "b0").unwrap(), 1.0);
    }

    #[test]
    fn clustering_ignores_weights() {
        let a = graph(3, &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, 0.9)]);
        let b = graph(3, &[(0, 1, 0.1), (1, 2, 0.5), (0, 2, 0.7)]);
        assert_eq!(
            clustering_coefficient(&a, "b0").unwrap(),
            clustering_coefficient(&b, "b0").unwrap()
        );
    }

    #[test]
    fn perfect_linear_relationships() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let test = pearson_with_test(&x, &y, 0.05).unwrap();
        assert_eq!(test.r, 1.0);
        assert_eq!(test.p_value, 0.0);
        assert!(test.significant);

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let test = pearson_with_test(&x, &neg, 0.05).unwrap();
        assert_eq!(test.r, -1.0);
    }

    #[test]
    fn hand_computed_five_point_fixture() {
        // x = 1..5, y = (2, 1, 4, 3, 7): r = 12 / sqrt(10 * 21.2).
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0];
        let test = pearson_with_test(&x, &y, 0.05).unwrap();
        assert!((test.r - 0.8241633836921341).abs() < 1e-12);
        assert!((test.p_value - 0.08613863131395952).abs() < 1e-9);
        assert!(!test.significant);
        assert_eq!(test.n, 5);
    }

    #[test]
    fn pearson_error_paths() {
        assert!(matches!(
            pearson_with_test(&[1.0, 2.0], &[2.0, 4.0], 0.05),
            Err(Error::InsufficientSample { n: 2, min: 3 })
        ));
        assert!(matches!(
            pearson_with_test(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 0.05),
            Err(Error::ConstantSeries(_))
        ));
    }

    #[test]
    fn pearson_affine_invariance() {
        let x = [0.3, 1.7, -0.4, 2.2, 0.9, -1.3];
        let y = [1.1, 0.2, 0.7, 2.5, -0.6, 0.4];
        let base = pearson_with_test(&x, &y, 0.05).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| 4.0 * v + 10.0).collect();
        let same = pearson_with_test(&shifted, &y, 0.05).unwrap();
        assert!((base.r - same.r).abs() < 1e-12);
        let flipped: Vec<f64> = x.iter().map(|v| -2.0 * v).collect();
        let neg = pearson_with_test(&flipped, &y, 0.05).unwrap();
        assert!((base.r + neg.r).abs() < 1e-12);
    }

    fn indicator(bank: &str, roa: Option<f64>, leverage: Option<f64>, size: f64) -> EconIndicators {
        EconIndicators {
            bank_id: bank.to_string(),
            roa,
            leverage,
            size: Some(size),
        }
    }

    #[test]
    fn yearly_series_joins_pairwise() {
        let metrics = vec![
            NodeMetrics {
                bank_id: "a".into(),
                strength: 1.0,
                clustering: 0.0,
            },
            NodeMetrics {
                bank_id: "b".into(),
                strength: 2.0,
                clustering: 0.5,
            },
            NodeMetrics {
                bank_id: "c".into(),
                strength: 3.0,
                clustering: 1.0,
            },
            NodeMetrics {
                bank_id: "d".into(),
                strength: 4.0,
                clustering: 0.25,
            },
        ];
        // Bank d misses leverage: the (strength, leverage) pair uses 3 banks
        // while (strength, size) uses all 4.
        let indicators = vec![
            indicator("a", Some(0.01), Some(0.9), 10.0),
            indicator("b", Some(0.02), Some(0.8), 20.0),
            indicator("c", Some(0.03), Some(0.7), 30.0),
            indicator("d", Some(0.04), None, 40.0),
        ];
        let years = vec![(2005, metrics, indicators)];
        let series = yearly_correlation_series(
            &years,
            &[
                (MetricName::Strength, IndicatorName::Leverage),
                (MetricName::Strength, IndicatorName::Size),
            ],
            0.05,
        );
        assert_eq!(series.points.len(), 2);
        assert_eq!(series.points[0].n, 3);
        assert_eq!(series.points[0].r, -1.0);
        assert_eq!(series.points[1].n, 4);
        assert_eq!(series.points[1].r, 1.0);
    }

    #[test]
    fn yearly_series_skips_with_reason() {
        let metrics = vec![
            NodeMetrics {
                bank_id: "a".into(),
                strength: 1.0,
                clustering: 0.0,
            },
            NodeMetrics {
                bank_id: "b".into(),
                strength: 2.0,
                clustering: 0.0,
            },
            NodeMetrics {
                bank_id: "c".into(),
                strength: 3.0,
                clustering: 0.0,
            },
        ];
        let indicators = vec![
            indicator("a", Some(0.01), None, 10.0),
            indicator("b", Some(0.02), None, 20.0),
            indicator("c", Some(0.03), None, 30.0),
        ];
        let years = vec![(2005, metrics, indicators)];
        let series = yearly_correlation_series(
            &years,
            &[
                (MetricName::Strength, IndicatorName::Leverage),
                (MetricName::Clustering, IndicatorName::Roa),
            ],
            0.05,
        );
        assert!(series.points.is_empty());
        assert_eq!(series.skipped.len(), 2);
        assert!(series.skipped[0].reason.contains("at least"));
        assert!(series.skipped[1].reason.contains("constant"));
    }

    #[test]
    fn econ_indicators_from_panels() {
        use std::collections::BTreeMap as Map;
        let codes = IndicatorCodes::default();
        let mk = |bank: &str, vars: &[(&str, f64)]| crate::ingest::BankPanel {
            bank_id: bank.to_string(),
            country: None,
            years: Map::from([(
                2005,
                vars.iter().map(|(c, v)| (c.to_string(), *v)).collect(),
            )]),
            quality_ratio: 1.0,
            statement_dates: vec![chrono::NaiveDate::from_ymd_opt(2005, 12, 31).unwrap()],
        };
        let panels = vec![
            mk(
                "a",
                &[("TOTAL_ASSETS", 200.0), ("NET_INCOME", 10.0), ("TOTAL_DEBTS", 150.0)],
            ),
            mk("b", &[("TOTAL_ASSETS", 100.0), ("NET_INCOME", -5.0)]),
            mk("neg", &[("TOTAL_ASSETS", -1.0), ("NET_INCOME", 1.0)]),
        ];
        let out = econ_indicators(&panels, 2005, &codes);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].bank_id, "a");
        assert_eq!(out[0].roa, Some(0.05));
        assert_eq!(out[0].leverage, Some(0.75));
        assert_eq!(out[0].size, Some(200.0));
        assert_eq!(out[1].leverage, None);
        assert_eq!(out[1].roa, Some(-0.05));
    }
}
