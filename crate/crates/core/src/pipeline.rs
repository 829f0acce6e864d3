//! Stage orchestration and report emission.
//!
//! Each stage consumes the previous stage's files, so running stages one at
//! a time and running the whole pipeline go through the same code path and
//! produce identical bytes. All report files are written via a temp file and
//! an atomic rename.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::community::threshold_sweep;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, popular_variables, FeatureMatrix};
use crate::ingest::{self, BankPanel, ParseIssue};
use crate::netmetrics::{default_pairs, econ_indicators, node_metrics, yearly_correlation_series};
use crate::pca::{fit_scaled_pca, measure_contributions, period_rankings};
use crate::simgraph::{build_graph, prune, SimEdge, SimilarityGraph};
use crate::synthgen::{self, SyntheticSpec};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const GRAPH_INDEX_FILE: &str = "graph_index.csv";
pub const PARTITIONS_FILE: &str = "partitions.csv";
pub const PARTITION_SUMMARY_FILE: &str = "partition_summary.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const PCA_RANKINGS_FILE: &str = "pca_rankings.csv";
pub const QR_SWEEP_FILE: &str = "qr_sweep.csv";
pub const GENERATED_INPUT_FILE: &str = "input.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Name of the derived return-on-assets measure in PCA reports.
pub const ROA_MEASURE: &str = "ROA";
/// Name of the derived leverage measure in PCA reports.
pub const LEVERAGE_MEASURE: &str = "DEBT_TO_ASSETS";

pub fn nodes_file(year: i32) -> String {
    format!("nodes_{year}.csv")
}

pub fn edges_file(year: i32) -> String {
    format!("edges_{year}.tsv")
}

pub fn features_file(year: i32) -> String {
    format!("features_{year}.csv")
}

// ---------------------------------------------------------------------------
// small IO helpers

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(delimiter: u8, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(Vec::new());
    writer
        .write_record(header)
        .and_then(|_| rows.iter().try_for_each(|row| writer.write_record(row)))
        .map_err(|e| Error::Internal(format!("csv encoding: {e}")))?;
    writer
        .into_inner()
        .map_err(|e| Error::Internal(format!("csv encoding: {e}")))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, &csv_bytes(b',', header, rows)?)
}

fn open_csv(path: &Path, delimiter: u8) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(file))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        Error::Validation(format!(
            "{}: cannot parse {field} from '{value}'",
            path.display()
        ))
    })
}

// ---------------------------------------------------------------------------
// shared preparation

struct PreparedPanels {
    /// Panels before the quality filter (the sweep re-filters per threshold).
    all_panels: Vec<BankPanel>,
    /// Panels passing the configured quality and continuity filters.
    filtered: Vec<BankPanel>,
    warnings: Vec<String>,
}

fn prepare(cfg: &PipelineConfig) -> Result<PreparedPanels> {
    let (records, issues) = ingest::read_records(&cfg.input)?;
    if !issues.is_empty() {
        let shown: Vec<String> = issues.iter().take(5).map(ParseIssue::to_string).collect();
        let more = if issues.len() > 5 { "; ..." } else { "" };
        return Err(Error::Validation(format!(
            "{}: {} rejected row(s): {}{more}",
            cfg.input.display(),
            issues.len(),
            shown.join("; ")
        )));
    }
    let mut warnings = Vec::new();
    if cfg
        .redundant_codes
        .contains(&cfg.indicator_codes.total_assets)
    {
        warnings.push(format!(
            "size proxy '{}' listed among redundant codes; retained for normalization",
            cfg.indicator_codes.total_assets
        ));
    }
    let records = ingest::drop_redundant_variables(
        records,
        &cfg.redundant_codes,
        &cfg.indicator_codes.total_assets,
    );
    let retained_codes: BTreeSet<String> =
        records.iter().map(|r| r.variable_code.clone()).collect();
    let (all_panels, mut panel_warnings) = ingest::build_panels(&records, &cfg.filter, &retained_codes)?;
    warnings.append(&mut panel_warnings);
    let filtered = ingest::filter_banks(all_panels.clone(), &cfg.filter);
    if filtered.is_empty() {
        warnings.push(
            "no banks pass the quality and continuity filters; reports will be empty".to_string(),
        );
    }
    Ok(PreparedPanels {
        all_panels,
        filtered,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// graph artifacts

fn write_graph(
    out_dir: &Path,
    graph: &SimilarityGraph,
    countries: &BTreeMap<String, Option<String>>,
) -> Result<()> {
    let node_rows: Vec<Vec<String>> = graph
        .nodes
        .iter()
        .map(|bank| {
            let country = countries.get(bank).and_then(|c| c.clone()).unwrap_or_default();
            vec![bank.clone(), country]
        })
        .collect();
    write_csv(
        &out_dir.join(nodes_file(graph.year)),
        &["bank_id", "country"],
        &node_rows,
    )?;

    let edge_rows: Vec<Vec<String>> = graph
        .edges
        .iter()
        .map(|e| {
            vec![
                graph.nodes[e.src].clone(),
                graph.nodes[e.dst].clone(),
                fmt(e.cosine),
                fmt(e.weight),
                e.significant.to_string(),
            ]
        })
        .collect();
    let bytes = csv_bytes(
        b'\t',
        &["src_bank", "dst_bank", "cosine", "weight", "significant"],
        &edge_rows,
    )?;
    write_atomic(&out_dir.join(edges_file(graph.year)), &bytes)
}

fn load_graph(out_dir: &Path, year: i32) -> Result<SimilarityGraph> {
    let nodes_path = out_dir.join(nodes_file(year));
    let mut nodes = Vec::new();
    for record in open_csv(&nodes_path, b',')?.records() {
        let record = record.map_err(|e| Error::Validation(format!("{}: {e}", nodes_path.display())))?;
        nodes.push(record.get(0).unwrap_or("").to_string());
    }
    let index: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let edges_path = out_dir.join(edges_file(year));
    let mut edges = Vec::new();
    for record in open_csv(&edges_path, b'\t')?.records() {
        let record = record.map_err(|e| Error::Validation(format!("{}: {e}", edges_path.display())))?;
        let lookup = |field: usize| -> Result<usize> {
            let id = record.get(field).unwrap_or("");
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownNode(id.to_string()))
        };
        let a = lookup(0)?;
        let b = lookup(1)?;
        if a == b {
            return Err(Error::Validation(format!(
                "{}: self-loop on '{}'",
                edges_path.display(),
                nodes[a]
            )));
        }
        let cosine: f64 = parse_field(&edges_path, "cosine", record.get(2).unwrap_or(""))?;
        let weight: f64 = parse_field(&edges_path, "weight", record.get(3).unwrap_or(""))?;
        let expected = crate::simgraph::metric_weight(cosine)?;
        if (weight - expected).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "{}: weight {weight} inconsistent with cosine {cosine}",
                edges_path.display()
            )));
        }
        let significant = match record.get(4).unwrap_or("") {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Validation(format!(
                    "{}: cannot parse significant from '{other}'",
                    edges_path.display()
                )))
            }
        };
        edges.push(SimEdge {
            src: a.min(b),
            dst: a.max(b),
            cosine,
            weight,
            significant,
        });
    }
    Ok(SimilarityGraph { year, nodes, edges })
}

/// Per-year graph sizes, as recorded by the build-graphs stage.
#[derive(Debug, Clone, PartialEq)]
pub struct YearGraphStats {
    pub year: i32,
    pub nodes: usize,
    pub edges: usize,
}

fn read_graph_index(out_dir: &Path) -> Result<Vec<YearGraphStats>> {
    let path = out_dir.join(GRAPH_INDEX_FILE);
    let mut stats = Vec::new();
    for record in open_csv(&path, b',')?.records() {
        let record = record.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        stats.push(YearGraphStats {
            year: parse_field(&path, "year", record.get(0).unwrap_or(""))?,
            nodes: parse_field(&path, "nodes", record.get(1).unwrap_or(""))?,
            edges: parse_field(&path, "edges", record.get(2).unwrap_or(""))?,
        });
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// stages

#[derive(Debug, Clone)]
pub struct BuildGraphsSummary {
    pub banks_retained: usize,
    pub years: Vec<YearGraphStats>,
    pub warnings: Vec<String>,
}

/// Ingest, filter, build per-year significance-tested graphs, and write the
/// node/edge artifacts plus the graph index.
pub fn stage_build_graphs(cfg: &PipelineConfig) -> Result<BuildGraphsSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let prep = prepare(cfg)?;
    let mut warnings = prep.warnings.clone();
    let countries: BTreeMap<String, Option<String>> = prep
        .filtered
        .iter()
        .map(|p| (p.bank_id.clone(), p.country.clone()))
        .collect();

    let mut years = Vec::new();
    for year in cfg.filter.sample_years() {
        let matrix = build_feature_matrix(
            &prep.filtered,
            year,
            &cfg.indicator_codes.total_assets,
            false,
        );
        if matrix.n_banks() < 2 {
            if !prep.filtered.is_empty() {
                warnings.push(format!(
                    "year {year}: fewer than 2 banks with usable statements; no graph"
                ));
            }
            continue;
        }
        let graph = build_graph(&matrix, cfg.mc_samples, cfg.alpha, cfg.rng_seed)?;
        write_graph(&cfg.out_dir, &graph, &countries)?;
        if cfg.dump_features {
            let mut header = vec!["bank_id".to_string()];
            header.extend(matrix.variable_codes.iter().cloned());
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = matrix
                .bank_ids
                .iter()
                .zip(&matrix.rows)
                .map(|(bank, row)| {
                    let mut out = vec![bank.clone()];
                    out.extend(row.iter().map(|v| fmt(*v)));
                    out
                })
                .collect();
            write_csv(&cfg.out_dir.join(features_file(year)), &header_refs, &rows)?;
        }
        years.push(YearGraphStats {
            year,
            nodes: graph.nodes.len(),
            edges: graph.edges.len(),
        });
    }
    let index_rows: Vec<Vec<String>> = years
        .iter()
        .map(|y| vec![y.year.to_string(), y.nodes.to_string(), y.edges.to_string()])
        .collect();
    write_csv(
        &cfg.out_dir.join(GRAPH_INDEX_FILE),
        &["year", "nodes", "edges"],
        &index_rows,
    )?;
    Ok(BuildGraphsSummary {
        banks_retained: prep.filtered.len(),
        years,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunitySummaryRow {
    pub year: i32,
    pub threshold: f64,
    pub modularity: f64,
    pub n_communities: usize,
    pub largest_component_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct CommunitiesSummary {
    pub rows: Vec<CommunitySummaryRow>,
    pub warnings: Vec<String>,
}

/// Relabel communities so ids are comparable across years: largest first,
/// ties broken by the smallest member bank id.
fn relabel_by_size(assignment: &[usize], nodes: &[String]) -> Vec<usize> {
    let n_comm = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; n_comm];
    let mut min_member: Vec<&str> = vec![""; n_comm];
    for (node, &c) in assignment.iter().enumerate() {
        size[c] += 1;
        let id = nodes[node].as_str();
        if min_member[c].is_empty() || id < min_member[c] {
            min_member[c] = id;
        }
    }
    let mut order: Vec<usize> = (0..n_comm).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then_with(|| min_member[a].cmp(min_member[b])));
    let mut relabel = vec![0usize; n_comm];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    assignment.iter().map(|&c| relabel[c]).collect()
}

/// Run the pruning-threshold sweep and Louvain on every built graph, and
/// write partition assignments plus the per-threshold summary.
pub fn stage_communities(cfg: &PipelineConfig) -> Result<CommunitiesSummary> {
    cfg.validate()?;
    let index = read_graph_index(&cfg.out_dir)?;
    let mut partition_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut warnings = Vec::new();
    for stats in &index {
        let graph = load_graph(&cfg.out_dir, stats.year)?;
        for entry in threshold_sweep(&graph, &cfg.prune_thresholds, cfg.rng_seed)? {
            if entry.fragmented {
                warnings.push(format!(
                    "year {} threshold {}: largest component covers {:.1}% of nodes",
                    stats.year,
                    entry.threshold,
                    entry.largest_component_fraction * 100.0
                ));
            }
            let labels = relabel_by_size(&entry.partition.assignment, &graph.nodes);
            for (node, bank) in graph.nodes.iter().enumerate() {
                partition_rows.push(vec![
                    stats.year.to_string(),
                    fmt(entry.threshold),
                    bank.clone(),
                    labels[node].to_string(),
                ]);
            }
            summary_rows.push(CommunitySummaryRow {
                year: stats.year,
                threshold: entry.threshold,
                modularity: entry.partition.modularity,
                n_communities: entry.partition.n_communities(),
                largest_component_fraction: entry.largest_component_fraction,
            });
        }
    }
    write_csv(
        &cfg.out_dir.join(PARTITIONS_FILE),
        &["year", "threshold", "bank_id", "community_id"],
        &partition_rows,
    )?;
    let rows: Vec<Vec<String>> = summary_rows
        .iter()
        .map(|r| {
            vec![
                r.year.to_string(),
                fmt(r.threshold),
                fmt(r.modularity),
                r.n_communities.to_string(),
                fmt(r.largest_component_fraction),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_dir.join(PARTITION_SUMMARY_FILE),
        &[
            "year",
            "threshold",
            "modularity",
            "n_communities",
            "largest_component_fraction",
        ],
        &rows,
    )?;
    Ok(CommunitiesSummary {
        rows: summary_rows,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct CorrelationsSummary {
    pub points: usize,
    pub warnings: Vec<String>,
}

/// Correlate node metrics on the pruned graphs with per-bank economic
/// indicators, year by year.
pub fn stage_correlations(cfg: &PipelineConfig) -> Result<CorrelationsSummary> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let index = read_graph_index(&cfg.out_dir)?;
    let mut warnings = prep.warnings.clone();
    let mut data = Vec::new();
    for stats in &index {
        let graph = load_graph(&cfg.out_dir, stats.year)?;
        let pruned = prune(&graph, cfg.primary_threshold());
        let metrics = node_metrics(&pruned);
        let indicators = econ_indicators(&prep.filtered, stats.year, &cfg.indicator_codes);
        data.push((stats.year, metrics, indicators));
    }
    let series = yearly_correlation_series(&data, &default_pairs(), cfg.alpha);
    for skip in &series.skipped {
        warnings.push(format!(
            "correlation {} vs {} in {} skipped: {}",
            skip.x_name, skip.y_name, skip.year, skip.reason
        ));
    }
    let rows: Vec<Vec<String>> = series
        .points
        .iter()
        .map(|p| {
            vec![
                p.year.to_string(),
                p.x_name.clone(),
                p.y_name.clone(),
                fmt(p.r),
                fmt(p.p_value),
                p.n.to_string(),
                p.significant.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_dir.join(CORRELATIONS_FILE),
        &["year", "x_name", "y_name", "r", "p_value", "n", "significant"],
        &rows,
    )?;
    Ok(CorrelationsSummary {
        points: series.points.len(),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct PcaSummary {
    pub fits: usize,
    pub rankings: usize,
    pub warnings: Vec<String>,
}

/// Characterize each year's communities by scaled PCA over the popular
/// measures plus derived ratios, then rank contributions per sub-period.
pub fn stage_pca(cfg: &PipelineConfig) -> Result<PcaSummary> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let mut warnings = prep.warnings.clone();

    // Community membership per year at the primary threshold.
    let partitions_path = cfg.out_dir.join(PARTITIONS_FILE);
    let mut members: BTreeMap<(i32, usize), Vec<String>> = BTreeMap::new();
    let mut any_row = false;
    let mut primary_seen = false;
    for record in open_csv(&partitions_path, b',')?.records() {
        let record =
            record.map_err(|e| Error::Validation(format!("{}: {e}", partitions_path.display())))?;
        any_row = true;
        let threshold: f64 = parse_field(&partitions_path, "threshold", record.get(1).unwrap_or(""))?;
        if threshold != cfg.primary_threshold() {
            continue;
        }
        primary_seen = true;
        let year: i32 = parse_field(&partitions_path, "year", record.get(0).unwrap_or(""))?;
        let community: usize =
            parse_field(&partitions_path, "community_id", record.get(3).unwrap_or(""))?;
        members
            .entry((year, community))
            .or_default()
            .push(record.get(2).unwrap_or("").to_string());
    }
    if any_row && !primary_seen {
        return Err(Error::Validation(format!(
            "{} has no rows at prune threshold {}; re-run the communities stage with a matching \
             prune list",
            partitions_path.display(),
            cfg.primary_threshold()
        )));
    }

    // Measure universe: popular variables (raw values) plus derived ratios
    // and the size aggregate.
    let ta_code = cfg.indicator_codes.total_assets.clone();
    let matrices: Vec<FeatureMatrix> = cfg
        .filter
        .sample_years()
        .map(|year| build_feature_matrix(&prep.filtered, year, &ta_code, false))
        .filter(|m| m.n_banks() > 0)
        .collect();
    let popular = popular_variables(&matrices, cfg.presence_fraction)?;
    let mut measures: Vec<String> = popular.into_iter().collect();
    for derived in [ROA_MEASURE.to_string(), LEVERAGE_MEASURE.to_string(), ta_code.clone()] {
        if !measures.contains(&derived) {
            measures.push(derived);
        }
    }

    let panels_by_id: BTreeMap<&str, &BankPanel> = prep
        .filtered
        .iter()
        .map(|p| (p.bank_id.as_str(), p))
        .collect();

    let mut yearly: BTreeMap<(usize, i32), BTreeMap<String, f64>> = BTreeMap::new();
    let mut fits = 0usize;
    for ((year, community), bank_ids) in &members {
        if bank_ids.len() < 2 {
            warnings.push(format!(
                "community {community} in {year} has fewer than 2 members; PCA skipped"
            ));
            continue;
        }
        let mut rows = Vec::with_capacity(bank_ids.len());
        for bank in bank_ids {
            let Some(panel) = panels_by_id.get(bank.as_str()) else {
                return Err(Error::Validation(format!(
                    "{}: bank '{bank}' is not in the filtered panel; artifacts out of sync",
                    partitions_path.display()
                )));
            };
            let vars = &panel.years[year];
            let ta = vars[&ta_code];
            let row: Vec<f64> = measures
                .iter()
                .map(|measure| match measure.as_str() {
                    ROA_MEASURE => vars
                        .get(&cfg.indicator_codes.net_income)
                        .map_or(0.0, |v| v / ta),
                    LEVERAGE_MEASURE => vars
                        .get(&cfg.indicator_codes.total_debts)
                        .map_or(0.0, |v| v / ta),
                    code => vars.get(code).copied().unwrap_or(0.0),
                })
                .collect();
            rows.push(row);
        }
        match fit_scaled_pca(&rows, &measures) {
            Ok(mut model) => {
                if model.retained == 0 {
                    warnings.push(format!(
                        "community {community} in {year}: no eigenvalue above 1; retaining the \
                         first component"
                    ));
                    model.retain_at_least_one();
                }
                let contributions = measure_contributions(&model)?;
                yearly.insert((*community, *year), contributions);
                fits += 1;
            }
            Err(Error::InsufficientData(why)) => {
                warnings.push(format!(
                    "community {community} in {year}: PCA skipped ({why})"
                ));
            }
            Err(e) => return Err(e),
        }
    }

    let report = period_rankings(&yearly, &cfg.periods)?;
    warnings.extend(report.skipped.iter().cloned());
    let mut rows = Vec::new();
    for ranking in &report.rankings {
        for (kind, list) in [("top", &ranking.top3), ("bottom", &ranking.bottom3)] {
            for (rank, (code, value)) in list.iter().enumerate() {
                rows.push(vec![
                    ranking.community_id.to_string(),
                    ranking.period.clone(),
                    kind.to_string(),
                    (rank + 1).to_string(),
                    code.clone(),
                    fmt(*value),
                ]);
            }
        }
    }
    write_csv(
        &cfg.out_dir.join(PCA_RANKINGS_FILE),
        &[
            "community_id",
            "period",
            "rank_type",
            "rank",
            "measure_code",
            "mean_contribution",
        ],
        &rows,
    )?;
    Ok(PcaSummary {
        fits,
        rankings: report.rankings.len(),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct SweepQrSummary {
    pub rows: usize,
    pub warnings: Vec<String>,
}

/// Node/edge counts per year for each quality-ratio threshold.
pub fn stage_sweep_qr(cfg: &PipelineConfig) -> Result<SweepQrSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let prep = prepare(cfg)?;
    let ta_code = &cfg.indicator_codes.total_assets;
    let rows = ingest::qr_sweep(
        &prep.all_panels,
        &cfg.qr_sweep_thresholds,
        &cfg.filter,
        |banks, year| {
            let matrix = build_feature_matrix(banks, year, ta_code, false);
            if matrix.n_banks() < 2 {
                return Ok((matrix.n_banks(), 0));
            }
            let graph = build_graph(&matrix, cfg.mc_samples, cfg.alpha, cfg.rng_seed)?;
            Ok((graph.nodes.len(), graph.edges.len()))
        },
    )?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.qr_threshold),
                r.year.to_string(),
                r.nodes.to_string(),
                r.edges.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_dir.join(QR_SWEEP_FILE),
        &["qr_threshold", "year", "nodes", "edges"],
        &csv_rows,
    )?;
    Ok(SweepQrSummary {
        rows: rows.len(),
        warnings: prep.warnings,
    })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub build: BuildGraphsSummary,
    pub communities: CommunitiesSummary,
    pub correlations: CorrelationsSummary,
    pub pca: PcaSummary,
    pub sweep: SweepQrSummary,
    pub manifest_path: PathBuf,
}

impl RunReport {
    pub fn all_warnings(&self) -> Vec<&String> {
        self.build
            .warnings
            .iter()
            .chain(&self.communities.warnings)
            .chain(&self.correlations.warnings)
            .chain(&self.pca.warnings)
            .chain(&self.sweep.warnings)
            .collect()
    }
}

/// Run every stage in order and write the manifest. Reruns with the same
/// inputs and seed produce byte-identical files.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let build = stage_build_graphs(cfg)?;
    let communities = stage_communities(cfg)?;
    let correlations = stage_correlations(cfg)?;
    let pca = stage_pca(cfg)?;
    let sweep = stage_sweep_qr(cfg)?;

    let mut manifest = String::new();
    manifest.push_str("# run manifest; replay with: acctnet run --config <this file>\n");
    for (key, value) in cfg.to_key_values() {
        manifest.push_str(&format!("{key} = {value}\n"));
    }
    manifest.push_str("# ---- run summary ----\n");
    manifest.push_str(&format!("# banks_retained = {}\n", build.banks_retained));
    for y in &build.years {
        manifest.push_str(&format!(
            "# year {}: nodes={} edges={}\n",
            y.year, y.nodes, y.edges
        ));
    }
    for row in &communities.rows {
        manifest.push_str(&format!(
            "# communities year {} threshold {}: n={} modularity={}\n",
            row.year,
            fmt(row.threshold),
            row.n_communities,
            fmt(row.modularity)
        ));
    }
    manifest.push_str(&format!("# correlation_points = {}\n", correlations.points));
    manifest.push_str(&format!(
        "# pca_fits = {} rankings = {}\n",
        pca.fits, pca.rankings
    ));
    manifest.push_str(&format!("# qr_sweep_rows = {}\n", sweep.rows));
    let report = RunReport {
        build,
        communities,
        correlations,
        pca,
        sweep,
        manifest_path: cfg.out_dir.join(MANIFEST_FILE),
    };
    let warnings = report.all_warnings();
    if warnings.is_empty() {
        manifest.push_str("# warnings: none\n");
    } else {
        manifest.push_str(&format!("# warnings ({}):\n", warnings.len()));
        for w in &warnings {
            manifest.push_str(&format!("# - {w}\n"));
        }
    }
    write_atomic(&report.manifest_path, manifest.as_bytes())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// auxiliary stages

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub n_records: usize,
    pub n_banks: usize,
    pub issues: Vec<ParseIssue>,
}

/// Validate an input file and report every rejected row.
pub fn ingest_check(input: &Path) -> Result<IngestReport> {
    let (records, issues) = ingest::read_records(input)?;
    let banks: BTreeSet<&str> = records.iter().map(|r| r.bank_id.as_str()).collect();
    Ok(IngestReport {
        n_records: records.len(),
        n_banks: banks.len(),
        issues,
    })
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub input_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub n_records: usize,
    pub n_banks: usize,
}

/// Generate a synthetic panel in the ingest input format plus the
/// ground-truth sidecar.
pub fn stage_generate(spec: &SyntheticSpec, out_dir: &Path) -> Result<GenerateSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (records, truth) = synthgen::generate(spec)?;
    let record_rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.bank_id.clone(),
                r.country.clone().unwrap_or_default(),
                r.statement_date.format("%Y-%m-%d").to_string(),
                r.variable_code.clone(),
                fmt(r.value),
            ]
        })
        .collect();
    let input_path = out_dir.join(GENERATED_INPUT_FILE);
    write_csv(
        &input_path,
        &["bank_id", "country", "statement_date", "variable_code", "value"],
        &record_rows,
    )?;
    let truth_rows: Vec<Vec<String>> = truth
        .iter()
        .map(|t| {
            vec![
                t.bank_id.clone(),
                t.group.to_string(),
                fmt(t.quality_ratio),
            ]
        })
        .collect();
    let ground_truth_path = out_dir.join(GROUND_TRUTH_FILE);
    write_csv(&ground_truth_path, &["bank_id", "group", "qr"], &truth_rows)?;
    Ok(GenerateSummary {
        input_path,
        ground_truth_path,
        n_records: records.len(),
        n_banks: truth.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_orders_by_size_then_member() {
        let nodes: Vec<String> = ["d", "c", "b", "a"].iter().map(|s| s.to_string()).collect();
        // Community 0 = {d}, community 1 = {c, b, a}.
        let labels = relabel_by_size(&[0, 1, 1, 1], &nodes);
        assert_eq!(labels, vec![1, 0, 0, 0]);
        // Equal sizes: smallest member id wins.
        let labels = relabel_by_size(&[0, 0, 1, 1], &nodes);
        assert_eq!(labels, vec![1, 1, 0, 0]);
    }

    #[test]
    fn graph_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let graph = SimilarityGraph {
            year: 2005,
            nodes: vec!["alpha".into(), "beta".into(), "gamma, inc".into()],
            edges: vec![
                SimEdge {
                    src: 0,
                    dst: 1,
                    cosine: 0.8,
                    weight: crate::simgraph::metric_weight(0.8).unwrap(),
                    significant: true,
                },
                SimEdge {
                    src: 1,
                    dst: 2,
                    cosine: -0.25,
                    weight: crate::simgraph::metric_weight(-0.25).unwrap(),
                    significant: true,
                },
            ],
        };
        let countries: BTreeMap<String, Option<String>> =
            [("alpha".to_string(), Some("US".to_string()))].into();
        write_graph(dir.path(), &graph, &countries).unwrap();
        let loaded = load_graph(dir.path(), 2005).unwrap();
        assert_eq!(loaded.nodes, graph.nodes);
        assert_eq!(loaded.edges.len(), graph.edges.len());
        for (a, b) in loaded.edges.iter().zip(&graph.edges) {
            assert_eq!(a.cosine, b.cosine);
            assert_eq!(a.weight, b.weight);
        }
    }

    #[test]
    fn missing_index_is_a_prerequisite_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_graph_index(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, b"hello").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
