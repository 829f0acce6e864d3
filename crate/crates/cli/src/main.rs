//! Command-line driver: configuration layering, stage dispatch, and exit
//! codes (0 success, 1 validation, 2 I/O, 3 internal invariant breach).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acctnet::config::{parse_float_list, parse_periods, ConfigOverrides};
use acctnet::error::ErrorCategory;
use acctnet::pipeline;
use acctnet::synthgen::SyntheticSpec;
use acctnet::{Error, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "acctnet",
    version,
    about = "Build and analyze similarity networks over financial-statement panels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage: graphs, communities, correlations, PCA, QR sweep
    Run(PipelineArgs),
    /// Validate an input file and list rejected rows
    IngestCheck {
        /// Input statement CSV
        #[arg(long)]
        input: PathBuf,
    },
    /// Build per-year significance-tested similarity graphs
    BuildGraphs(PipelineArgs),
    /// Detect communities on previously built graphs
    Communities(PipelineArgs),
    /// Correlate network metrics with economic indicators
    Correlations(PipelineArgs),
    /// Rank measure contributions per community and sub-period
    Pca(PipelineArgs),
    /// Report node/edge counts across quality-ratio thresholds
    SweepQr(PipelineArgs),
    /// Generate a synthetic panel with planted groups
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Input statement CSV (bank_id,country,statement_date,variable_code,value)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for report files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value config file; flags given here win over file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Quality-ratio threshold
    #[arg(long)]
    qr: Option<f64>,
    /// Minimum number of annual statements per bank
    #[arg(long)]
    min_statements: Option<usize>,
    /// Maximum days between consecutive statements
    #[arg(long)]
    max_gap_days: Option<i64>,
    /// Monte Carlo permutations per link test
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Significance level for link and correlation tests
    #[arg(long)]
    alpha: Option<f64>,
    /// Prune threshold, or a comma list for a sweep (first entry is primary)
    #[arg(long)]
    prune: Option<String>,
    /// Presence fraction for the popular-measure selection
    #[arg(long)]
    presence: Option<f64>,
    /// Comma list of START-END periods, e.g. 2001-2006,2007-2009,2010-2013
    #[arg(long)]
    periods: Option<String>,
    /// Root RNG seed; all randomness derives from it
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct GenerateArgs {
    /// Directory for input.csv and ground_truth.csv
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    banks: usize,
    #[arg(long, default_value_t = 3)]
    groups: usize,
    /// Ratio variables per bank (the size proxy is emitted on top)
    #[arg(long, default_value_t = 20)]
    variables: usize,
    #[arg(long, default_value_t = 2001)]
    start_year: i32,
    #[arg(long, default_value_t = 2013)]
    end_year: i32,
    /// Within-group noise scale
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Between-group template separation
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    /// Probability that any observation is dropped
    #[arg(long, default_value_t = 0.02)]
    missing: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn resolve_config(args: &PipelineArgs) -> Result<PipelineConfig, Error> {
    let overrides = ConfigOverrides {
        input: args.input.clone(),
        out_dir: args.out.clone(),
        qr_threshold: args.qr,
        min_statements: args.min_statements,
        max_gap_days: args.max_gap_days,
        mc_samples: args.mc_samples,
        alpha: args.alpha,
        prune_thresholds: args
            .prune
            .as_deref()
            .map(|s| parse_float_list(s).map_err(|e| Error::Config(format!("--prune: {e}"))))
            .transpose()?,
        presence_fraction: args.presence,
        periods: args
            .periods
            .as_deref()
            .map(|s| parse_periods(s).map_err(|e| Error::Config(format!("--periods: {e}"))))
            .transpose()?,
        rng_seed: args.seed,
    };
    PipelineConfig::resolve(args.config.as_deref(), &overrides)
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(command: &Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let cfg = resolve_config(args)?;
            let report = pipeline::run_pipeline(&cfg)?;
            println!(
                "retained {} banks; {} graph year(s); {} correlation point(s); {} PCA ranking(s); \
                 {} QR-sweep row(s)",
                report.build.banks_retained,
                report.build.years.len(),
                report.correlations.points,
                report.pca.rankings,
                report.sweep.rows
            );
            println!("manifest: {}", report.manifest_path.display());
            for w in report.all_warnings() {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::IngestCheck { input } => {
            let report = pipeline::ingest_check(input)?;
            for issue in &report.issues {
                println!("{issue}");
            }
            println!(
                "{}: {} valid record(s) across {} bank(s); {} rejected row(s)",
                input.display(),
                report.n_records,
                report.n_banks,
                report.issues.len()
            );
            if report.issues.is_empty() {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{} row(s) rejected",
                    report.issues.len()
                )))
            }
        }
        Command::BuildGraphs(args) => {
            let cfg = resolve_config(args)?;
            let summary = pipeline::stage_build_graphs(&cfg)?;
            println!("retained {} banks", summary.banks_retained);
            for y in &summary.years {
                println!("year {}: {} nodes, {} edges", y.year, y.nodes, y.edges);
            }
            print_warnings(&summary.warnings);
            Ok(())
        }
        Command::Communities(args) => {
            let cfg = resolve_config(args)?;
            let summary = pipeline::stage_communities(&cfg)?;
            for row in &summary.rows {
                println!(
                    "year {} threshold {}: {} communities, modularity {:.4}",
                    row.year, row.threshold, row.n_communities, row.modularity
                );
            }
            print_warnings(&summary.warnings);
            Ok(())
        }
        Command::Correlations(args) => {
            let cfg = resolve_config(args)?;
            let summary = pipeline::stage_correlations(&cfg)?;
            println!("{} correlation point(s) written", summary.points);
            print_warnings(&summary.warnings);
            Ok(())
        }
        Command::Pca(args) => {
            let cfg = resolve_config(args)?;
            let summary = pipeline::stage_pca(&cfg)?;
            println!(
                "{} PCA fit(s), {} ranking group(s) written",
                summary.fits, summary.rankings
            );
            print_warnings(&summary.warnings);
            Ok(())
        }
        Command::SweepQr(args) => {
            let cfg = resolve_config(args)?;
            let summary = pipeline::stage_sweep_qr(&cfg)?;
            println!("{} QR-sweep row(s) written", summary.rows);
            print_warnings(&summary.warnings);
            Ok(())
        }
        Command::Generate(args) => {
            let spec = SyntheticSpec {
                n_banks: args.banks,
                n_groups: args.groups,
                n_variables: args.variables,
                start_year: args.start_year,
                end_year: args.end_year,
                within_noise: args.noise,
                between_separation: args.separation,
                missing_rate: args.missing,
                rng_seed: args.seed,
                ..SyntheticSpec::default()
            };
            let summary = pipeline::stage_generate(&spec, &args.out)?;
            println!(
                "wrote {} record(s) for {} bank(s) to {}",
                summary.n_records,
                summary.n_banks,
                summary.input_path.display()
            );
            println!("ground truth: {}", summary.ground_truth_path.display());
            Ok(())
        }
    }
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::Run(_) => "run",
        Command::IngestCheck { .. } => "ingest-check",
        Command::BuildGraphs(_) => "build-graphs",
        Command::Communities(_) => "communities",
        Command::Correlations(_) => "correlations",
        Command::Pca(_) => "pca",
        Command::SweepQr(_) => "sweep-qr",
        Command::Generate(_) => "generate",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("acctnet {}: {e}", stage_name(&cli.command));
            ExitCode::from(match e.category() {
                ErrorCategory::Validation => 1u8,
                ErrorCategory::Io => 2u8,
                ErrorCategory::Internal => 3u8,
            })
        }
    }
}
