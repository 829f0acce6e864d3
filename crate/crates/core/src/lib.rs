//! acctnet builds similarity networks over banks' financial statements and
//! analyzes them: per-year feature matrices of size-normalized ratios,
//! significance-filtered cosine-similarity graphs, weighted-modularity
//! community detection, network-vs-indicator correlation tests, and PCA-based
//! community characterization. A deterministic synthetic generator provides
//! planted fixtures, and the pipeline module turns everything into report
//! files reproducible byte-for-byte from a seed.

pub mod community;
pub mod config;
pub mod error;
pub mod features;
pub mod ingest;
pub mod netmetrics;
pub mod pca;
pub mod pipeline;
pub mod simgraph;
pub mod synthgen;

pub use config::PipelineConfig;
pub use error::{Error, ErrorCategory, Result};
