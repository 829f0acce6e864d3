//! Similarity graphs: pairwise cosine similarity over feature rows, a
//! permutation test for link significance, the metric weight transform, and
//! threshold pruning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Slack allowed on |cosine| before it counts as a domain error.
pub const COSINE_DOMAIN_TOLERANCE: f64 = 1e-9;

/// An undirected edge; `src < dst` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEdge {
    pub src: usize,
    pub dst: usize,
    pub cosine: f64,
    pub weight: f64,
    pub significant: bool,
}

/// Weighted undirected similarity graph over one year's banks.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    pub year: i32,
    pub nodes: Vec<String>,
    /// Edges sorted by (src, dst); no self-loops.
    pub edges: Vec<SimEdge>,
}

impl SimilarityGraph {
    pub fn node_index(&self, bank_id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == bank_id)
    }

    /// Neighbor lists with weights, sorted by neighbor index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.src].push((e.dst, e.weight));
            adj[e.dst].push((e.src, e.weight));
        }
        for list in &mut adj {
            list.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        }
        adj
    }

    /// Per-node strength: sum of incident edge weights.
    pub fn strengths(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            s[e.src] += e.weight;
            s[e.dst] += e.weight;
        }
        s
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Cosine of the angle between two feature rows: (u.v)/(|u||v|), clamped to
/// [-1, 1] against rounding. Zero-norm rows are an error; callers must have
/// dropped such banks.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    assert_eq!(u.len(), v.len(), "feature rows must have equal length");
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Metric transform of a cosine similarity: w = 1 - sqrt(1 - C^2).
///
/// Even in C, monotone in |C|, with w(0) = 0 and w(+-1) = 1. Magnitudes
/// beyond 1 are clamped when within [`COSINE_DOMAIN_TOLERANCE`] and rejected
/// otherwise.
pub fn metric_weight(cosine: f64) -> Result<f64> {
    let magnitude = cosine.abs();
    if magnitude > 1.0 + COSINE_DOMAIN_TOLERANCE {
        return Err(Error::CosineOutOfRange(cosine));
    }
    let c = magnitude.min(1.0);
    Ok(1.0 - (1.0 - c * c).sqrt())
}

/// Derive the per-pair RNG seed so the Monte Carlo stream for a pair does not
/// depend on scheduling or on which other pairs exist.
pub fn pair_seed(root: u64, i: u64, j: u64) -> u64 {
    mix64(mix64(mix64(root) ^ i) ^ j)
}

/// Stable 64-bit hash of a bank id, for seeding independent of node indices.
pub fn id_hash(id: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Permutation test for one link: the observed |cosine| must exceed the
/// (1 - alpha) empirical quantile of |cosine(u, pi(v))| over `samples`
/// independent permutations pi of v's components. Deterministic per seed.
pub fn significance_test(
    u: &[f64],
    v: &[f64],
    samples: usize,
    alpha: f64,
    rng_seed: u64,
) -> Result<bool> {
    if samples < 100 {
        return Err(Error::Config(format!(
            "significance test needs at least 100 samples, got {samples}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let observed = cosine_similarity(u, v)?.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut permuted = v.to_vec();
    let mut nulls = Vec::with_capacity(samples);
    for _ in 0..samples {
        permuted.shuffle(&mut rng);
        nulls.push(cosine_similarity(u, &permuted)?.abs());
    }
    nulls.sort_unstable_by(f64::total_cmp);
    // k-th order statistic with k = ceil((1 - alpha) * samples); the small
    // epsilon keeps k stable when the product lands on an integer.
    let k = (((1.0 - alpha) * samples as f64) - 1e-9).ceil() as usize;
    let quantile = nulls[k.clamp(1, samples) - 1];
    Ok(observed > quantile)
}

/// Build the complete significance-tested graph for one year: every pair is
/// scored and pairs that fail the permutation test are discarded.
pub fn build_graph(
    matrix: &FeatureMatrix,
    samples: usize,
    alpha: f64,
    rng_seed: u64,
) -> Result<SimilarityGraph> {
    let n = matrix.n_banks();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "similarity graph needs at least 2 banks, got {n}"
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let cosine = cosine_similarity(&matrix.rows[i], &matrix.rows[j])?;
            let weight = metric_weight(cosine)?;
            let seed = pair_seed(
                rng_seed,
                id_hash(&matrix.bank_ids[i]),
                id_hash(&matrix.bank_ids[j]),
            );
            if significance_test(&matrix.rows[i], &matrix.rows[j], samples, alpha, seed)? {
                edges.push(SimEdge {
                    src: i,
                    dst: j,
                    cosine,
                    weight,
                    significant: true,
                });
            }
        }
    }
    Ok(SimilarityGraph {
        year: matrix.year,
        nodes: matrix.bank_ids.clone(),
        edges,
    })
}

/// Drop edges below the weight threshold. The node set is unchanged; a
/// fragmentation warning is logged when the largest connected component
/// covers less than 95% of the nodes.
pub fn prune(graph: &SimilarityGraph, threshold: f64) -> SimilarityGraph {
    debug_assert!((0.0..=1.0).contains(&threshold));
    let pruned = SimilarityGraph {
        year: graph.year,
        nodes: graph.nodes.clone(),
        edges: graph
            .edges
            .iter()
            .filter(|e| e.weight >= threshold)
            .cloned()
            .collect(),
    };
    let fraction = largest_component_fraction(&pruned);
    if fraction < 0.95 {
        log::warn!(
            "pruning year {} at {threshold} fragments the graph: largest component \
             covers {:.1}% of nodes",
            graph.year,
            fraction * 100.0
        );
    }
    pruned
}

/// Fraction of nodes in the largest connected component (1.0 for an empty
/// node set).
pub fn largest_component_fraction(graph: &SimilarityGraph) -> f64 {
    let n = graph.nodes.len();
    if n == 0 {
        return 1.0;
    }
    let adj = graph.adjacency();
    let mut seen = vec![false; n];
    let mut largest = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut size = 0;
        stack.push(start);
        seen[start] = true;
        while let Some(node) = stack.pop() {
            size += 1;
            for &(next, _) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        largest = largest.max(size);
    }
    largest as f64 / n as f64
}
