//! Weighted-modularity community detection: exact modularity evaluation, a
//! deterministic Louvain optimizer, and a pruning-threshold sweep.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simgraph::{largest_component_fraction, prune, SimilarityGraph};

/// Convergence tolerance: a move pass that gains less total modularity than
/// this ends the level.
const LEVEL_GAIN_TOLERANCE: f64 = 1e-10;
/// Safety cap on move passes within one level.
const MAX_PASSES: usize = 100;

/// An assignment of every node to a community, with its modularity.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Node index -> community label; labels are dense from 0.
    pub assignment: Vec<usize>,
    pub modularity: f64,
    /// Prune threshold of the graph this partition was computed on; 0.0 when
    /// the graph was not pruned.
    pub threshold_used: f64,
}

impl Partition {
    pub fn n_communities(&self) -> usize {
        self.assignment.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Members of each community, using graph node indices.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_communities()];
        for (node, &c) in self.assignment.iter().enumerate() {
            groups[c].push(node);
        }
        groups
    }
}

/// Relabel communities densely by first occurrence in node order, giving a
/// canonical form for comparing partitions.
pub fn canonical_labels(assignment: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut next = 0;
    assignment
        .iter()
        .map(|&c| {
            *map.entry(c).or_insert_with(|| {
                let label = next;
                next += 1;
                label
            })
        })
        .collect()
}

/// Weighted modularity of a partition:
/// Q = (1/2W) * sum_ij (w_ij - s_i s_j / 2W) delta(c_i, c_j),
/// over ordered pairs, with s_i the node strengths and W the total unordered
/// edge weight.
pub fn eval_modularity(graph: &SimilarityGraph, assignment: &[usize]) -> Result<f64> {
    assert_eq!(
        assignment.len(),
        graph.nodes.len(),
        "assignment must cover every node"
    );
    let total = graph.total_weight();
    if total <= 0.0 {
        return Err(Error::ZeroWeightGraph);
    }
    let two_w = 2.0 * total;
    let n_comm = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; n_comm];
    let mut strength_sum = vec![0.0; n_comm];
    for (node, &s) in graph.strengths().iter().enumerate() {
        strength_sum[assignment[node]] += s;
    }
    for e in &graph.edges {
        if assignment[e.src] == assignment[e.dst] {
            internal[assignment[e.src]] += e.weight;
        }
    }
    Ok((0..n_comm)
        .map(|c| 2.0 * internal[c] / two_w - (strength_sum[c] / two_w).powi(2))
        .sum())
}

/// Working graph for one Louvain level. Aggregation introduces self-loops,
/// stored separately as unordered internal weight.
struct LevelGraph {
    /// Sorted neighbor lists, no self entries.
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    /// s_i = sum of incident weights + twice the self-loop.
    strength: Vec<f64>,
    two_w: f64,
}

impl LevelGraph {
    fn from_graph(graph: &SimilarityGraph) -> Self {
        let n = graph.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &graph.edges {
            adj[e.src].push((e.dst, e.weight));
            adj[e.dst].push((e.src, e.weight));
        }
        for list in &mut adj {
            list.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        }
        let strength: Vec<f64> = adj
            .iter()
            .map(|list| list.iter().map(|&(_, w)| w).sum())
            .collect();
        let two_w = strength.iter().sum();
        LevelGraph {
            adj,
            self_loop: vec![0.0; n],
            strength,
            two_w,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapse communities into super-nodes, keeping total weight constant.
    /// `assignment` labels must be dense.
    fn aggregate(&self, assignment: &[usize], n_communities: usize) -> LevelGraph {
        let mut self_loop = vec![0.0; n_communities];
        let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for node in 0..self.len() {
            let a = assignment[node];
            self_loop[a] += self.self_loop[node];
            for &(neighbor, w) in &self.adj[node] {
                if neighbor <= node {
                    continue; // each undirected edge once
                }
                let b = assignment[neighbor];
                if a == b {
                    self_loop[a] += w;
                } else {
                    let key = if a < b { (a, b) } else { (b, a) };
                    *between.entry(key).or_insert(0.0) += w;
                }
            }
        }
        let mut adj = vec![Vec::new(); n_communities];
        for (&(a, b), &w) in &between {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        }
        let strength: Vec<f64> = (0..n_communities)
            .map(|c| adj[c].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_loop[c])
            .collect();
        LevelGraph {
            adj,
            self_loop,
            strength,
            two_w: self.two_w,
        }
    }
}

/// One level of local moves. Returns the per-node community labels (dense)
/// and whether any node moved.
fn move_nodes(graph: &LevelGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize, bool) {
    let n = graph.len();
    let mut community: Vec<usize> = (0..n).collect();
    let mut community_strength: Vec<f64> = graph.strength.clone();
    let two_w = graph.two_w;

    // Visitation order is shuffled once per level.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut neighbor_weight = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;

    for _pass in 0..MAX_PASSES {
        let mut pass_gain = 0.0;
        let mut pass_moves = 0usize;
        for &node in &order {
            let current = community[node];
            let s_node = graph.strength[node];

            touched.clear();
            for &(neighbor, w) in &graph.adj[node] {
                let c = community[neighbor];
                if neighbor_weight[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                neighbor_weight[c] += w;
            }
            if touched.is_empty() {
                continue;
            }
            // Remove the node from its community while evaluating moves.
            community_strength[current] -= s_node;

            // Gain of joining community c, in modularity units.
            let join_gain = |c: usize, strength_sum: f64| {
                2.0 * neighbor_weight[c] / two_w
                    - 2.0 * strength_sum * s_node / (two_w * two_w)
            };
            let stay_gain = join_gain(current, community_strength[current]);

            // Ascending label order plus strict improvement implements the
            // lowest-label tie-break deterministically.
            touched.sort_unstable();
            let mut best_comm = current;
            let mut best_delta = 0.0;
            for &c in &touched {
                if c == current {
                    continue;
                }
                let delta = join_gain(c, community_strength[c]) - stay_gain;
                if delta > best_delta {
                    best_delta = delta;
                    best_comm = c;
                }
            }

            community_strength[best_comm] += s_node;
            if best_comm != current {
                community[node] = best_comm;
                pass_gain += best_delta;
                pass_moves += 1;
                moved_any = true;
            }
            for &c in &touched {
                neighbor_weight[c] = 0.0;
            }
        }
        if pass_moves == 0 || pass_gain < LEVEL_GAIN_TOLERANCE {
            break;
        }
    }

    // Relabel densely, in ascending old-label order.
    let mut dense: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in community.iter() {
        let next = dense.len();
        dense.entry(c).or_insert(next);
    }
    let n_communities = dense.len();
    for c in community.iter_mut() {
        *c = dense[c];
    }
    (community, n_communities, moved_any)
}

/// Greedy two-phase modularity maximization. Local moves assign each node to
/// the neighbor community with the largest positive gain (lowest label on
/// ties); converged levels are aggregated into super-node graphs until no
/// move improves modularity. Deterministic given the seed and node order.
pub fn louvain(graph: &SimilarityGraph, rng_seed: u64) -> Result<Partition> {
    if graph.total_weight() <= 0.0 {
        return Err(Error::ZeroWeightGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut level = LevelGraph::from_graph(graph);
    let mut membership: Vec<usize> = (0..graph.nodes.len()).collect();

    loop {
        let (assignment, n_communities, moved) = move_nodes(&level, &mut rng);
        if !moved {
            break;
        }
        for m in membership.iter_mut() {
            *m = assignment[*m];
        }
        if n_communities == level.len() {
            break;
        }
        level = level.aggregate(&assignment, n_communities);
    }

    let assignment = canonical_labels(&membership);
    let modularity = eval_modularity(graph, &assignment)?;
    Ok(Partition {
        assignment,
        modularity,
        threshold_used: 0.0,
    })
}

/// Result of community detection at one pruning threshold.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub threshold: f64,
    pub partition: Partition,
    pub largest_component_fraction: f64,
    /// Largest connected component covers less than 95% of nodes.
    pub fragmented: bool,
}

/// Prune at each threshold (ascending, within [0, 1]) and run Louvain,
/// reporting modularity and fragmentation per threshold. A threshold that
/// removes every edge yields the singleton partition with modularity
/// reported as 0.
pub fn threshold_sweep(
    graph: &SimilarityGraph,
    thresholds: &[f64],
    rng_seed: u64,
) -> Result<Vec<SweepEntry>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(
            "prune thresholds must be sorted ascending".to_string(),
        ));
    }
    if let Some(&bad) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Config(format!(
            "prune thresholds must lie in [0, 1], got {bad}"
        )));
    }
    let mut entries = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let pruned = prune(graph, threshold);
        let fraction = largest_component_fraction(&pruned);
        let partition = match louvain(&pruned, rng_seed) {
            Ok(mut p) => {
                p.threshold_used = threshold;
                p
            }
            Err(Error::ZeroWeightGraph) => Partition {
                assignment: (0..pruned.nodes.len()).collect(),
                modularity: 0.0,
                threshold_used: threshold,
            },
            Err(e) => return Err(e),
        };
        entries.push(SweepEntry {
            threshold,
            partition,
            largest_component_fraction: fraction,
            fragmented: fraction < 0.95,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgraph::SimEdge;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph {
            year: 2005,
            nodes: (0..n).map(|i| format!("b{i:02}")).collect(),
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

    fn clique_edges(members: &[usize], weight: f64) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::new();
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                edges.push((a, b, weight));
            }
        }
        edges
    }

    fn two_cliques() -> SimilarityGraph {
        let mut edges = clique_edges(&[0, 1, 2, 3], 1.0);
        edges.extend(clique_edges(&[4, 5, 6, 7], 1.0));
        graph(8, &edges)
    }

    #[test]
    fn whole_graph_partition_has_zero_modularity() {
        let g = graph(4, &[(0, 1, 0.7), (1, 2, 0.2), (2, 3, 0.9), (0, 3, 0.4)]);
        let q = eval_modularity(&g, &[0, 0, 0, 0]).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn two_disconnected_cliques_score_half() {
        let g = two_cliques();
        let q = eval_modularity(&g, &[0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_partition_of_connected_graph_is_negative() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let q = eval_modularity(&g, &[0, 1, 2]).unwrap();
        assert!(q < 0.0);
    }

    #[test]
    fn modularity_is_label_invariant() {
        let g = two_cliques();
        let a = eval_modularity(&g, &[0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let b = eval_modularity(&g, &[5, 5, 5, 5, 2, 2, 2, 2]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_graph_is_an_error() {
        let g = graph(3, &[]);
        assert!(matches!(
            eval_modularity(&g, &[0, 1, 2]),
            Err(Error::ZeroWeightGraph)
        ));
        assert!(matches!(louvain(&g, 1), Err(Error::ZeroWeightGraph)));
    }

    #[test]
    fn louvain_recovers_disconnected_cliques() {
        let g = two_cliques();
        let p = louvain(&g, 42).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert!((p.modularity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn louvain_on_uniform_complete_graph_is_nonnegative() {
        let g = graph(5, &clique_edges(&[0, 1, 2, 3, 4], 0.8));
        let p = louvain(&g, 7).unwrap();
        // No structure to find: the single community's Q of 0 is the best
        // the heuristic can justify (up to rounding).
        assert!(p.modularity >= -1e-12);
        let singleton: Vec<usize> = (0..5).collect();
        let q0 = eval_modularity(&g, &singleton).unwrap();
        assert!(p.modularity >= q0);
    }

    #[test]
    fn louvain_beats_singletons_on_weighted_blocks() {
        // Three blocks with strong internal weights and weak bridges.
        let mut edges = clique_edges(&[0, 1, 2], 0.9);
        edges.extend(clique_edges(&[3, 4, 5], 0.9));
        edges.extend(clique_edges(&[6, 7, 8], 0.9));
        edges.extend_from_slice(&[(2, 3, 0.1), (5, 6, 0.1), (8, 0, 0.1)]);
        let g = graph(9, &edges);
        let p = louvain(&g, 3).unwrap();
        assert_eq!(p.n_communities(), 3);
        assert_eq!(canonical_labels(&p.assignment), vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
        let singleton_q = eval_modularity(&g, &(0..9).collect::<Vec<_>>()).unwrap();
        assert!(p.modularity > singleton_q);
    }

    #[test]
    fn louvain_is_deterministic_per_seed() {
        let mut edges = clique_edges(&[0, 1, 2, 3], 0.7);
        edges.extend(clique_edges(&[4, 5, 6, 7], 0.7));
        edges.push((1, 5, 0.12));
        let g = graph(8, &edges);
        let a = louvain(&g, 11).unwrap();
        let b = louvain(&g, 11).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.modularity, b.modularity);
    }

    #[test]
    fn partition_modularity_matches_eval() {
        let g = two_cliques();
        let p = louvain(&g, 5).unwrap();
        let q = eval_modularity(&g, &p.assignment).unwrap();
        assert!((p.modularity - q).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_stable_below_intra_clique_weight() {
        let g = two_cliques(); // intra weight 1.0
        let entries = threshold_sweep(&g, &[0.2, 0.4, 0.6, 0.8], 9).unwrap();
        for e in &entries {
            assert!((e.partition.modularity - 0.5).abs() < 1e-12);
            assert_eq!(
                canonical_labels(&e.partition.assignment),
                vec![0, 0, 0, 0, 1, 1, 1, 1]
            );
            assert_eq!(e.partition.threshold_used, e.threshold);
        }
    }

    #[test]
    fn sweep_flags_fragmentation_when_everything_is_cut() {
        let g = graph(4, &[(0, 1, 0.3), (2, 3, 0.3)]);
        let entries = threshold_sweep(&g, &[0.9], 1).unwrap();
        assert!(entries[0].fragmented);
        assert_eq!(entries[0].partition.assignment, vec![0, 1, 2, 3]);
        assert_eq!(entries[0].partition.modularity, 0.0);
    }

    #[test]
    fn sweep_validates_threshold_order_and_domain() {
        let g = two_cliques();
        assert!(threshold_sweep(&g, &[0.5, 0.3], 1).is_err());
        assert!(threshold_sweep(&g, &[-0.1, 0.5], 1).is_err());
        assert!(threshold_sweep(&g, &[0.5, 1.2], 1).is_err());
    }
}
