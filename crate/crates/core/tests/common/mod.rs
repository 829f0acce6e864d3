//! Shared oracles for the integration suites. Everything here is an
//! independent route: the partition enumerator and the Jacobi eigensolver do
//! not touch the library's optimizer or eigendecomposition.

#![allow(dead_code)]

use acctnet::community::eval_modularity;
use acctnet::simgraph::{SimEdge, SimilarityGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Visit every set partition of {0..n} as a restricted-growth label string.
pub fn for_each_partition<F: FnMut(&[usize])>(n: usize, mut visit: F) {
    if n == 0 {
        return;
    }
    fn go<F: FnMut(&[usize])>(labels: &mut Vec<usize>, i: usize, max: usize, visit: &mut F) {
        let n = labels.len();
        if i == n {
            visit(labels);
            return;
        }
        for label in 0..=(max + 1) {
            labels[i] = label;
            go(labels, i + 1, max.max(label), visit);
        }
    }
    let mut labels = vec![0usize; n];
    go(&mut labels, 1, 0, &mut visit);
}

/// Exhaustive maximum of weighted modularity over all partitions.
pub fn brute_force_max_modularity(graph: &SimilarityGraph) -> (f64, Vec<usize>) {
    let n = graph.nodes.len();
    assert!(n <= 10, "Bell-number enumeration is only for tiny graphs");
    let mut best_q = f64::NEG_INFINITY;
    let mut best = Vec::new();
    for_each_partition(n, |labels| {
        let q = eval_modularity(graph, labels).expect("nonzero-weight graph");
        if q > best_q {
            best_q = q;
            best = labels.to_vec();
        }
    });
    (best_q, best)
}

/// Chance-corrected agreement between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let comb2 = |x: usize| x as f64 * (x as f64 - 1.0) / 2.0;
    let sum_cells: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| comb2(c))
        .sum();
    let sum_rows: f64 = rows.iter().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.iter().map(|&c| comb2(c)).sum();
    let expected = sum_rows * sum_cols / comb2(n);
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0; // both partitions trivial and equal
    }
    (sum_cells - expected) / (max_index - expected)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (descending) paired with their eigenvectors.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| (a[k][k], (0..n).map(|j| v[j][k]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    (
        pairs.iter().map(|(val, _)| *val).collect(),
        pairs.into_iter().map(|(_, vec)| vec).collect(),
    )
}

/// Column-standardized correlation matrix, computed independently of the
/// library's fit path.
pub fn correlation_matrix(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len();
    let p = data[0].len();
    let mut z = vec![vec![0.0; n]; p];
    for j in 0..p {
        let mean = data.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let sd = (data.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        for (i, row) in data.iter().enumerate() {
            z[j][i] = (row[j] - mean) / sd;
        }
    }
    let mut corr = vec![vec![0.0; p]; p];
    for a in 0..p {
        corr[a][a] = 1.0;
        for b in (a + 1)..p {
            let r = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum::<f64>() / (n - 1) as f64;
            corr[a][b] = r;
            corr[b][a] = r;
        }
    }
    corr
}

/// Random connected-ish weighted graph with weights in (0.1, 1.0].
pub fn random_weighted_graph(rng: &mut ChaCha8Rng, n: usize, edge_prob: f64) -> SimilarityGraph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < edge_prob {
                    let weight = 0.1 + 0.9 * rng.random::<f64>();
                    // cosine consistent with the metric transform
                    let cosine = (2.0 * weight - weight * weight).sqrt();
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
        if !edges.is_empty() {
            return SimilarityGraph {
                year: 2005,
                nodes: (0..n).map(|i| format!("b{i:02}")).collect(),
                edges,
            };
        }
    }
}

/// Dense relabeling by first occurrence, for comparing partitions.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    acctnet::community::canonical_labels(labels)
}
