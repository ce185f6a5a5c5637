//! Independent reference implementations and random instance generators.
//!
//! The oracle recomputes every Ward linkage from raw squared-dissimilarity
//! sums over cluster members, with no update formula and no shared state
//! with the library engine.

#![allow(dead_code)]

use wardlink::engine::MergeTree;
use wardlink::proximity::{
    condensed_len, points_to_dissimilarity, DissimilarityMatrix, KernelMatrix, Metric, PointSet, SimilarityMatrix,
};
use wardlink::rng::SplitMix64;

/// `sum_{i in u, j in v} d_ij^2`, over ordered pairs when `u == v`.
pub fn cross_sum(d: &DissimilarityMatrix, u: &[usize], v: &[usize]) -> f64 {
    u.iter().flat_map(|&i| v.iter().map(move |&j| (i, j))).map(|(i, j)| d.squared(i, j)).sum()
}

/// Ward linkage from member sums.
pub fn direct_linkage(d: &DissimilarityMatrix, u: &[usize], v: &[usize]) -> f64 {
    let (nu, nv) = (u.len() as f64, v.len() as f64);
    let within_u = cross_sum(d, u, u);
    let within_v = cross_sum(d, v, v);
    let between = cross_sum(d, u, v);
    nu * nv / (nu + nv) * (between / (nu * nv) - within_u / (2.0 * nu * nu) - within_v / (2.0 * nv * nv))
}

/// Ward linkage from kernel sums `R_uv = sum k_ij`.
pub fn kernel_linkage(k: &KernelMatrix, u: &[usize], v: &[usize]) -> f64 {
    let r = |a: &[usize], b: &[usize]| -> f64 { a.iter().flat_map(|&i| b.iter().map(move |&j| k.get(i, j))).sum() };
    let (nu, nv) = (u.len() as f64, v.len() as f64);
    nu * nv / (nu + nv) * (r(u, u) / (nu * nu) + r(v, v) / (nv * nv) - 2.0 * r(u, v) / (nu * nv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleConstraint {
    None,
    Path,
}

/// One oracle merger: the two member sets (smaller minimum first) and the linkage.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMerger {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub linkage: f64,
}

/// Brute-force Ward agglomeration: every step scans all admissible pairs of
/// current clusters and recomputes their linkage from scratch.
pub fn oracle_ward(n: usize, constraint: OracleConstraint, linkage: &dyn Fn(&[usize], &[usize]) -> f64) -> Vec<OracleMerger> {
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (u, v) = (&clusters[a], &clusters[b]);
                if constraint == OracleConstraint::Path {
                    let adjacent = u.iter().max().unwrap() + 1 == *v.iter().min().unwrap()
                        || v.iter().max().unwrap() + 1 == *u.iter().min().unwrap();
                    if !adjacent {
                        continue;
                    }
                }
                let value = linkage(u, v);
                if best.is_none_or(|(bv, _, _)| value < bv) {
                    best = Some((value, a, b));
                }
            }
        }
        let (value, a, b) = best.expect("a connected constraint always offers a pair");
        let right = clusters.remove(b);
        let left = clusters.remove(a);
        let (left, right) = if left.iter().min() < right.iter().min() { (left, right) } else { (right, left) };
        let mut merged = left.clone();
        merged.extend(&right);
        merged.sort_unstable();
        clusters.insert(a, merged);
        out.push(OracleMerger { left, right, linkage: value });
    }
    out
}

/// Member sets of the tree's mergers, sorted, in the same shape as the oracle output.
pub fn tree_member_sets(tree: &MergeTree) -> Vec<(Vec<usize>, Vec<usize>)> {
    tree.mergers()
        .iter()
        .map(|m| {
            let mut l = tree.leaves(m.left);
            let mut r = tree.leaves(m.right);
            l.sort_unstable();
            r.sort_unstable();
            (l, r)
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random instance source used by the property and acceptance tests.
pub struct Gen {
    rng: SplitMix64,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: SplitMix64::new(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.next_f64()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.rng.below((hi - lo + 1) as u64) as usize
    }

    pub fn points(&mut self, n: usize, dim: usize) -> PointSet {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| self.uniform(-5.0, 5.0)).collect()).collect();
        PointSet::from_rows(&rows).unwrap()
    }

    pub fn euclidean(&mut self, n: usize, dim: usize) -> DissimilarityMatrix {
        points_to_dissimilarity(&self.points(n, dim), Metric::Euclidean).unwrap()
    }

    /// Independent uniform entries; generally not Euclidean-embeddable.
    pub fn arbitrary_dissimilarity(&mut self, n: usize) -> DissimilarityMatrix {
        let values = (0..condensed_len(n)).map(|_| self.uniform(0.1, 3.0)).collect();
        DissimilarityMatrix::from_condensed(n, values).unwrap()
    }

    /// Gram matrix `A A^T` of a random `n x rank` matrix.
    pub fn kernel(&mut self, n: usize, rank: usize) -> KernelMatrix {
        let a: Vec<f64> = (0..n * rank).map(|_| self.uniform(-2.0, 2.0)).collect();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = (0..rank).map(|c| a[i * rank + c] * a[j * rank + c]).sum();
            }
        }
        KernelMatrix::new(n, values).unwrap()
    }

    /// Symmetric entries in `[-1, 1]` with a positive diagonal; usually indefinite.
    pub fn similarity(&mut self, n: usize) -> SimilarityMatrix {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = self.uniform(0.5, 2.0);
            for j in i + 1..n {
                let s = self.uniform(-1.0, 1.0);
                values[i * n + j] = s;
                values[j * n + i] = s;
            }
        }
        SimilarityMatrix::new(n, values).unwrap()
    }
}
