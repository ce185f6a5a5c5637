//! Partitions cut from merge trees and the statistics used to compare them.

use std::collections::HashMap;

use crate::engine::MergeTree;
use crate::heights::{reversal_tolerance, CopheneticMatrix};
use crate::proximity::DissimilarityMatrix;
use crate::{Error, Result};

/// Cluster labels `0..k`, numbered in order of each cluster's smallest object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Relabels arbitrary cluster ids so that labels appear in first-occurrence order.
    pub fn from_labels<T: Eq + std::hash::Hash>(raw: &[T]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Parameter("a partition needs at least one object".into()));
        }
        let mut ids = HashMap::new();
        let labels = raw
            .iter()
            .map(|x| {
                let next = ids.len();
                *ids.entry(x).or_insert(next)
            })
            .collect();
        Ok(Partition { labels, k: ids.len() })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Objects of each cluster, in increasing order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Partition left after the first `n - k` mergers.
pub fn cut_by_count(tree: &MergeTree, k: usize) -> Result<Partition> {
    let n = tree.n();
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("cluster count {k} outside 1..={n}")));
    }
    // Union of leaves by replaying mergers; each node points to its cluster root leaf.
    let mut owner: Vec<usize> = (0..n).collect();
    let mut rep: Vec<usize> = (0..n).collect();
    for m in &tree.mergers()[..n - k] {
        let (a, b) = (rep[m.left], rep[m.right]);
        let (keep, drop) = (a.min(b), a.max(b));
        for o in owner.iter_mut() {
            if *o == drop {
                *o = keep;
            }
        }
        rep.push(keep);
    }
    Partition::from_labels(&owner)
}

/// Result of cutting a dendrogram at a given height.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightCut {
    pub partition: Partition,
    /// Set when the partition is not one of the partitions visited by the agglomeration.
    pub outside_sequence: bool,
}

/// Clusters are the maximal nodes with height at most `cut`, searched from the root.
pub fn cut_by_height(tree: &MergeTree, heights: &[f64], cut: f64) -> Result<HeightCut> {
    let n = tree.n();
    if heights.len() != tree.mergers().len() {
        return Err(Error::SizeMismatch { expected: tree.mergers().len(), found: heights.len() });
    }
    let mut labels = vec![0usize; n];
    let mut stack = vec![tree.root()];
    let mut next = 0;
    while let Some(node) = stack.pop() {
        match tree.merger_of(node) {
            Some(m) if heights[m.step - 1] > cut => {
                stack.push(m.right);
                stack.push(m.left);
            }
            _ => {
                for leaf in tree.leaves(node) {
                    labels[leaf] = next;
                }
                next += 1;
            }
        }
    }
    let partition = Partition::from_labels(&labels)?;
    let outside_sequence = cut_by_count(tree, partition.k())? != partition;
    Ok(HeightCut { partition, outside_sequence })
}

/// Sum over clusters of the pseudo-inertia `sum_{i,j in G} d_ij^2 / (2 |G|)`.
pub fn ess_of_partition(p: &Partition, d: &DissimilarityMatrix) -> Result<f64> {
    if p.n() != d.n() {
        return Err(Error::SizeMismatch { expected: p.n(), found: d.n() });
    }
    let mut total = 0.0;
    for cluster in p.clusters() {
        let mut sum = 0.0;
        for (a, &i) in cluster.iter().enumerate() {
            for &j in &cluster[a + 1..] {
                sum += d.squared(i, j);
            }
        }
        total += sum / cluster.len() as f64;
    }
    Ok(total)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Baker's gamma: Spearman correlation of the condensed cophenetic entries.
pub fn bakers_gamma(c1: &CopheneticMatrix, c2: &CopheneticMatrix) -> Result<f64> {
    if c1.n() != c2.n() {
        return Err(Error::SizeMismatch { expected: c1.n(), found: c2.n() });
    }
    if c1.n() < 3 {
        return Err(Error::Parameter("Baker's gamma needs at least 3 objects".into()));
    }
    pearson(&average_ranks(c1.condensed()), &average_ranks(c2.condensed()))
        .ok_or_else(|| Error::Parameter("Baker's gamma is undefined for a constant cophenetic matrix".into()))
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// Normalized mutual information `2 I / (H1 + H2)`, natural logarithms.
pub fn nmi(p1: &Partition, p2: &Partition) -> Result<f64> {
    if p1.n() != p2.n() {
        return Err(Error::Parameter(format!("partitions of {} and {} objects", p1.n(), p2.n())));
    }
    let n = p1.n() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in p1.labels().iter().zip(p2.labels()) {
        *joint.entry((a, b)).or_default() += 1;
    }
    let mut row = vec![0usize; p1.k()];
    let mut col = vec![0usize; p2.k()];
    for (&(a, b), &c) in &joint {
        row[a] += c;
        col[b] += c;
    }
    let h1 = entropy(row.iter().copied(), n);
    let h2 = entropy(col.iter().copied(), n);
    if h1 + h2 == 0.0 {
        return Ok(1.0);
    }
    let mut entries: Vec<_> = joint.into_iter().collect();
    entries.sort_unstable();
    let mutual: f64 = entries
        .iter()
        .map(|&((a, b), c)| {
            let pab = c as f64 / n;
            pab * (pab * n * n / (row[a] as f64 * col[b] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mutual / (h1 + h2)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrokenStick {
    pub k: usize,
    /// Negative linkages were replaced by 0 before normalization.
    pub clamped: bool,
}

/// Broken-stick choice of the number of clusters from the linkages `m_1..m_{n-1}`.
///
/// Going from `i` to `i + 1` clusters releases the share `L_i = m_{n-i} / sum m`.
/// `k` is one more than the longest run `L_1, .., L_K` exceeding the expected
/// broken-stick shares `b_i = (1/(n-1)) sum_{j=i}^{n-1} 1/j`.
pub fn broken_stick_select(linkages: &[f64]) -> Result<BrokenStick> {
    if linkages.is_empty() {
        return Err(Error::Parameter("broken-stick selection needs at least 2 objects".into()));
    }
    let pieces = linkages.len();
    let clamped = linkages.iter().any(|&m| m < 0.0);
    let shares: Vec<f64> = linkages.iter().rev().map(|&m| m.max(0.0)).collect();
    let total: f64 = shares.iter().sum();
    if total <= 0.0 {
        return Ok(BrokenStick { k: 1, clamped });
    }
    let mut expected = vec![0.0; pieces];
    let mut tail = 0.0;
    for i in (1..=pieces).rev() {
        tail += 1.0 / i as f64;
        expected[i - 1] = tail / pieces as f64;
    }
    let run = shares.iter().zip(&expected).take_while(|(l, b)| *l / total > **b).count();
    Ok(BrokenStick { k: run + 1, clamped })
}

/// Whether a monotone height sequence allows a clean cut strictly between two steps.
pub fn separating_cut(heights: &[f64], k: usize) -> Option<f64> {
    let n = heights.len() + 1;
    if k < 2 || k > n - 1 {
        return None;
    }
    let (lo, hi) = (heights[n - k - 1], heights[n - k]);
    (hi - lo > reversal_tolerance(heights)).then(|| 0.5 * (lo + hi))
}
