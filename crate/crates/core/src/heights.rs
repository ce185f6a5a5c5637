//! Dendrogram heights and their consistency checks.
//!
//! Four heights can be attached to the node created at step `t`:
//!
//! | Kind | Value |
//! |------|-------|
//! | [`HeightKind::Linkage`] | the Ward linkage `m_t` of the merger |
//! | [`HeightKind::Ess`] | error sum of squares after the merger, `sum_{s <= t} m_s` |
//! | [`HeightKind::MergerInertia`] | pseudo-inertia `I_t` of the merged cluster |
//! | [`HeightKind::AvgMergerInertia`] | `I_t` divided by the merged cluster size |
//!
//! A reversal is a step whose height is below the previous one (leaves sit at
//! height 0). A crossover is a node lower than one of its children. Absence of
//! crossovers is what makes the cophenetic matrix ultrametric; for heights that
//! are non-decreasing functions of `m_t` reversals and crossovers coincide.

use std::fmt;
use std::str::FromStr;

use crate::engine::{Agglomeration, Constraint, MergeTree};
use crate::proximity::{condensed_index, condensed_len, DissimilarityMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeightKind {
    Linkage,
    Ess,
    MergerInertia,
    AvgMergerInertia,
}

impl HeightKind {
    pub const ALL: [HeightKind; 4] =
        [HeightKind::Linkage, HeightKind::Ess, HeightKind::MergerInertia, HeightKind::AvgMergerInertia];

    /// Short name used in file formats.
    pub fn name(self) -> &'static str {
        match self {
            HeightKind::Linkage => "m",
            HeightKind::Ess => "ess",
            HeightKind::MergerInertia => "i",
            HeightKind::AvgMergerInertia => "ibar",
        }
    }
}

impl fmt::Display for HeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m" | "linkage" => Ok(HeightKind::Linkage),
            "ess" => Ok(HeightKind::Ess),
            "i" | "merger_inertia" => Ok(HeightKind::MergerInertia),
            "ibar" | "avg_merger_inertia" => Ok(HeightKind::AvgMergerInertia),
            other => Err(Error::Parameter(format!("unknown height kind {other:?} (expected m, ess, i or ibar)"))),
        }
    }
}

/// Heights per merger step, with reversal and crossover steps (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct HeightSequence {
    pub kind: HeightKind,
    pub values: Vec<f64>,
    pub reversal_steps: Vec<usize>,
    pub crossover_steps: Vec<usize>,
}

impl HeightSequence {
    pub fn new(tree: &MergeTree, kind: HeightKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.mergers().len() {
            return Err(Error::SizeMismatch { expected: tree.mergers().len(), found: values.len() });
        }
        let reversal_steps = detect_reversals(&values);
        let crossover_steps = detect_crossovers(tree, &values);
        Ok(HeightSequence { kind, values, reversal_steps, crossover_steps })
    }

    pub fn is_monotone(&self) -> bool {
        self.reversal_steps.is_empty()
    }
}

/// Relative tolerance scale shared by reversal, crossover and ultrametric checks.
pub fn reversal_tolerance(values: &[f64]) -> f64 {
    1e-9 * values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Steps `t` with `h_t < h_{t-1}`, taking `h_0 = 0`.
pub fn detect_reversals(heights: &[f64]) -> Vec<usize> {
    let tol = reversal_tolerance(heights);
    let mut prev = 0.0;
    let mut out = Vec::new();
    for (i, &h) in heights.iter().enumerate() {
        if h < prev - tol {
            out.push(i + 1);
        }
        prev = h;
    }
    out
}

/// Steps whose node is lower than one of its children; leaves have height 0.
pub fn detect_crossovers(tree: &MergeTree, heights: &[f64]) -> Vec<usize> {
    let tol = reversal_tolerance(heights);
    let node_height = |node: usize| tree.step_of(node).map_or(0.0, |t| heights[t - 1]);
    tree.mergers()
        .iter()
        .zip(heights)
        .filter(|(m, &h)| h < node_height(m.left) - tol || h < node_height(m.right) - tol)
        .map(|(m, _)| m.step)
        .collect()
}

/// Pseudo-inertia of every merged cluster, `sum_{i,j in G} d_ij^2 / (2 |G|)`.
///
/// Within-cluster sums are carried up the tree; each merger only adds the
/// cross sum between its two children, so the whole pass costs `O(n^2)`.
pub fn merger_inertias(tree: &MergeTree, d: &DissimilarityMatrix) -> Result<Vec<f64>> {
    let n = tree.n();
    if d.n() != n {
        return Err(Error::SizeMismatch { expected: n, found: d.n() });
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut within = vec![0.0; n];
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for m in tree.mergers() {
        let left = std::mem::take(&mut members[m.left]);
        let right = std::mem::take(&mut members[m.right]);
        let mut cross = 0.0;
        for &i in &left {
            for &j in &right {
                cross += d.squared(i, j);
            }
        }
        let sum = within[m.left] + within[m.right] + 2.0 * cross;
        out.push(sum / (2.0 * m.size as f64));
        within.push(sum);
        let mut merged = left;
        merged.extend(right);
        members.push(merged);
    }
    Ok(out)
}

pub fn compute_heights(tree: &MergeTree, d: &DissimilarityMatrix, kind: HeightKind) -> Result<HeightSequence> {
    if d.n() != tree.n() {
        return Err(Error::SizeMismatch { expected: tree.n(), found: d.n() });
    }
    let values = match kind {
        HeightKind::Linkage | HeightKind::Ess => linkage_heights(tree, kind),
        HeightKind::MergerInertia => merger_inertias(tree, d)?,
        HeightKind::AvgMergerInertia => {
            let inertia = merger_inertias(tree, d)?;
            inertia.iter().zip(tree.mergers()).map(|(i, m)| i / m.size as f64).collect()
        }
    };
    HeightSequence::new(tree, kind, values)
}

/// Heights that only need the tree: `m_t` or its cumulative sums.
pub fn linkage_heights(tree: &MergeTree, kind: HeightKind) -> Vec<f64> {
    let m = tree.linkages();
    match kind {
        HeightKind::Ess => m
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect(),
        _ => m,
    }
}

/// All four height sequences of a tree.
pub fn all_heights(tree: &MergeTree, d: &DissimilarityMatrix) -> Result<[HeightSequence; 4]> {
    let inertia = merger_inertias(tree, d)?;
    let avg = inertia.iter().zip(tree.mergers()).map(|(i, m)| i / m.size as f64).collect();
    Ok([
        HeightSequence::new(tree, HeightKind::Linkage, linkage_heights(tree, HeightKind::Linkage))?,
        HeightSequence::new(tree, HeightKind::Ess, linkage_heights(tree, HeightKind::Ess))?,
        HeightSequence::new(tree, HeightKind::MergerInertia, inertia)?,
        HeightSequence::new(tree, HeightKind::AvgMergerInertia, avg)?,
    ])
}

/// Height at which each pair of leaves first shares a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct CopheneticMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CopheneticMatrix {
    pub fn from_condensed(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != condensed_len(n) {
            return Err(Error::SizeMismatch { expected: condensed_len(n), found: values.len() });
        }
        Ok(CopheneticMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn condensed(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self.values[condensed_index(self.n, i, j)],
            Greater => self.values[condensed_index(self.n, j, i)],
        }
    }
}

pub fn cophenetic_matrix(tree: &MergeTree, heights: &[f64]) -> CopheneticMatrix {
    let n = tree.n();
    let mut values = vec![0.0; condensed_len(n)];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for (m, &h) in tree.mergers().iter().zip(heights) {
        let left = std::mem::take(&mut members[m.left]);
        let right = std::mem::take(&mut members[m.right]);
        for &i in &left {
            for &j in &right {
                values[condensed_index(n, i.min(j), i.max(j))] = h;
            }
        }
        let mut merged = left;
        merged.extend(right);
        members.push(merged);
    }
    CopheneticMatrix { n, values }
}

/// `h_ij <= max(h_ik, h_kj)` for every triple, diagonal included (which
/// forces non-negative entries), within the relative tolerance.
pub fn is_ultrametric(c: &CopheneticMatrix) -> bool {
    let tol = reversal_tolerance(&c.values);
    if c.values.iter().any(|&v| v < -tol) {
        return false;
    }
    let n = c.n;
    for i in 0..n {
        for j in i + 1..n {
            let hij = c.get(i, j);
            for k in 0..n {
                if k != i && k != j && hij > c.get(i, k).max(c.get(k, j)) + tol {
                    return false;
                }
            }
        }
    }
    true
}

/// A cluster next to the merged pair on the path, with its linkages to both members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathNeighbor {
    pub size: usize,
    pub linkage_to_left: f64,
    pub linkage_to_right: f64,
}

/// State around an order-constrained merger of clusters `l` (left) and `r` (right).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergerContext {
    pub size_left: usize,
    pub size_right: usize,
    /// Linkage between `l` and `r`, i.e. the merger's `m_t`.
    pub linkage: f64,
    /// The cluster left of `l`, if any.
    pub outer_left: Option<PathNeighbor>,
    /// The cluster right of `r`, if any.
    pub outer_right: Option<PathNeighbor>,
}

/// Whether merging `l` and `r` is followed by a reversal of `m_t` at the next step.
///
/// True iff `delta(l, r)` exceeds, for some side, the size-weighted mean of
/// that neighbour's linkages to `l` and `r` (weights `|G_l| + |G_nb|` and
/// `|G_r| + |G_nb|`), which is when the new cluster's linkage to that
/// neighbour drops below `delta(l, r)`.
pub fn reversal_condition(ctx: &MergerContext) -> bool {
    let weighted = |nb: &PathNeighbor| {
        let wl = (ctx.size_left + nb.size) as f64;
        let wr = (ctx.size_right + nb.size) as f64;
        (wl * nb.linkage_to_left + wr * nb.linkage_to_right) / (wl + wr)
    };
    let bound = [ctx.outer_left.as_ref(), ctx.outer_right.as_ref()]
        .into_iter()
        .flatten()
        .map(weighted)
        .fold(f64::INFINITY, f64::min);
    ctx.linkage > bound
}

/// Runs order-constrained clustering and evaluates [`reversal_condition`]
/// before every merger. Entry `t - 1` predicts a reversal at step `t + 1`.
pub fn ochac_reversal_predictions(d: &DissimilarityMatrix) -> Result<Vec<bool>> {
    let mut run = Agglomeration::new(d, Constraint::Path)?;
    let mut out = Vec::with_capacity(d.n().saturating_sub(1));
    while let Some(best) = run.best_candidate() {
        let (l, r) = (best.left, best.right);
        let size = |x| run.cluster_size(x).expect("active cluster");
        let link = |a, b| run.linkage_between(a, b).expect("active clusters");
        let neighbor = |nb: usize| PathNeighbor { size: size(nb), linkage_to_left: link(nb, l), linkage_to_right: link(nb, r) };
        let (outer_left, _) = run.path_neighbors(l).expect("path constraint");
        let (_, outer_right) = run.path_neighbors(r).expect("path constraint");
        let ctx = MergerContext {
            size_left: size(l),
            size_right: size(r),
            linkage: best.linkage,
            outer_left: outer_left.map(neighbor),
            outer_right: outer_right.map(neighbor),
        };
        out.push(reversal_condition(&ctx));
        run.step();
    }
    Ok(out)
}
