//! Agglomerative clustering with Ward's linkage.
//!
//! [`hac`] merges, at every step, the pair of clusters with the smallest Ward
//! linkage. [`cchac`] restricts candidate pairs to clusters adjacent in a
//! contiguity graph, the adjacency of a merged cluster being the union of its
//! children's adjacencies. [`ochac`] is the special case of a path: objects are
//! ordered along a line and only neighbouring segments may merge.
//!
//! Linkages are kept for every pair of active clusters, constrained or not, and
//! updated with the Lance-Williams recurrence. Kernel and similarity inputs can
//! instead keep sums of kernel entries and evaluate the kernel form of the
//! linkage directly, see [`Agglomeration::from_kernel`].
//!
//! Ties are broken on node ids: among pairs with equal linkage, the pair whose
//! smaller node id is least wins, then the one whose larger node id is least.

use std::collections::{BTreeSet, VecDeque};

use crate::proximity::{
    condensed_index, validate_dissimilarity, DissimilarityMatrix, KernelMatrix, SimilarityMatrix,
};
use crate::{Error, Result};

/// Ward linkage between two singletons at distance `d`.
#[inline]
pub fn ward_linkage_singletons(d: f64) -> f64 {
    d * d / 2.0
}

/// Lance-Williams recurrence for Ward's linkage: `delta(u + v, w)` from the
/// linkages among `u`, `v` and `w` before the merge.
#[inline]
pub fn lance_williams_update(
    delta_uw: f64,
    delta_vw: f64,
    delta_uv: f64,
    size_u: usize,
    size_v: usize,
    size_w: usize,
) -> f64 {
    let (nu, nv, nw) = (size_u as f64, size_v as f64, size_w as f64);
    ((nu + nw) * delta_uw + (nv + nw) * delta_vw - nw * delta_uv) / (nu + nv + nw)
}

/// Ward linkage from sums of squared dissimilarities: `delta_uv` sums over
/// `u x v`, `delta_uu` and `delta_vv` over ordered pairs within each cluster.
#[inline]
pub fn ward_linkage_direct(delta_uv: f64, delta_uu: f64, delta_vv: f64, size_u: usize, size_v: usize) -> f64 {
    let (nu, nv) = (size_u as f64, size_v as f64);
    nu * nv / (nu + nv) * (delta_uv / (nu * nv) - delta_uu / (2.0 * nu * nu) - delta_vv / (2.0 * nv * nv))
}

/// Ward linkage from sums of kernel entries over `u x u`, `v x v` and `u x v`.
#[inline]
pub fn kernel_ward_linkage(r_uu: f64, r_vv: f64, r_uv: f64, size_u: usize, size_v: usize) -> f64 {
    let (nu, nv) = (size_u as f64, size_v as f64);
    nu * nv / (nu + nv) * (r_uu / (nu * nu) + r_vv / (nv * nv) - 2.0 * r_uv / (nu * nv))
}

/// Undirected graph over objects; only adjacent clusters may merge.
#[derive(Debug, Clone, PartialEq)]
pub struct ContiguityGraph {
    n: usize,
    adjacency: Vec<BTreeSet<usize>>,
}

impl ContiguityGraph {
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![BTreeSet::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Input(format!("edge ({i}, {j}) refers to an object outside 0..{n}")));
            }
            if i == j {
                return Err(Error::Input(format!("self-loop on object {i}")));
            }
            adjacency[i].insert(j);
            adjacency[j].insert(i);
        }
        Ok(ContiguityGraph { n, adjacency })
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        ContiguityGraph { n, adjacency }
    }

    /// Objects ordered along a line.
    pub fn path(n: usize) -> Self {
        ContiguityGraph::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, adj) in self.adjacency.iter().enumerate() {
            out.extend(adj.range(i + 1..).map(|&j| (i, j)));
        }
        out
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for &j in &self.adjacency[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }
}

/// Restriction on which clusters may merge.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    None,
    /// Objects ordered `0..n` along a line.
    Path,
    Graph(ContiguityGraph),
}

/// One agglomeration step. Leaves are nodes `0..n`; the node created at step
/// `t` (1-based) has id `n - 1 + t`. `left` is the child holding the smaller
/// object index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merger {
    pub step: usize,
    pub left: usize,
    pub right: usize,
    pub linkage: f64,
    pub size: usize,
}

/// The ordered list of `n - 1` mergers produced by a clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTree {
    n: usize,
    mergers: Vec<Merger>,
}

impl MergeTree {
    /// Checks the forest structure: steps numbered from 1, children created
    /// before their parent and used once, sizes adding up.
    pub fn new(n: usize, mergers: Vec<Merger>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("a merge tree needs at least one leaf".into()));
        }
        if mergers.len() != n - 1 {
            return Err(Error::Input(format!("{n} leaves need {} mergers, found {}", n - 1, mergers.len())));
        }
        let mut sizes = vec![1usize; n];
        let mut used = vec![false; 2 * n - 1];
        for (idx, m) in mergers.iter().enumerate() {
            let t = idx + 1;
            if m.step != t {
                return Err(Error::Input(format!("merger {idx} has step {}, expected {t}", m.step)));
            }
            for child in [m.left, m.right] {
                if child >= n - 1 + t {
                    return Err(Error::Input(format!("step {t} uses node {child} before it exists")));
                }
                if used[child] {
                    return Err(Error::Input(format!("node {child} is merged twice")));
                }
                used[child] = true;
            }
            if m.left == m.right {
                return Err(Error::Input(format!("step {t} merges node {} with itself", m.left)));
            }
            let size = sizes[m.left] + sizes[m.right];
            if m.size != size {
                return Err(Error::Input(format!("step {t} reports size {}, children sum to {size}", m.size)));
            }
            sizes.push(size);
        }
        Ok(MergeTree { n, mergers })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mergers(&self) -> &[Merger] {
        &self.mergers
    }

    /// The linkage values `m_t`, in step order.
    pub fn linkages(&self) -> Vec<f64> {
        self.mergers.iter().map(|m| m.linkage).collect()
    }

    /// Step that created `node`, or `None` for a leaf.
    pub fn step_of(&self, node: usize) -> Option<usize> {
        (node >= self.n).then(|| node + 1 - self.n)
    }

    pub fn merger_of(&self, node: usize) -> Option<&Merger> {
        self.step_of(node).map(|t| &self.mergers[t - 1])
    }

    pub fn root(&self) -> usize {
        2 * self.n - 2
    }

    pub fn size_of(&self, node: usize) -> usize {
        self.merger_of(node).map_or(1, |m| m.size)
    }

    /// Leaves under `node`, left subtree first.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size_of(node));
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.merger_of(x) {
                None => out.push(x),
                Some(m) => {
                    stack.push(m.right);
                    stack.push(m.left);
                }
            }
        }
        out
    }

    /// Leaf order of the dendrogram drawn with left children first.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.leaves(self.root())
    }
}

#[derive(Debug, Clone)]
enum Store {
    /// Ward linkages over slot pairs, condensed.
    Ward(Vec<f64>),
    /// Kernel sums over slot pairs, full `n x n`.
    KernelSums(Vec<f64>),
}

#[derive(Debug, Clone)]
enum Live {
    Unconstrained,
    Path { next: Vec<Option<usize>>, prev: Vec<Option<usize>> },
    Graph(Vec<BTreeSet<usize>>),
}

/// A pair of active clusters that may merge at the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub left: usize,
    pub right: usize,
    pub linkage: f64,
}

/// Clustering state, advanced one merger at a time.
///
/// Each active cluster lives in the slot of its smallest object index.
#[derive(Debug, Clone)]
pub struct Agglomeration {
    n: usize,
    store: Store,
    live: Live,
    active: Vec<bool>,
    size: Vec<usize>,
    node: Vec<usize>,
    slot_of_node: Vec<Option<usize>>,
    mergers: Vec<Merger>,
}

impl Agglomeration {
    /// Starts from singletons with linkages `d_ij^2 / 2`.
    pub fn new(d: &DissimilarityMatrix, constraint: Constraint) -> Result<Self> {
        let report = validate_dissimilarity(d);
        if !report.is_valid() {
            return Err(Error::Input(report.summary()));
        }
        let n = d.n();
        let store = Store::Ward(d.condensed().iter().map(|&x| ward_linkage_singletons(x)).collect());
        Self::with_store(n, store, constraint)
    }

    /// Kernel route: keeps sums of kernel entries per cluster pair.
    pub fn from_kernel(k: &KernelMatrix, constraint: Constraint) -> Result<Self> {
        Self::with_store(k.n(), Store::KernelSums(k.values().to_vec()), constraint)
    }

    /// Similarity entries used as kernel sums, without any diagonal shift.
    pub fn from_similarity(s: &SimilarityMatrix, constraint: Constraint) -> Result<Self> {
        Self::with_store(s.n(), Store::KernelSums(s.values().to_vec()), constraint)
    }

    fn with_store(n: usize, store: Store, constraint: Constraint) -> Result<Self> {
        let live = match constraint {
            Constraint::None => Live::Unconstrained,
            Constraint::Path => Live::Path {
                next: (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect(),
                prev: (0..n).map(|i| i.checked_sub(1)).collect(),
            },
            Constraint::Graph(g) => {
                if g.n() != n {
                    return Err(Error::SizeMismatch { expected: n, found: g.n() });
                }
                let components = g.component_count();
                if components > 1 {
                    return Err(Error::Disconnected { components });
                }
                Live::Graph(g.adjacency)
            }
        };
        let mut slot_of_node = vec![None; 2 * n - 1];
        for (i, s) in slot_of_node.iter_mut().take(n).enumerate() {
            *s = Some(i);
        }
        Ok(Agglomeration {
            n,
            store,
            live,
            active: vec![true; n],
            size: vec![1; n],
            node: (0..n).collect(),
            slot_of_node,
            mergers: Vec::with_capacity(n.saturating_sub(1)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mergers(&self) -> &[Merger] {
        &self.mergers
    }

    pub fn is_done(&self) -> bool {
        self.mergers.len() + 1 >= self.n
    }

    /// Node ids of the active clusters, ordered by smallest object index.
    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&s| self.active[s]).map(|s| self.node[s]).collect()
    }

    pub fn cluster_size(&self, node: usize) -> Option<usize> {
        self.slot(node).map(|s| self.size[s])
    }

    /// Current linkage between two active clusters, adjacent or not.
    pub fn linkage_between(&self, a: usize, b: usize) -> Option<f64> {
        let (sa, sb) = (self.slot(a)?, self.slot(b)?);
        (sa != sb).then(|| self.linkage(sa.min(sb), sa.max(sb)))
    }

    /// Left and right neighbours of an active cluster under a path constraint.
    pub fn path_neighbors(&self, node: usize) -> Option<(Option<usize>, Option<usize>)> {
        let s = self.slot(node)?;
        match &self.live {
            Live::Path { next, prev } => Some((prev[s].map(|p| self.node[p]), next[s].map(|q| self.node[q]))),
            _ => None,
        }
    }

    /// All pairs allowed to merge now.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::new();
        self.for_each_candidate(|a, b, linkage| {
            out.push(Candidate { left: self.node[a], right: self.node[b], linkage });
        });
        out
    }

    /// The pair the next step will merge.
    pub fn best_candidate(&self) -> Option<Candidate> {
        self.best_slots().map(|(a, b, linkage)| Candidate { left: self.node[a], right: self.node[b], linkage })
    }

    /// Performs one merger; `None` once a single cluster remains.
    pub fn step(&mut self) -> Option<Merger> {
        if self.is_done() {
            return None;
        }
        let (a, b, linkage) = self.best_slots()?;
        self.merge_store(a, b);
        match &mut self.live {
            Live::Unconstrained => {}
            Live::Path { next, prev } => {
                next[a] = next[b];
                if let Some(c) = next[b] {
                    prev[c] = Some(a);
                }
                next[b] = None;
                prev[b] = None;
            }
            Live::Graph(adj) => {
                let moved = std::mem::take(&mut adj[b]);
                for &c in &moved {
                    adj[c].remove(&b);
                    if c != a {
                        adj[c].insert(a);
                        adj[a].insert(c);
                    }
                }
                adj[a].remove(&b);
            }
        }
        let t = self.mergers.len() + 1;
        let id = self.n - 1 + t;
        let merger = Merger { step: t, left: self.node[a], right: self.node[b], linkage, size: self.size[a] + self.size[b] };
        self.slot_of_node[self.node[a]] = None;
        self.slot_of_node[self.node[b]] = None;
        self.slot_of_node[id] = Some(a);
        self.size[a] += self.size[b];
        self.active[b] = false;
        self.node[a] = id;
        self.mergers.push(merger);
        Some(merger)
    }

    /// Runs the remaining steps.
    pub fn finish(mut self) -> MergeTree {
        while self.step().is_some() {}
        MergeTree { n: self.n, mergers: self.mergers }
    }

    fn slot(&self, node: usize) -> Option<usize> {
        self.slot_of_node.get(node).copied().flatten()
    }

    fn linkage(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a < b);
        match &self.store {
            Store::Ward(delta) => delta[condensed_index(self.n, a, b)],
            Store::KernelSums(r) => {
                let n = self.n;
                kernel_ward_linkage(r[a * n + a], r[b * n + b], r[a * n + b], self.size[a], self.size[b])
            }
        }
    }

    fn for_each_candidate(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.live {
            Live::Unconstrained => {
                let slots: Vec<usize> = (0..self.n).filter(|&s| self.active[s]).collect();
                for (i, &a) in slots.iter().enumerate() {
                    for &b in &slots[i + 1..] {
                        f(a, b, self.linkage(a, b));
                    }
                }
            }
            Live::Path { next, .. } => {
                for a in (0..self.n).filter(|&s| self.active[s]) {
                    if let Some(b) = next[a] {
                        f(a, b, self.linkage(a, b));
                    }
                }
            }
            Live::Graph(adj) => {
                for a in (0..self.n).filter(|&s| self.active[s]) {
                    for &b in adj[a].range(a + 1..) {
                        f(a, b, self.linkage(a, b));
                    }
                }
            }
        }
    }

    fn best_slots(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64, (usize, usize))> = None;
        self.for_each_candidate(|a, b, linkage| {
            let (x, y) = (self.node[a], self.node[b]);
            let ids = (x.min(y), x.max(y));
            let better = match best {
                None => true,
                Some((_, _, l, bid)) => linkage < l || (linkage == l && ids < bid),
            };
            if better {
                best = Some((a, b, linkage, ids));
            }
        });
        best.map(|(a, b, l, _)| (a, b, l))
    }

    fn merge_store(&mut self, a: usize, b: usize) {
        let n = self.n;
        match &mut self.store {
            Store::Ward(delta) => {
                let d_ab = delta[condensed_index(n, a, b)];
                for w in 0..n {
                    if !self.active[w] || w == a || w == b {
                        continue;
                    }
                    let iaw = condensed_index(n, a.min(w), a.max(w));
                    let ibw = condensed_index(n, b.min(w), b.max(w));
                    delta[iaw] =
                        lance_williams_update(delta[iaw], delta[ibw], d_ab, self.size[a], self.size[b], self.size[w]);
                }
            }
            Store::KernelSums(r) => {
                let r_aa = r[a * n + a] + r[b * n + b] + 2.0 * r[a * n + b];
                for w in 0..n {
                    if !self.active[w] || w == a || w == b {
                        continue;
                    }
                    let v = r[a * n + w] + r[b * n + w];
                    r[a * n + w] = v;
                    r[w * n + a] = v;
                }
                r[a * n + a] = r_aa;
            }
        }
    }
}

/// Clusters `d` under `constraint` with the Lance-Williams route.
pub fn cluster(d: &DissimilarityMatrix, constraint: Constraint) -> Result<MergeTree> {
    Ok(Agglomeration::new(d, constraint)?.finish())
}

/// Clusters a kernel matrix with sums of kernel entries.
pub fn cluster_kernel(k: &KernelMatrix, constraint: Constraint) -> Result<MergeTree> {
    Ok(Agglomeration::from_kernel(k, constraint)?.finish())
}

/// Clusters a raw similarity matrix with sums of its entries; linkages may be negative.
pub fn cluster_similarity(s: &SimilarityMatrix, constraint: Constraint) -> Result<MergeTree> {
    Ok(Agglomeration::from_similarity(s, constraint)?.finish())
}

/// Unconstrained Ward HAC.
pub fn hac(d: &DissimilarityMatrix) -> Result<MergeTree> {
    cluster(d, Constraint::None)
}

/// Contiguity-constrained HAC; the graph must be connected.
pub fn cchac(d: &DissimilarityMatrix, g: &ContiguityGraph) -> Result<MergeTree> {
    cluster(d, Constraint::Graph(g.clone()))
}

/// Order-constrained HAC: objects `0..n` along a line.
pub fn ochac(d: &DissimilarityMatrix) -> Result<MergeTree> {
    cluster(d, Constraint::Path)
}
