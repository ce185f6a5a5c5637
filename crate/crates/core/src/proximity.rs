//! Proximity data: point sets, dissimilarity, kernel and similarity matrices.
//!
//! Every clustering run works on squared dissimilarities in the end. Point sets
//! are turned into a [`DissimilarityMatrix`] with a [`Metric`], kernels give
//! the induced distance `d_ij^2 = k_ii + k_jj - 2 k_ij`, and similarity matrices
//! are first turned into kernels by shifting their diagonal (see
//! [`similarity_to_kernel`]).

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Position of the pair `(i, j)`, `i < j`, in a condensed upper-triangular store.
#[inline]
pub fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Length of the condensed store for `n` objects.
#[inline]
pub fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// `n` objects in `p` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    n: usize,
    p: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(n: usize, p: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Input("a point set needs at least one object and one dimension".into()));
        }
        if coords.len() != n * p {
            return Err(Error::Input(format!(
                "expected {} coordinates for {n} points in dimension {p}, found {}",
                n * p,
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite coordinate at object {}, dimension {}",
                pos / p,
                pos % p
            )));
        }
        Ok(PointSet { n, p, coords })
    }

    /// Builds a point set from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Input(format!("row {i} has {} coordinates, expected {p}", r.len())));
        }
        PointSet::new(rows.len(), p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.p..(i + 1) * self.p]
    }

    /// Gram matrix `X X^T`, a kernel whose induced distance is the Euclidean one.
    pub fn gram(&self) -> KernelMatrix {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        KernelMatrix { n, values, checked_psd: false }
    }

    /// Total inertia: sum of squared distances to the center of gravity.
    pub fn inertia(&self) -> f64 {
        let mut total = 0.0;
        for k in 0..self.p {
            let mean = (0..self.n).map(|i| self.row(i)[k]).sum::<f64>() / self.n as f64;
            total += (0..self.n).map(|i| (self.row(i)[k] - mean).powi(2)).sum::<f64>();
        }
        total
    }
}

/// Dissimilarity between rows of a [`PointSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    /// `||x_i - x_j||^(alpha / 2)` with `0 < alpha <= 2`.
    Power(f64),
    Manhattan,
}

/// Symmetric dissimilarities with implicit zero diagonal, condensed storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Checked constructor: values must be finite and non-negative.
    pub fn from_condensed(n: usize, values: Vec<f64>) -> Result<Self> {
        let d = Self::from_condensed_unchecked(n, values)?;
        let report = validate_dissimilarity(&d);
        if !report.is_valid() {
            return Err(Error::Input(report.summary()));
        }
        Ok(d)
    }

    /// Only the length is checked; use [`validate_dissimilarity`] to inspect the values.
    pub fn from_condensed_unchecked(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("a dissimilarity matrix needs at least one object".into()));
        }
        if values.len() != condensed_len(n) {
            return Err(Error::Input(format!(
                "condensed store for n={n} needs {} values, found {}",
                condensed_len(n),
                values.len()
            )));
        }
        Ok(DissimilarityMatrix { n, values })
    }

    /// Builds the matrix from a full square array, checking symmetry and the zero diagonal.
    pub fn from_square(n: usize, full: &[f64]) -> Result<Self> {
        check_square(n, full)?;
        check_symmetric(n, full)?;
        let scale = full.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            if full[i * n + i].abs() > SYMMETRY_RTOL * scale {
                return Err(Error::Input(format!("diagonal entry {i} is {} (expected 0)", full[i * n + i])));
            }
        }
        let mut values = Vec::with_capacity(condensed_len(n));
        for i in 0..n {
            for j in i + 1..n {
                values.push(full[i * n + j]);
            }
        }
        Self::from_condensed_unchecked(n, values)
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

    pub fn squared(&self, i: usize, j: usize) -> f64 {
        let d = self.get(i, j);
        d * d
    }
}

/// Symmetric kernel matrix, stored full.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
    checked_psd: bool,
}

impl KernelMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("a kernel matrix needs at least one object".into()));
        }
        check_square(n, &values)?;
        check_symmetric(n, &values)?;
        Ok(KernelMatrix { n, values, checked_psd: false })
    }

    /// Runs the squared-distance check of [`kernel_to_dissimilarity`] and records it.
    pub fn into_checked(mut self) -> Result<Self> {
        kernel_to_dissimilarity(&self)?;
        self.checked_psd = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True once every induced squared distance has been verified non-negative.
    pub fn checked_psd(&self) -> bool {
        self.checked_psd
    }
}

/// Symmetric similarity matrix with a positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("a similarity matrix needs at least one object".into()));
        }
        check_square(n, &values)?;
        check_symmetric(n, &values)?;
        for i in 0..n {
            let s = values[i * n + i];
            if s <= 0.0 {
                return Err(Error::Input(format!("similarity diagonal entry {i} is {s}, must be > 0")));
            }
        }
        Ok(SimilarityMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Upper-triangle entries (diagonal included), row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i..(i + 1) * n]);
        }
        out
    }

    /// Skips the positive-diagonal check; used for matrices obtained by
    /// permuting the entries of a valid one.
    pub(crate) fn from_symmetric_unchecked(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        SimilarityMatrix { n, values }
    }

    fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }
}

const SYMMETRY_RTOL: f64 = 1e-9;

fn check_square(n: usize, full: &[f64]) -> Result<()> {
    if full.len() != n * n {
        return Err(Error::Input(format!("expected {n}x{n} = {} values, found {}", n * n, full.len())));
    }
    if let Some(pos) = full.iter().position(|x| !x.is_finite()) {
        return Err(Error::Input(format!("non-finite entry at ({}, {})", pos / n, pos % n)));
    }
    Ok(())
}

fn check_symmetric(n: usize, full: &[f64]) -> Result<()> {
    let scale = full.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (full[i * n + j], full[j * n + i]);
            if (a - b).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::Input(format!("matrix is not symmetric at ({i}, {j}): {a} vs {b}")));
            }
        }
    }
    Ok(())
}

pub fn points_to_dissimilarity(pts: &PointSet, metric: Metric) -> Result<DissimilarityMatrix> {
    if let Metric::Power(alpha) = metric {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Parameter(format!("power exponent alpha must lie in (0, 2], got {alpha}")));
        }
    }
    let n = pts.n();
    let mut values = Vec::with_capacity(condensed_len(n));
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (pts.row(i), pts.row(j));
            let d = match metric {
                Metric::Euclidean => euclidean(a, b),
                Metric::Power(alpha) if alpha == 2.0 => euclidean(a, b),
                Metric::Power(alpha) => euclidean(a, b).powf(alpha / 2.0),
                Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            };
            values.push(d);
        }
    }
    DissimilarityMatrix::from_condensed(n, values)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Tolerance below zero accepted for induced squared distances.
pub fn kernel_tolerance(k: &KernelMatrix) -> f64 {
    let max_diag = (0..k.n()).map(|i| k.get(i, i).abs()).fold(0.0, f64::max);
    1e-9 * max_diag
}

/// Distance induced by a kernel, `d_ij = sqrt(k_ii + k_jj - 2 k_ij)`.
///
/// Squared distances in `[-tol, 0)` are clamped to zero; anything more negative
/// means the matrix is not a kernel (a similarity needs its diagonal shifted).
pub fn kernel_to_dissimilarity(k: &KernelMatrix) -> Result<DissimilarityMatrix> {
    let n = k.n();
    let tol = kernel_tolerance(k);
    let mut values = Vec::with_capacity(condensed_len(n));
    for i in 0..n {
        for j in i + 1..n {
            let sq = k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j);
            if sq < -tol {
                return Err(Error::NotKernel { i, j, value: sq });
            }
            values.push(sq.max(0.0).sqrt());
        }
    }
    DissimilarityMatrix::from_condensed(n, values)
}

/// How the diagonal shift turning a similarity into a kernel is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaStrategy {
    /// Gershgorin bound on the smallest eigenvalue; no eigensolve.
    Gershgorin,
    /// Smallest eigenvalue from a symmetric eigensolve.
    ExactEigen,
    Fixed(f64),
}

impl std::str::FromStr for LambdaStrategy {
    type Err = Error;

    /// `gershgorin`, `exact_eigen` or `fixed:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gershgorin" => Ok(LambdaStrategy::Gershgorin),
            "exact_eigen" | "exact" => Ok(LambdaStrategy::ExactEigen),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .map(LambdaStrategy::Fixed)
                .ok_or_else(|| Error::Parameter(format!("unknown lambda strategy {s:?}"))),
        }
    }
}

/// Small extra shift added on top of the computed one.
pub fn shift_epsilon(s: &SimilarityMatrix) -> f64 {
    1e-8 * s.max_diagonal()
}

/// Adds `lambda` to the diagonal of `s` so that it becomes a valid kernel.
///
/// Returns the kernel together with the shift actually used. Ward linkages on
/// the shifted matrix are those of the raw similarity plus `lambda`, so merge
/// orders are unaffected.
pub fn similarity_to_kernel(s: &SimilarityMatrix, strategy: LambdaStrategy) -> Result<(KernelMatrix, f64)> {
    let n = s.n();
    let lambda = match strategy {
        LambdaStrategy::Fixed(l) => {
            if !l.is_finite() {
                return Err(Error::Parameter(format!("diagonal shift must be finite, got {l}")));
            }
            l
        }
        LambdaStrategy::Gershgorin => {
            let bound = (0..n)
                .map(|i| {
                    let radius: f64 = (0..n).filter(|&j| j != i).map(|j| s.get(i, j).abs()).sum();
                    radius - s.get(i, i)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            bound.max(0.0) + shift_epsilon(s)
        }
        LambdaStrategy::ExactEigen => {
            let min_eig = smallest_eigenvalue(n, s.values());
            (-min_eig).max(0.0) + shift_epsilon(s)
        }
    };
    let mut values = s.values().to_vec();
    for i in 0..n {
        values[i * n + i] += lambda;
    }
    let kernel = KernelMatrix { n, values, checked_psd: false }.into_checked()?;
    Ok((kernel, lambda))
}

/// Smallest eigenvalue of a symmetric matrix (row-major, `n x n`).
pub fn smallest_eigenvalue(n: usize, values: &[f64]) -> f64 {
    DMatrix::from_row_slice(n, n, values).symmetric_eigenvalues().min()
}

/// Findings from [`validate_dissimilarity`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub n: usize,
    /// Pairs `(i, j)`, `i < j`, holding NaN or infinite values.
    pub non_finite: Vec<(usize, usize)>,
    /// Pairs `(i, j, value)` holding negative values.
    pub negative: Vec<(usize, usize, f64)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.non_finite.is_empty() && self.negative.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if let Some(&(i, j)) = self.non_finite.first() {
            parts.push(format!("{} non-finite entries (first at ({i}, {j}))", self.non_finite.len()));
        }
        if let Some(&(i, j, v)) = self.negative.first() {
            parts.push(format!("{} negative entries (first d({i}, {j}) = {v})", self.negative.len()));
        }
        if parts.is_empty() {
            "valid".to_string()
        } else {
            parts.join("; ")
        }
    }
}

pub fn validate_dissimilarity(d: &DissimilarityMatrix) -> ValidationReport {
    let n = d.n();
    let mut report = ValidationReport { n, ..Default::default() };
    for i in 0..n {
        for j in i + 1..n {
            let v = d.values[condensed_index(n, i, j)];
            if !v.is_finite() {
                report.non_finite.push((i, j));
            } else if v < 0.0 {
                report.negative.push((i, j, v));
            }
        }
    }
    report
}
