//! Small configurations with known clustering histories.
//!
//! Each one exhibits a particular height pathology and is used by the tests,
//! the acceptance suite and the CLI examples in the README.

use crate::proximity::{points_to_dissimilarity, DissimilarityMatrix, Metric, PointSet};

/// Three points in the plane; order-constrained clustering merges `x1, x2`
/// first and then reaches `x3` at a lower linkage (a crossover).
pub fn crossover_triangle() -> PointSet {
    PointSet::from_rows(&[
        vec![0.0, 0.0],
        vec![0.45 * 0.5_f64.sqrt(), 1.89875_f64.sqrt()],
        vec![0.5_f64.sqrt(), 0.0],
    ])
    .expect("finite coordinates")
}

/// Seven points visited in index order by the path constraint; the constrained
/// 3-cluster partition has a lower within-cluster inertia than the unconstrained one.
pub fn constrained_advantage() -> PointSet {
    PointSet::from_rows(&[
        vec![-2.0, 1.0],
        vec![0.0, 0.0],
        vec![-2.0, -1.0],
        vec![0.0, 4.0],
        vec![3.0, 1.0],
        vec![1.0, 0.0],
        vec![3.0, -1.0],
    ])
    .expect("finite coordinates")
}

fn two_groups(gap: f64) -> PointSet {
    let h = 3.0_f64.sqrt() / 2.0;
    PointSet::from_rows(&[vec![0.5, h], vec![-0.5, h], vec![0.0, -1.0], vec![10.0, 0.0], vec![10.0, gap]])
        .expect("finite coordinates")
}

/// Five points where the inertia of the current merger decreases at step 3.
pub fn merger_inertia_reversal() -> PointSet {
    two_groups(2.16)
}

/// Five points where the average inertia of the current merger decreases at step 3.
pub fn avg_inertia_reversal() -> PointSet {
    two_groups(2.15)
}

/// Non-Euclidean 6x6 dissimilarity on which order-constrained clustering
/// produces a negative linkage and a decreasing error sum of squares.
pub fn ess_reversal() -> DissimilarityMatrix {
    let a = 1.99_f64.sqrt();
    let b = 2.0_f64.sqrt();
    #[rustfmt::skip]
    let full = [
        0.0, a,   a,   a,   0.1, 1.0,
        a,   0.0, b,   a,   0.1, 1.0,
        a,   b,   0.0, b,   0.1, 1.0,
        a,   a,   b,   0.0, b,   1.0,
        0.1, 0.1, 0.1, b,   0.0, b,
        1.0, 1.0, 1.0, 1.0, b,   0.0,
    ];
    DissimilarityMatrix::from_square(6, &full).expect("valid dissimilarity")
}

/// Euclidean dissimilarities of a fixture point set.
pub fn euclidean(points: &PointSet) -> DissimilarityMatrix {
    points_to_dissimilarity(points, Metric::Euclidean).expect("finite coordinates")
}
