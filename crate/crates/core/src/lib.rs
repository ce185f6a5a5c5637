//! Ward-linkage hierarchical agglomerative clustering.
//!
//! The crate clusters point sets, dissimilarity matrices, kernel matrices and
//! similarity matrices with Ward's linkage, either unconstrained or under a
//! contiguity constraint (a general graph, or the order along a line). Merge
//! trees can then be inspected through four height definitions, checked for
//! reversals, crossovers and ultrametricity, cut into partitions and compared.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`proximity`] | input data kinds and the conversions between them |
//! | [`engine`] | HAC, contiguity-constrained HAC and order-constrained HAC |
//! | [`heights`] | dendrogram heights, reversals, crossovers, cophenetic matrices |
//! | [`analysis`] | cuts, partition objective, Baker's gamma, NMI, broken stick |
//! | [`simulation`] | seeded perturbation experiment on banded similarity matrices |
//! | [`io`] | text formats used by the command-line tool |
//!
//! ```
//! use wardlink::proximity::{points_to_dissimilarity, Metric, PointSet};
//! use wardlink::engine::hac;
//!
//! let pts = PointSet::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 0.0]]).unwrap();
//! let d = points_to_dissimilarity(&pts, Metric::Euclidean).unwrap();
//! let tree = hac(&d).unwrap();
//! assert_eq!(tree.mergers().len(), 2);
//! assert!((tree.mergers()[0].linkage - 0.5).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod cli;
pub mod engine;
mod error;
pub mod fixtures;
pub mod heights;
pub mod io;
pub mod proximity;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
