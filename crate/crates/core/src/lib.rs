//! Mining multipole linear relationships from multivariate time series.
//!
//! A multipole is a set of at least three standardized variables whose
//! correlation submatrix has a small smallest eigenvalue (high linear
//! dependence) and where every member is needed for that dependence (high
//! linear gain). Candidates are found as cliques of a signed correlation
//! graph, broken down into multipoles and reduced to the maximal ones.

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod measures;
pub mod miner;
pub mod rng;
pub mod stats;

pub use dataset::{CorrelationMatrix, TimeSeriesDataset};
pub use error::{Error, Result};
pub use measures::{MultipoleRecord, SignedSet};
pub use miner::MinerConfig;
