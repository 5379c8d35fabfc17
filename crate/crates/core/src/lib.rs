//! Isolation forests with Gaussian-distributed hyperplane normals.
//!
//! Split normals drawn from `N(0, I)` give the extended isolation forest;
//! drawing them from `N(0, A)` or a Gaussian mixture makes the forest more
//! sensitive to deviations along the directions where the normal distribution
//! has large spread. [`sensitivity`] quantifies that effect and [`analysis`]
//! holds the tools used to study fitted forests.
//!
//! ```
//! use aif_core::{analysis::make_blob, Forest, ForestParams, NormalDistribution, SymMatrix};
//!
//! let data = make_blob(500, 2, 1).unwrap();
//! let a = SymMatrix::from_diagonal(&[1.0, 0.05]).unwrap();
//! let dist = NormalDistribution::gaussian(a).unwrap();
//! let params = ForestParams { trees: 50, subsample: 64, ..ForestParams::default() };
//! let forest = Forest::fit(&data, dist, &params).unwrap();
//! assert!(forest.score(&[4.0, 0.0]) > forest.score(&[0.0, 0.0]));
//! ```

pub mod analysis;
pub mod config;
pub mod data;
pub mod error;
pub mod forest;
pub mod linalg;
pub mod sampling;
pub mod sensitivity;

pub use config::{DistributionConfig, RunConfig};
pub use data::Dataset;
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams, Tree};
pub use linalg::SymMatrix;
pub use sampling::{ExtensionLevel, GaussianSpec, MixtureSpec, NormalDistribution, RngStream};
