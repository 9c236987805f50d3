//! Regenerative processes and quantitative checks of their central limit
//! theorems: block harvesting and estimation, exact and Monte Carlo
//! Kolmogorov distances, lattice local limit discrepancies, one-dimensional
//! random walk in random environment analytics and exact mixing
//! coefficients of small Markov chains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod error;
pub mod gaussian;
pub mod lattice;
pub mod llt;
pub mod mixing;
pub mod models;
pub mod quad;
pub mod rates;
pub mod regen;
pub mod rng;
pub mod rwre;
pub mod types;

pub use error::{Error, Result};
pub use gaussian::{phi_cdf, psi_kernel, CovarianceMatrix2};
pub use models::{BlockKind, ModelFactory, ModelSpec, ProcessModel};
pub use regen::{estimate, harvest, HarvestPlan};
pub use rng::{make_stream, SeedSpec, Stream};
pub use types::{BlockEstimates, BlockSample, RatePoint, RateSeries};
