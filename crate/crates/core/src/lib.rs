//! Adaptive sampling for least-squares and deep-learning regression on a
//! finite reference grid.
//!
//! The crate builds an orthonormal basis for the span of an arbitrary
//! dictionary of functions known by their values on the grid, derives the
//! induced sampling measures and reciprocal Christoffel weights from that
//! basis, and draws near-optimally allocated samples from it. On top of that
//! it provides a small feedforward network whose penultimate layer serves as
//! an adaptive dictionary, plus a staged experiment driver that compares
//! Christoffel-weighted sampling against uniform Monte Carlo.
//!
//! Module map:
//! - [`test_functions`]: analytic regression targets used by the experiments.
//! - [`sample_grid`]: reference grids and discrete inverse-CDF sampling.
//! - [`subspace`]: scaled-dictionary factorization, numerical dimension,
//!   Christoffel values, weights and induced measures.
//! - [`cas_sampler`]: per-measure sample allocation and the adaptive draw.
//! - [`neural_net`]: the network, exact gradients, Adam, and training loop.
//! - [`checkpoint`]: binary serialization of training state.
//! - [`metrics`]: test errors and the stability constant.
//! - [`experiment_driver`]: staged runs, trial orchestration, aggregation.
//! - [`cli_io`]: config parsing, tabulated targets, CSV/manifest emission.

pub mod cas_sampler;
pub mod checkpoint;
pub mod cli_io;
pub mod error;
pub mod experiment_driver;
pub mod metrics;
pub mod neural_net;
pub mod precision;
pub mod rng;
pub mod sample_grid;
pub mod subspace;
pub mod test_functions;

pub use error::{Error, Result};
