//! Node-level differentially private training for message-passing GNNs.
//!
//! The crate is organised around the training pipeline:
//!
//! - [`graph`]: directed graph model, file I/O and synthetic generators.
//! - [`sampler`]: HeterPoisson sub-graph sampling with degree-inverse
//!   neighbour sampling and central/peripheral overlap nulling.
//! - [`noise`]: symmetric multivariate Laplace (SML) and Gaussian noise.
//! - [`accountant`]: Rényi-DP accounting for the sampled mechanism, DP
//!   conversion, noise calibration and the private-embedding precision bound.
//! - [`gnn`]: one-layer GCN / GIN / SAGE models with a linear head and a
//!   hand-written backward pass.
//! - [`trainer`]: the private training loop, evaluation and the
//!   node-impact experiment.
//! - [`audit`]: white-box auditing with Dirac gradient canaries.
//!
//! With the default `parallel` feature the data-parallel inner loops run on
//! rayon; without it they run sequentially and produce identical results.

// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod audit;
mod error;
pub mod gnn;
pub mod graph;
pub mod noise;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId, NodeSplit};
