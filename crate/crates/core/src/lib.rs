//! Distribution equivalence and structure learning for linear Gaussian
//! directed graphs, cyclic or acyclic.
//!
//! - [`graph`]: graphs, support matrices, SCCs, cycles, SHD.
//! - [`equivalence`]: support rotations, class enumeration, equivalence tests.
//! - [`sem`]: parameterizations, precision factors, sampling, stability.
//! - [`scoring`]: MLE fitting, block-decomposed penalized likelihood, KL fits.
//! - [`search`]: hill climbing and tabu search with virtual-edge moves.
//! - [`evaluation`]: SHD to an equivalence class, multi-domain experiments.
//! - [`optim`]: a small L-BFGS minimizer used by the fitters.

pub mod equivalence;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod optim;
pub mod scoring;
pub mod search;
pub mod sem;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, SupportMatrix};
