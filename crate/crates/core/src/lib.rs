//! Model core for clinical trial outcome prediction over a hierarchical
//! interaction graph.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: a small reverse-mode autodiff tensor library, molecule
//! parsing and encoders, ontology attention embeddings, criteria-text
//! encoders, the pretraining heads, the 13-node interaction graph network,
//! the training step with missing-molecule imputation, and evaluation metrics.
//!
//! File formats, command-line tooling and synthetic data generation live in
//! the `hint` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chem;
pub mod error;
pub mod graph;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod ontology;
pub mod pretrain;
pub mod protocol;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Gradients, ParamId, ParameterStore, Tape, Tensor, Var};

/// Width of every node embedding in the interaction graph.
pub const EMBED_DIM: usize = 100;
