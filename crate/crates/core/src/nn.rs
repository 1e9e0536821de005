//! Fully connected layer shared by every network in the model.

use alloc::format;
use alloc::vec::Vec;

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{ParamId, ParameterStore, Tape, Var};

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Registers `{path}/weight` (`in × out`) and `{path}/bias` (`1 × out`).
    pub fn new(store: &mut ParameterStore, path: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        let weight = store.weight(&format!("{path}/weight"), in_dim, out_dim, rng)?;
        let bias = store.bias(&format!("{path}/bias"), 1, out_dim)?;
        Ok(Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        alloc::vec![self.weight, self.bias]
    }

    /// `x · W + b` for an `n × in` input.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}
