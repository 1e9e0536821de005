use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::rng::Rng;
use crate::tensor::{ParamId, ParameterStore, Tape, Var};

/// `z = T1(u) ⊙ T2(u) + u ⊙ (1 − T2(u))`, `T1 = relu(u W1 + b1)`,
/// `T2 = sigmoid(u W2 + b2)`.
#[derive(Clone, Debug)]
pub struct HighwayLayer {
    pub transform: Linear,
    pub gate: Linear,
}

impl HighwayLayer {
    pub fn new(store: &mut ParameterStore, path: &str, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(HighwayLayer {
            transform: Linear::new(store, &format!("{path}/transform"), dim, dim, rng)?,
            gate: Linear::new(store, &format!("{path}/gate"), dim, dim, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.transform.params();
        p.extend(self.gate.params());
        p
    }

    pub fn forward(&self, tape: &mut Tape, u: Var) -> Result<Var> {
        let width = self.transform.in_dim;
        if tape.shape(u)[1] != width {
            return Err(Error::shape("highway", tape.shape(u), &[1, width]));
        }
        let t1 = self.transform.forward(tape, u)?;
        let t1 = tape.relu(t1);
        let t2 = self.gate.forward(tape, u)?;
        let t2 = tape.sigmoid(t2);
        let carry = tape.one_minus(t2);
        let a = tape.mul(t1, t2)?;
        let b = tape.mul(u, carry)?;
        tape.add(a, b)
    }
}

#[derive(Clone, Debug)]
pub struct Highway {
    pub layers: Vec<HighwayLayer>,
    pub width: usize,
}

impl Highway {
    pub fn new(store: &mut ParameterStore, path: &str, width: usize, num_layers: usize, rng: &mut Rng) -> Result<Self> {
        let layers = (0..num_layers)
            .map(|i| HighwayLayer::new(store, &format!("{path}/layer{i}"), width, rng))
            .collect::<Result<_>>()?;
        Ok(Highway { layers, width })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(HighwayLayer::params).collect()
    }

    pub fn forward(&self, tape: &mut Tape, mut u: Var) -> Result<Var> {
        for l in &self.layers {
            u = l.forward(tape, u)?;
        }
        Ok(u)
    }
}

/// Linear input map followed by a highway stack; the building block for the
/// ADMET encoders, the aggregation nodes, and the imputer.
#[derive(Clone, Debug)]
pub struct HighwayEncoder {
    pub input: Linear,
    pub highway: Highway,
}

impl HighwayEncoder {
    pub fn new(store: &mut ParameterStore, path: &str, in_dim: usize, width: usize, num_layers: usize, rng: &mut Rng) -> Result<Self> {
        Ok(HighwayEncoder {
            input: Linear::new(store, &format!("{path}/input"), in_dim, width, rng)?,
            highway: Highway::new(store, &format!("{path}/highway"), width, num_layers, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.input.params();
        p.extend(self.highway.params());
        p
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = self.input.forward(tape, x)?;
        self.highway.forward(tape, h)
    }

    /// Concatenates `parts` and encodes them.
    pub fn forward_concat(&self, tape: &mut Tape, parts: &[Var]) -> Result<Var> {
        let x = tape.concat_cols(parts)?;
        self.forward(tape, x)
    }
}
