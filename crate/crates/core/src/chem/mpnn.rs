use alloc::vec::Vec;

use super::{MolecularGraph, ATOM_FEATURE_DIM, BOND_FEATURE_DIM};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::rng::Rng;
use crate::tensor::{ParameterStore, Tape, Tensor, Var};

pub const MPNN_DEPTH: usize = 3;

/// Bond-conditioned message passing over atom states.
///
/// ```text
/// h0_v     = ReLU(W_in x_v + b_in)
/// m_{u→v}  = ReLU(W_msg [h_u ; e_uv] + b_msg)
/// h_v     ← h0_v + Σ_u m_{u→v}          (repeated `depth` times)
/// out      = mean_v h_v
/// ```
#[derive(Clone, Debug)]
pub struct Mpnn {
    pub input: Linear,
    pub message: Linear,
    pub depth: usize,
    pub hidden: usize,
}

struct EdgeList {
    src: Vec<usize>,
    dst: Vec<usize>,
    features: Tensor,
}

fn directed_edges(g: &MolecularGraph) -> Option<EdgeList> {
    if g.bonds().is_empty() {
        return None;
    }
    let mut src = Vec::with_capacity(2 * g.bonds().len());
    let mut dst = Vec::with_capacity(2 * g.bonds().len());
    let mut feats = Vec::with_capacity(2 * g.bonds().len() * BOND_FEATURE_DIM);
    for (k, b) in g.bonds().iter().enumerate() {
        let f = g.bond_feature(k);
        for (u, v) in [(b.a, b.b), (b.b, b.a)] {
            src.push(u);
            dst.push(v);
            feats.extend(f.bits().iter().map(|&x| x as f64));
        }
    }
    let features = Tensor::from_parts(alloc::vec![src.len(), BOND_FEATURE_DIM], feats);
    Some(EdgeList { src, dst, features })
}

impl Mpnn {
    pub fn new(store: &mut ParameterStore, path: &str, hidden: usize, depth: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Mpnn {
            input: Linear::new(store, &alloc::format!("{path}/input"), ATOM_FEATURE_DIM, hidden, rng)?,
            message: Linear::new(
                store,
                &alloc::format!("{path}/message"),
                hidden + BOND_FEATURE_DIM,
                hidden,
                rng,
            )?,
            depth,
            hidden,
        })
    }

    pub fn params(&self) -> alloc::vec::Vec<crate::tensor::ParamId> {
        let mut p = self.input.params();
        p.extend(self.message.params());
        p
    }

    /// Molecule embedding, `1 × hidden`.
    pub fn encode(&self, tape: &mut Tape, g: &MolecularGraph) -> Result<Var> {
        if g.num_atoms() == 0 {
            return Err(Error::Empty("molecular graph has no atoms"));
        }
        let x = tape.constant(g.atom_feature_matrix());
        let pre = self.input.forward(tape, x)?;
        let h0 = tape.relu(pre);
        let mut h = h0;
        if let Some(edges) = directed_edges(g) {
            let e = tape.constant(edges.features);
            for _ in 0..self.depth {
                let hs = tape.gather_rows(h, &edges.src)?;
                let z = tape.concat_cols(&[hs, e])?;
                let m = self.message.forward(tape, z)?;
                let m = tape.relu(m);
                let agg = tape.scatter_add_rows(m, &edges.dst, g.num_atoms())?;
                h = tape.add(h0, agg)?;
            }
        }
        Ok(tape.mean_rows(h))
    }
}

/// Mean of per-molecule embeddings.
pub fn drug_embedding(tape: &mut Tape, encoder: &Mpnn, molecules: &[MolecularGraph]) -> Result<Var> {
    if molecules.is_empty() {
        return Err(Error::Empty("drug embedding needs at least one molecule"));
    }
    let embs = molecules
        .iter()
        .map(|m| encoder.encode(tape, m))
        .collect::<Result<Vec<_>>>()?;
    if embs.len() == 1 {
        return Ok(embs[0]);
    }
    tape.mean(&embs)
}
