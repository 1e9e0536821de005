use alloc::vec::Vec;

use super::{CodeId, Ontology};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::rng::Rng;
use crate::tensor::{ParamId, ParameterStore, Tape, Tensor, Var};

pub const GRAM_HIDDEN: usize = 100;

/// Attention over a code and its ancestors:
/// `GRAM(i) = Σ_j α_ji e_j`, `α_·i = softmax_j g1([e_j ; e_i])`, with `g1` a
/// single-hidden-layer tanh network.
#[derive(Clone, Debug)]
pub struct Gram {
    pub table: ParamId,
    pub hidden: Linear,
    pub score: Linear,
    pub dim: usize,
}

impl Gram {
    pub fn new(store: &mut ParameterStore, path: &str, num_codes: usize, dim: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let bound = 1.0 / crate::math::sqrt(dim as f64);
        let data = (0..num_codes * dim).map(|_| rng.range(-bound, bound)).collect();
        let table = store.insert(
            &alloc::format!("{path}/basic_embedding"),
            Tensor::matrix(num_codes, dim, data)?,
        )?;
        Ok(Gram {
            table,
            hidden: Linear::new(store, &alloc::format!("{path}/attention_hidden"), 2 * dim, hidden, rng)?,
            score: Linear::new(store, &alloc::format!("{path}/attention_score"), hidden, 1, rng)?,
            dim,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = alloc::vec![self.table];
        p.extend(self.hidden.params());
        p.extend(self.score.params());
        p
    }

    /// Returns `(embedding 1 × dim, attention 1 × |chain|)`; the chain is the
    /// code followed by its ancestors, nearest first.
    pub fn embed_with_attention(&self, tape: &mut Tape, ontology: &Ontology, code: CodeId) -> Result<(Var, Var)> {
        if code.0 >= ontology.len() {
            return Err(Error::UnknownCode(alloc::format!("#{}", code.0)));
        }
        let rows_available = tape.store().get(self.table).rows();
        let mut chain: Vec<usize> = Vec::with_capacity(4);
        chain.push(code.embedding_index());
        chain.extend(ontology.ancestors(code).into_iter().map(CodeId::embedding_index));
        if let Some(&bad) = chain.iter().find(|&&r| r >= rows_available) {
            return Err(Error::UnknownCode(ontology.codes[bad].code.clone()));
        }
        let table = tape.param(self.table);
        let e = tape.gather_rows(table, &chain)?;
        let own = alloc::vec![code.embedding_index(); chain.len()];
        let ei = tape.gather_rows(table, &own)?;
        let pair = tape.concat_cols(&[e, ei])?;
        let h = self.hidden.forward(tape, pair)?;
        let h = tape.tanh(h);
        let s = self.score.forward(tape, h)?;
        let s = tape.reshape(s, &[1, chain.len()])?;
        let alpha = tape.softmax(s);
        let out = tape.matmul(alpha, e)?;
        Ok((out, alpha))
    }

    pub fn embed(&self, tape: &mut Tape, ontology: &Ontology, code: CodeId) -> Result<Var> {
        self.embed_with_attention(tape, ontology, code).map(|(e, _)| e)
    }
}

/// Mean of the GRAM embeddings of `codes`.
pub fn disease_embedding(tape: &mut Tape, gram: &Gram, ontology: &Ontology, codes: &[CodeId]) -> Result<Var> {
    if codes.is_empty() {
        return Err(Error::Empty("disease embedding needs at least one code"));
    }
    let embs = codes
        .iter()
        .map(|&c| gram.embed(tape, ontology, c))
        .collect::<Result<Vec<_>>>()?;
    if embs.len() == 1 {
        return Ok(embs[0]);
    }
    tape.mean(&embs)
}
