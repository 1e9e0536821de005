use alloc::format;
use alloc::vec::Vec;

use super::encoder::{SentenceMatrix, SENTENCE_DIM};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::rng::Rng;
use crate::tensor::{ParamId, ParameterStore, Tape, Var};

pub const DEFAULT_KERNELS: [usize; 4] = [1, 3, 5, 7];
pub const DEFAULT_CHANNELS: usize = 25;

/// Convolution banks over sentence matrices followed by one linear layer on
/// `[p_I ; p_E]`. The same banks encode inclusion and exclusion criteria.
#[derive(Clone, Debug)]
pub struct ProtocolEncoder {
    pub banks: Vec<(usize, ParamId, ParamId)>,
    pub channels: usize,
    pub input_dim: usize,
    pub fc: Linear,
}

impl ProtocolEncoder {
    pub fn new(store: &mut ParameterStore, path: &str, kernels: &[usize], channels: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::with_input_dim(store, path, SENTENCE_DIM, kernels, channels, out_dim, rng)
    }

    pub fn with_input_dim(
        store: &mut ParameterStore,
        path: &str,
        input_dim: usize,
        kernels: &[usize],
        channels: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if kernels.is_empty() || channels == 0 {
            return Err(Error::InvalidArgument("protocol encoder needs kernels and channels".into()));
        }
        let mut banks = Vec::with_capacity(kernels.len());
        for &k in kernels {
            if k == 0 || k % 2 == 0 {
                return Err(Error::InvalidArgument(format!("kernel size must be odd and positive, got {k}")));
            }
            let w = store.weight(&format!("{path}/conv{k}/weight"), k * input_dim, channels, rng)?;
            let b = store.bias(&format!("{path}/conv{k}/bias"), 1, channels)?;
            banks.push((k, w, b));
        }
        let fc = Linear::new(store, &format!("{path}/fc"), 2 * kernels.len() * channels, out_dim, rng)?;
        Ok(ProtocolEncoder {
            banks,
            channels,
            input_dim,
            fc,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p: Vec<ParamId> = self.banks.iter().flat_map(|&(_, w, b)| [w, b]).collect();
        p.extend(self.fc.params());
        p
    }

    /// `p = [conv_k1(S) ; … ; conv_k4(S)]` for one sentence matrix.
    pub fn pool(&self, tape: &mut Tape, s: Var) -> Result<Var> {
        let cols = tape.shape(s)[1];
        if cols != self.input_dim {
            return Err(Error::shape("protocol input", tape.shape(s), &[tape.shape(s)[0], self.input_dim]));
        }
        let mut parts = Vec::with_capacity(self.banks.len());
        for &(k, w, b) in &self.banks {
            let (w, b) = (tape.param(w), tape.param(b));
            parts.push(tape.conv1d_max(s, w, b, k)?);
        }
        tape.concat_cols(&parts)
    }

    /// `h_p` (1 × out) from inclusion and exclusion matrices already on the tape.
    pub fn forward(&self, tape: &mut Tape, inclusion: Var, exclusion: Var) -> Result<Var> {
        let pi = self.pool(tape, inclusion)?;
        let pe = self.pool(tape, exclusion)?;
        let p = tape.concat_cols(&[pi, pe])?;
        self.fc.forward(tape, p)
    }

    pub fn embed(&self, tape: &mut Tape, inclusion: &SentenceMatrix, exclusion: &SentenceMatrix) -> Result<Var> {
        let i = tape.constant(inclusion.tensor().clone());
        let e = tape.constant(exclusion.tensor().clone());
        self.forward(tape, i, e)
    }
}
