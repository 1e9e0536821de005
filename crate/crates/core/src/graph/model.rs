use alloc::format;
use alloc::vec::Vec;

use super::{adjacency, NodeKind, NUM_NODES};
use crate::chem::{drug_embedding, MolecularGraph, Mpnn};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::ontology::{disease_embedding, CodeId, Gram, Ontology};
use crate::pretrain::{AdmetHead, AdmetProperty, HighwayEncoder, RiskHead};
use crate::protocol::{ProtocolEncoder, SentenceMatrix, DEFAULT_CHANNELS, DEFAULT_KERNELS, SENTENCE_DIM};
use crate::rng::Rng;
use crate::tensor::{ParamId, ParameterStore, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct HintConfig {
    pub dim: usize,
    pub mpnn_depth: usize,
    pub gram_hidden: usize,
    pub sentence_dim: usize,
    pub kernels: Vec<usize>,
    pub channels: usize,
    pub highway_layers: usize,
    pub gcn_layers: usize,
    pub attention_hidden: usize,
    pub dropout: f64,
    /// When false the prediction reads `h_pred` from `H⁽⁰⁾` directly.
    pub use_gnn: bool,
}

impl Default for HintConfig {
    fn default() -> Self {
        HintConfig {
            dim: crate::EMBED_DIM,
            mpnn_depth: crate::chem::MPNN_DEPTH,
            gram_hidden: crate::ontology::GRAM_HIDDEN,
            sentence_dim: SENTENCE_DIM,
            kernels: DEFAULT_KERNELS.to_vec(),
            channels: DEFAULT_CHANNELS,
            highway_layers: crate::pretrain::HIGHWAY_LAYERS,
            gcn_layers: 3,
            attention_hidden: 50,
            dropout: 0.6,
            use_gnn: true,
        }
    }
}

/// Model inputs for one trial. An empty molecule list routes the drug
/// embedding through the imputer.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialInput {
    pub molecules: Vec<MolecularGraph>,
    pub codes: Vec<CodeId>,
    pub inclusion: SentenceMatrix,
    pub exclusion: SentenceMatrix,
}

impl TrialInput {
    pub fn molecule_missing(&self) -> bool {
        self.molecules.is_empty()
    }

    pub fn without_molecules(&self) -> Self {
        TrialInput {
            molecules: Vec::new(),
            ..self.clone()
        }
    }
}

/// `V_ij = σ(w · relu(h_i W_l + h_j W_r + b) + c)` for every ordered pair.
#[derive(Clone, Debug)]
pub struct AttentionNet {
    pub left: Linear,
    pub right: ParamId,
    pub output: Linear,
}

impl AttentionNet {
    pub fn new(store: &mut ParameterStore, path: &str, dim: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        // The first layer sees [h_i ; h_j], so both halves use fan-in 2·dim.
        let bound = 1.0 / crate::math::sqrt((2 * dim) as f64);
        let mut half = |name: &str, rng: &mut Rng| -> Result<ParamId> {
            let data = (0..dim * hidden).map(|_| rng.range(-bound, bound)).collect();
            store.insert(&format!("{path}/hidden/{name}"), Tensor::matrix(dim, hidden, data)?)
        };
        let left_w = half("weight_left", rng)?;
        let right = half("weight_right", rng)?;
        let left = Linear {
            weight: left_w,
            bias: store.bias(&format!("{path}/hidden/bias"), 1, hidden)?,
            in_dim: dim,
            out_dim: hidden,
        };
        Ok(AttentionNet {
            left,
            right,
            output: Linear::new(store, &format!("{path}/output"), hidden, 1, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.left.params();
        p.push(self.right);
        p.extend(self.output.params());
        p
    }

    /// `K × K` attentive matrix for a `K × dim` node matrix.
    pub fn forward(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let k = tape.shape(h)[0];
        let p = self.left.forward(tape, h)?;
        let wr = tape.param(self.right);
        let q = tape.matmul(h, wr)?;
        let pq = tape.pairwise_sum(p, q)?;
        let z = tape.relu(pq);
        let s = self.output.forward(tape, z)?;
        let s = tape.sigmoid(s);
        tape.reshape(s, &[k, k])
    }
}

/// `H⁽ˡ⁾ = relu(B⁽ˡ⁾ + (V ⊙ A) H⁽ˡ⁻¹⁾ W⁽ˡ⁾)`.
#[derive(Clone, Debug)]
pub struct Gcn {
    pub layers: Vec<(ParamId, ParamId)>,
    pub dropout: f64,
}

impl Gcn {
    pub fn new(store: &mut ParameterStore, path: &str, nodes: usize, dim: usize, layers: usize, dropout: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        let layers = (0..layers)
            .map(|l| {
                Ok((
                    store.weight(&format!("{path}/layer{l}/weight"), dim, dim, rng)?,
                    store.bias(&format!("{path}/layer{l}/bias"), nodes, dim)?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Gcn { layers, dropout })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// `mask` is `V ⊙ A`. Inverted dropout on each layer input when `rng` is given.
    pub fn forward(&self, tape: &mut Tape, h0: Var, mask: Var, mut rng: Option<&mut Rng>) -> Result<Var> {
        let mut h = h0;
        for &(w, b) in &self.layers {
            if let (Some(r), true) = (rng.as_deref_mut(), self.dropout > 0.0) {
                h = dropout(tape, h, self.dropout, r)?;
            }
            let w = tape.param(w);
            let b = tape.param(b);
            let hw = tape.matmul(h, w)?;
            let msg = tape.matmul(mask, hw)?;
            let pre = tape.add(msg, b)?;
            h = tape.relu(pre);
        }
        Ok(h)
    }
}

fn dropout(tape: &mut Tape, x: Var, rate: f64, rng: &mut Rng) -> Result<Var> {
    let keep = 1.0 - rate;
    let shape = tape.shape(x).to_vec();
    let n: usize = shape.iter().product();
    let mask = (0..n).map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 }).collect();
    let m = tape.constant(Tensor::new(shape, mask)?);
    tape.mul(x, m)
}

/// `ĥ_m = IMP(h_d, h_p)`.
#[derive(Clone, Debug)]
pub struct Imputer(pub HighwayEncoder);

impl Imputer {
    pub fn forward(&self, tape: &mut Tape, h_d: Var, h_p: Var) -> Result<Var> {
        self.0.forward_concat(tape, &[h_d, h_p])
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.0.params()
    }
}

/// Rows of `H⁽⁰⁾` as tape variables, in node order.
#[derive(Clone, Copy, Debug)]
pub struct NodeRows(pub [Var; NUM_NODES]);

impl NodeRows {
    pub fn get(&self, node: NodeKind) -> Var {
        self.0[node.index()]
    }
}

#[derive(Clone, Debug)]
pub struct HintOutput {
    pub y_hat: Var,
    pub h_d: Var,
    pub h_p: Var,
    /// Drug embedding fed to the graph, observed or imputed.
    pub h_m: Var,
    pub imputed: bool,
    pub rows: NodeRows,
    pub h0: Var,
    pub attention: Option<Var>,
    pub h_final: Var,
}

pub const MOLECULE_PREFIX: &str = "molecule/";
pub const ADMET_PREFIX: &str = "admet/";
pub const DISEASE_PREFIX: &str = "disease/";
pub const RISK_PREFIX: &str = "risk/";
pub const PROTOCOL_PREFIX: &str = "protocol/";
pub const GRAPH_PREFIX: &str = "graph/";
pub const IMPUTER_PREFIX: &str = "imputer/";

#[derive(Clone, Debug)]
pub struct Hint {
    pub config: HintConfig,
    pub mpnn: Mpnn,
    pub admet: Vec<AdmetHead>,
    pub gram: Gram,
    pub risk: RiskHead,
    pub protocol: ProtocolEncoder,
    pub pk: HighwayEncoder,
    pub interaction: HighwayEncoder,
    pub augmented: HighwayEncoder,
    pub prediction: HighwayEncoder,
    pub attention: Option<AttentionNet>,
    pub gcn: Option<Gcn>,
    pub output: Linear,
    pub imputer: Imputer,
    pub adjacency: Tensor,
}

impl Hint {
    /// Registers every parameter in `store`; `num_codes` sizes the GRAM table.
    pub fn new(store: &mut ParameterStore, config: HintConfig, num_codes: usize, rng: &mut Rng) -> Result<Self> {
        let d = config.dim;
        let hl = config.highway_layers;
        let mpnn = Mpnn::new(store, "molecule/mpnn", d, config.mpnn_depth, rng)?;
        let admet = AdmetProperty::ALL
            .iter()
            .map(|&p| AdmetHead::new(store, &format!("admet/{}", p.name()), p, d, rng))
            .collect::<Result<Vec<_>>>()?;
        let gram = Gram::new(store, "disease/gram", num_codes, d, config.gram_hidden, rng)?;
        let risk = RiskHead::new(store, "risk", d, rng)?;
        let protocol = ProtocolEncoder::with_input_dim(store, "protocol", config.sentence_dim, &config.kernels, config.channels, d, rng)?;
        let pk = HighwayEncoder::new(store, "graph/pk", 5 * d, d, hl, rng)?;
        let interaction = HighwayEncoder::new(store, "graph/interaction", 3 * d, d, hl, rng)?;
        let augmented = HighwayEncoder::new(store, "graph/augmented", 2 * d, d, hl, rng)?;
        let prediction = HighwayEncoder::new(store, "graph/prediction", 2 * d, d, hl, rng)?;
        let (attention, gcn) = if config.use_gnn {
            (
                Some(AttentionNet::new(store, "graph/attention", d, config.attention_hidden, rng)?),
                Some(Gcn::new(store, "graph/gcn", NUM_NODES, d, config.gcn_layers, config.dropout, rng)?),
            )
        } else {
            (None, None)
        };
        let output = Linear::new(store, "graph/output", d, 1, rng)?;
        let imputer = Imputer(HighwayEncoder::new(store, "imputer", 2 * d, d, hl, rng)?);
        Ok(Hint {
            config,
            mpnn,
            admet,
            gram,
            risk,
            protocol,
            pk,
            interaction,
            augmented,
            prediction,
            attention,
            gcn,
            output,
            imputer,
            adjacency: adjacency(),
        })
    }

    pub fn num_codes(&self, store: &ParameterStore) -> usize {
        store.get(self.gram.table).rows()
    }

    pub fn imputer_params(&self) -> Vec<ParamId> {
        self.imputer.params()
    }

    /// Everything except the imputer.
    pub fn classifier_params(&self) -> Vec<ParamId> {
        let mut p = self.mpnn.params();
        for h in &self.admet {
            p.extend(h.params());
        }
        p.extend(self.gram.params());
        p.extend(self.risk.params());
        p.extend(self.protocol.params());
        for a in [&self.pk, &self.interaction, &self.augmented, &self.prediction] {
            p.extend(a.params());
        }
        if let Some(a) = &self.attention {
            p.extend(a.params());
        }
        if let Some(g) = &self.gcn {
            p.extend(g.params());
        }
        p.extend(self.output.params());
        p
    }

    pub fn all_params(&self) -> Vec<ParamId> {
        let mut p = self.classifier_params();
        p.extend(self.imputer_params());
        p
    }

    /// `(h_d, h_p, h_m)`; `h_m` is `None` when no molecules are given.
    pub fn embed_inputs(&self, tape: &mut Tape, ontology: &Ontology, input: &TrialInput) -> Result<(Var, Var, Option<Var>)> {
        let h_d = disease_embedding(tape, &self.gram, ontology, &input.codes)?;
        let h_p = self.protocol.embed(tape, &input.inclusion, &input.exclusion)?;
        let h_m = if input.molecules.is_empty() {
            None
        } else {
            Some(drug_embedding(tape, &self.mpnn, &input.molecules)?)
        };
        Ok((h_d, h_p, h_m))
    }

    /// Stacks `H⁽⁰⁾` from the three input embeddings.
    pub fn node_matrix(&self, tape: &mut Tape, h_d: Var, h_m: Var, h_p: Var) -> Result<(Var, NodeRows)> {
        let mut admet = [h_m; 5];
        for (slot, head) in admet.iter_mut().zip(&self.admet) {
            *slot = head.embed(tape, h_m)?;
        }
        let h_r = self.risk.embed(tape, h_d)?;
        let h_pk = self.pk.forward_concat(tape, &admet)?;
        let h_i = self.interaction.forward_concat(tape, &[h_m, h_d, h_p])?;
        let h_v = self.augmented.forward_concat(tape, &[h_r, h_i])?;
        let h_pred = self.prediction.forward_concat(tape, &[h_pk, h_v])?;
        let rows = [
            h_d, h_m, h_p, admet[0], admet[1], admet[2], admet[3], admet[4], h_r, h_pk, h_i, h_v, h_pred,
        ];
        for &r in &rows {
            if !tape.value(r).is_finite() {
                return Err(Error::NonFinite("node embedding"));
            }
        }
        let h0 = tape.concat_rows(&rows)?;
        Ok((h0, NodeRows(rows)))
    }

    /// Runs the graph part from input embeddings; `h_m = None` imputes it.
    pub fn forward_from_embeddings(&self, tape: &mut Tape, h_d: Var, h_p: Var, h_m: Option<Var>, rng: Option<&mut Rng>) -> Result<HintOutput> {
        let (h_m, imputed) = match h_m {
            Some(v) => (v, false),
            None => (self.imputer.forward(tape, h_d, h_p)?, true),
        };
        let (h0, rows) = self.node_matrix(tape, h_d, h_m, h_p)?;
        let (h_final, attention) = match (&self.attention, &self.gcn) {
            (Some(att), Some(gcn)) => {
                let v = att.forward(tape, h0)?;
                let a = tape.constant(self.adjacency.clone());
                let mask = tape.mul(v, a)?;
                (gcn.forward(tape, h0, mask, rng)?, Some(v))
            }
            _ => (h0, None),
        };
        let pred_row = tape.gather_rows(h_final, &[NodeKind::Prediction.index()])?;
        if !tape.value(h_final).is_finite() {
            return Err(Error::NonFinite("graph propagation"));
        }
        let logit = self.output.forward(tape, pred_row)?;
        let y_hat = tape.sigmoid(logit);
        Ok(HintOutput {
            y_hat,
            h_d,
            h_p,
            h_m,
            imputed,
            rows,
            h0,
            attention,
            h_final,
        })
    }

    /// Full forward pass. `rng` enables training-mode dropout.
    pub fn forward(&self, tape: &mut Tape, ontology: &Ontology, input: &TrialInput, rng: Option<&mut Rng>) -> Result<HintOutput> {
        let (h_d, h_p, h_m) = self.embed_inputs(tape, ontology, input)?;
        self.forward_from_embeddings(tape, h_d, h_p, h_m, rng)
    }

    /// Success probability in eval mode.
    pub fn predict(&self, store: &ParameterStore, ontology: &Ontology, input: &TrialInput) -> Result<f64> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, ontology, input, None)?;
        Ok(tape.value(out.y_hat).item())
    }
}
