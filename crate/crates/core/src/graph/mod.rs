//! The 13-node interaction graph, the attentive GCN over it, and the full
//! trial model assembled from every encoder.

mod model;

pub use model::{
    AttentionNet, Gcn, Hint, HintConfig, HintOutput, Imputer, NodeRows, TrialInput, ADMET_PREFIX, DISEASE_PREFIX, GRAPH_PREFIX,
    IMPUTER_PREFIX, MOLECULE_PREFIX, PROTOCOL_PREFIX, RISK_PREFIX,
};

use crate::tensor::Tensor;

pub const NUM_NODES: usize = 13;

/// Node order of the embedding matrix `H⁽⁰⁾`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Disease,
    Molecule,
    Protocol,
    Absorption,
    Distribution,
    Metabolism,
    Excretion,
    Toxicity,
    Risk,
    Pharmacokinetics,
    Interaction,
    Augmented,
    Prediction,
}

use NodeKind::*;

pub const NODE_ORDER: [NodeKind; NUM_NODES] = [
    Disease,
    Molecule,
    Protocol,
    Absorption,
    Distribution,
    Metabolism,
    Excretion,
    Toxicity,
    Risk,
    Pharmacokinetics,
    Interaction,
    Augmented,
    Prediction,
];

pub const EDGES: [(NodeKind, NodeKind); 18] = [
    (Molecule, Absorption),
    (Molecule, Distribution),
    (Molecule, Metabolism),
    (Molecule, Excretion),
    (Molecule, Toxicity),
    (Disease, Risk),
    (Molecule, Interaction),
    (Disease, Interaction),
    (Protocol, Interaction),
    (Absorption, Pharmacokinetics),
    (Distribution, Pharmacokinetics),
    (Metabolism, Pharmacokinetics),
    (Excretion, Pharmacokinetics),
    (Toxicity, Pharmacokinetics),
    (Risk, Augmented),
    (Interaction, Augmented),
    (Pharmacokinetics, Prediction),
    (Augmented, Prediction),
];

impl NodeKind {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Disease => "d",
            Molecule => "m",
            Protocol => "p",
            Absorption => "A",
            Distribution => "D",
            Metabolism => "M",
            Excretion => "E",
            Toxicity => "T",
            Risk => "R",
            Pharmacokinetics => "PK",
            Interaction => "I",
            Augmented => "V",
            Prediction => "pred",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        NODE_ORDER.into_iter().find(|n| n.name() == s)
    }
}

/// Symmetric 0/1 adjacency over [`NODE_ORDER`] with self-loops.
pub fn adjacency() -> Tensor {
    adjacency_from(&EDGES)
}

pub fn adjacency_from(edges: &[(NodeKind, NodeKind)]) -> Tensor {
    let mut a = Tensor::identity(NUM_NODES);
    for &(u, v) in edges {
        let (i, j) = (u.index(), v.index());
        a.data_mut()[i * NUM_NODES + j] = 1.0;
        a.data_mut()[j * NUM_NODES + i] = 1.0;
    }
    a
}
