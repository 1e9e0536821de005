//! Knowledge-node encoders: highway networks, the five ADMET property heads
//! over the drug embedding and the disease-risk head over the disease
//! embedding, with their pretraining loops.

mod highway;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::chem::{drug_embedding, parse_smiles, MolecularGraph, Mpnn};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::ontology::{disease_embedding, CodeId, Gram, Ontology};
use crate::rng::Rng;
use crate::tensor::{ParamId, ParameterStore, Tape, Var};
use crate::train::{fit, FitConfig};

pub use highway::{Highway, HighwayEncoder, HighwayLayer};

/// Highway depth used by every encoder in the model.
pub const HIGHWAY_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AdmetProperty {
    Absorption,
    Distribution,
    Metabolism,
    Excretion,
    Toxicity,
}

impl AdmetProperty {
    pub const ALL: [AdmetProperty; 5] = [
        AdmetProperty::Absorption,
        AdmetProperty::Distribution,
        AdmetProperty::Metabolism,
        AdmetProperty::Excretion,
        AdmetProperty::Toxicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdmetProperty::Absorption => "absorption",
            AdmetProperty::Distribution => "distribution",
            AdmetProperty::Metabolism => "metabolism",
            AdmetProperty::Excretion => "excretion",
            AdmetProperty::Toxicity => "toxicity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// `h_* = X_*(h_m)`, `ŷ_* = σ(FC(h_*))`.
#[derive(Clone, Debug)]
pub struct AdmetHead {
    pub property: AdmetProperty,
    pub encoder: HighwayEncoder,
    pub output: Linear,
}

impl AdmetHead {
    pub fn new(store: &mut ParameterStore, path: &str, property: AdmetProperty, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(AdmetHead {
            property,
            encoder: HighwayEncoder::new(store, &format!("{path}/encoder"), dim, dim, HIGHWAY_LAYERS, rng)?,
            output: Linear::new(store, &format!("{path}/output"), dim, 1, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.encoder.params();
        p.extend(self.output.params());
        p
    }

    pub fn embed(&self, tape: &mut Tape, h_m: Var) -> Result<Var> {
        self.encoder.forward(tape, h_m)
    }

    /// `(h_*, ŷ_*)`.
    pub fn forward(&self, tape: &mut Tape, h_m: Var) -> Result<(Var, Var)> {
        let h = self.embed(tape, h_m)?;
        let logit = self.output.forward(tape, h)?;
        Ok((h, tape.sigmoid(logit)))
    }
}

/// `h_R = R(h_d)` (two highway layers), `ŷ_R = σ(FC(h_R))`.
#[derive(Clone, Debug)]
pub struct RiskHead {
    pub highway: Highway,
    pub output: Linear,
}

impl RiskHead {
    pub fn new(store: &mut ParameterStore, path: &str, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(RiskHead {
            highway: Highway::new(store, &format!("{path}/highway"), dim, HIGHWAY_LAYERS, rng)?,
            output: Linear::new(store, &format!("{path}/output"), dim, 1, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.highway.params();
        p.extend(self.output.params());
        p
    }

    pub fn embed(&self, tape: &mut Tape, h_d: Var) -> Result<Var> {
        self.highway.forward(tape, h_d)
    }

    pub fn forward(&self, tape: &mut Tape, h_d: Var) -> Result<(Var, Var)> {
        let h = self.embed(tape, h_d)?;
        let logit = self.output.forward(tape, h)?;
        Ok((h, tape.sigmoid(logit)))
    }
}

/// Risk label from an auxiliary value: `0`/`1` are taken as labels, any other
/// value in `[0, 1]` is a historical success rate thresholded at 0.5.
pub fn risk_label(value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidArgument(format!("risk label or rate must lie in [0, 1], got {value}")));
    }
    Ok(if value >= 0.5 { 1.0 } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainReport {
    pub name: String,
    pub used: usize,
    pub skipped: usize,
    pub epoch_losses: Vec<f64>,
}

/// Trains each property head jointly with the shared molecule encoder, one
/// property after another. Records whose SMILES fail to parse are skipped
/// and counted.
pub fn pretrain_admet(
    store: &mut ParameterStore,
    mpnn: &Mpnn,
    heads: &[AdmetHead],
    datasets: &[(AdmetProperty, Vec<(String, f64)>)],
    cfg: &FitConfig,
    rng: &mut Rng,
) -> Result<Vec<PretrainReport>> {
    let mut reports = Vec::new();
    for (property, records) in datasets {
        let head = heads
            .iter()
            .find(|h| h.property == *property)
            .ok_or_else(|| Error::InvalidArgument(format!("no head for {}", property.name())))?;
        if records.is_empty() {
            return Err(Error::Empty("ADMET dataset"));
        }
        let mut items: Vec<(MolecularGraph, f64)> = Vec::with_capacity(records.len());
        let mut skipped = 0;
        for (smiles, label) in records {
            match parse_smiles(smiles) {
                Ok(g) if g.num_atoms() > 0 => items.push((g, *label)),
                _ => skipped += 1,
            }
        }
        if items.is_empty() {
            return Err(Error::Empty("ADMET dataset has no parseable molecules"));
        }
        let mut params = mpnn.params();
        params.extend(head.params());
        let losses = fit(store, &params, &items, cfg, rng, |tape, (g, y)| {
            let h_m = drug_embedding(tape, mpnn, core::slice::from_ref(g))?;
            let (_, y_hat) = head.forward(tape, h_m)?;
            tape.bce(y_hat, *y)
        })?;
        reports.push(PretrainReport {
            name: String::from(property.name()),
            used: items.len(),
            skipped,
            epoch_losses: losses,
        });
    }
    Ok(reports)
}

/// Trains the risk head together with the GRAM tables. Every code must be
/// registered in `ontology`.
pub fn pretrain_risk(
    store: &mut ParameterStore,
    gram: &Gram,
    head: &RiskHead,
    ontology: &Ontology,
    records: &[(Vec<String>, f64)],
    cfg: &FitConfig,
    rng: &mut Rng,
) -> Result<PretrainReport> {
    if records.is_empty() {
        return Err(Error::Empty("risk dataset"));
    }
    let items = resolve_risk_records(ontology, records)?;
    let mut params = gram.params();
    params.extend(head.params());
    let losses = fit(store, &params, &items, cfg, rng, |tape, (codes, y)| {
        let h_d = disease_embedding(tape, gram, ontology, codes)?;
        let (_, y_hat) = head.forward(tape, h_d)?;
        tape.bce(y_hat, *y)
    })?;
    Ok(PretrainReport {
        name: String::from("risk"),
        used: items.len(),
        skipped: 0,
        epoch_losses: losses,
    })
}

pub fn resolve_risk_records(ontology: &Ontology, records: &[(Vec<String>, f64)]) -> Result<Vec<(Vec<CodeId>, f64)>> {
    records
        .iter()
        .map(|(codes, y)| {
            if codes.is_empty() {
                return Err(Error::Empty("risk record has no disease codes"));
            }
            let ids = codes
                .iter()
                .map(|c| ontology.get(c).ok_or_else(|| Error::UnknownCode(c.clone())))
                .collect::<Result<Vec<_>>>()?;
            Ok((ids, *y))
        })
        .collect()
}
