//! Synthetic trials with a planted outcome rule, plus matching ontology,
//! ADMET and disease-risk datasets.
//!
//! Each trial has three binary factors: a molecule carries a terminal
//! chlorine (visible as one fingerprint bit), a disease code belongs to the
//! `C` family, and the inclusion criteria contain a "biomarker positive"
//! sentence. The label is the majority vote of the three, flipped with
//! probability `noise`. Factor probabilities are set per phase so that the
//! noiseless success rate matches the phase prior.

use chrono::{Duration, NaiveDate};
use hint_core::chem::{initial_invariant, AtomFeature, morgan_fingerprint, parse_smiles, Atom, Chirality, FINGERPRINT_BITS};
use hint_core::pretrain::AdmetProperty;
use hint_core::rng::Rng;

use crate::data::{Phase, TrialRecord};
use crate::error::{Error, Result};

/// Molecules with a terminal (degree-1) chlorine.
pub const CHLORO_TEMPLATES: &[&str] = &[
    "Clc1ccc(cc1)C(=O)O",
    "CN1CCN(CC1)c1ccc(Cl)cc1",
    "OC(=O)CCc1ccc(Cl)cc1",
    "Clc1ccc2ncccc2c1",
    "CC(=O)Nc1ccc(Cl)cc1",
    "ClCCN(C)CCCl",
    "COc1ccc(Cl)cc1C(=O)N",
    "NC(=O)C(Cl)c1ccccc1",
    "CC(C)(C)OC(=O)NCCCl",
    "Clc1ncccc1C(=O)NC",
];

pub const PLAIN_TEMPLATES: &[&str] = &[
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "CC(=O)Nc1ccc(O)cc1",
    "OC(=O)c1ccccc1O",
    "CCN(CC)CCNC(=O)c1ccc(N)cc1",
    "COc1ccc(CCN)cc1",
    "CC(C)NCC(O)COc1cccc2ccccc12",
    "Fc1ccc(cc1)C(=O)O",
    "Brc1ccc(N)cc1",
    "CCOC(=O)C1=CC=CC=C1",
    "NCCc1ccc(O)c(O)c1",
];

pub const C_FAMILY_CODES: &[&str] = &["C34.91", "C50.911", "C18.9", "C61", "C25.0", "C71.9", "C43.9", "C22.0"];
pub const OTHER_CODES: &[&str] = &["I10", "E11.9", "J45.909", "D41.20", "G30.9", "F32.9", "M05.9", "K50.90", "N18.3"];

pub const KEYWORD_SENTENCES: &[&str] = &[
    "Documented biomarker positive disease",
    "Tumour must be biomarker positive",
    "Biomarker positive status confirmed by central testing",
];

pub const INCLUSION_SENTENCES: &[&str] = &[
    "Age 18 years or older",
    "ECOG performance status 0 to 1",
    "Adequate bone marrow and organ function",
    "Signed informed consent",
    "Life expectancy of at least 12 weeks",
    "Measurable disease per standard criteria",
    "Willing to use effective contraception",
];

pub const EXCLUSION_SENTENCES: &[&str] = &[
    "Pregnant or breastfeeding women",
    "Prior chemotherapy within 4 weeks",
    "Known hypersensitivity to the study drug",
    "Active uncontrolled infection",
    "Participation in another interventional study",
    "History of severe cardiac disease",
];

fn chapters() -> [(&'static str, &'static str); 9] {
    [
        ("C", "C00-D49"),
        ("D", "C00-D49"),
        ("I", "I00-I99"),
        ("E", "E00-E89"),
        ("J", "J00-J99"),
        ("G", "G00-G99"),
        ("F", "F01-F99"),
        ("M", "M00-M99"),
        ("K", "K00-K95"),
    ]
}

fn chapter_of(category: &str) -> &'static str {
    chapters()
        .into_iter()
        .find(|(p, _)| category.starts_with(p))
        .map_or("N00-N99", |(_, c)| c)
}

/// Parent map: three-character categories under their ICD-10 chapter.
/// Longer codes resolve to their category by dotted-prefix fallback.
pub fn synth_ontology() -> Vec<(String, String)> {
    let mut cats: Vec<&str> = C_FAMILY_CODES.iter().chain(OTHER_CODES).map(|c| &c[..3]).collect();
    cats.sort_unstable();
    cats.dedup();
    cats.into_iter().map(|c| (c.to_string(), chapter_of(c).to_string())).collect()
}

/// Fingerprint bit set by a neutral, degree-1, non-aromatic chlorine.
pub fn designated_bit() -> usize {
    let cl = Atom {
        element: "Cl".into(),
        aromatic: false,
        charge: 0,
        chirality: Chirality::Unspecified,
        hydrogens: None,
        bracket: false,
    };
    (initial_invariant(&AtomFeature::of(&cl, 1)) % FINGERPRINT_BITS as u64) as usize
}

/// Whether any molecule sets the designated bit.
pub fn has_designated_bit(smiles: &[String]) -> Result<bool> {
    let bit = designated_bit();
    for s in smiles {
        let g = parse_smiles(s)?;
        if morgan_fingerprint(&g, 2, FINGERPRINT_BITS).get(bit) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Noiseless success rate for `phase`.
pub fn phase_prior(phase: Phase) -> f64 {
    match phase {
        Phase::I => 0.70,
        Phase::II => 0.33,
        Phase::III | Phase::Indication => 0.30,
    }
}

/// `q` with `P(majority of three Bernoulli(q)) = 3q² − 2q³ = prior`.
pub fn factor_probability(prior: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if 3.0 * mid * mid - 2.0 * mid * mid * mid < prior {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    pub noise: f64,
    pub missing_fraction: f64,
    /// `None` draws phases I–III uniformly.
    pub phase: Option<Phase>,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl SynthConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            seed,
            noise: 0.05,
            missing_fraction: 0.0,
            phase: None,
            start: NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2020, 12, 31).expect("valid date"),
        }
    }
}

fn pick<'a>(rng: &mut Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.below(pool.len())]
}

fn pick_distinct(rng: &mut Rng, pool: &[&str], k: usize) -> Vec<String> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    rng.shuffle(&mut idx);
    idx[..k.min(pool.len())].iter().map(|&i| pool[i].to_string()).collect()
}

/// The planted factors `(molecule, disease, criteria)` of a record.
pub fn factors(record: &TrialRecord) -> Result<(bool, bool, bool)> {
    Ok((
        has_designated_bit(&record.smiles)?,
        record.icd_codes.iter().any(|c| c.starts_with('C')),
        record.inclusion.iter().any(|s| s.to_lowercase().contains("biomarker positive")),
    ))
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<TrialRecord>> {
    if cfg.n == 0 {
        return Err(Error::Input("synthetic dataset size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.noise) || !(0.0..=1.0).contains(&cfg.missing_fraction) {
        return Err(Error::Input("noise and missing fraction must lie in [0, 1]".into()));
    }
    let days = (cfg.end - cfg.start).num_days();
    if days < 0 {
        return Err(Error::Input("synthetic date range is empty".into()));
    }
    let mut rng = Rng::seed(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let phase = cfg.phase.unwrap_or_else(|| [Phase::I, Phase::II, Phase::III][rng.below(3)]);
        let q = factor_probability(phase_prior(phase));
        let (fm, fd, fp) = (rng.bernoulli(q), rng.bernoulli(q), rng.bernoulli(q));

        let n_mol = 1 + rng.below(2);
        let mut smiles = Vec::with_capacity(n_mol);
        for k in 0..n_mol {
            let chloro = fm && (k == 0 || rng.bernoulli(0.5));
            smiles.push(pick(&mut rng, if chloro { CHLORO_TEMPLATES } else { PLAIN_TEMPLATES }).to_string());
        }
        let n_codes = 1 + rng.below(2);
        let mut icd_codes = Vec::with_capacity(n_codes);
        for k in 0..n_codes {
            let c_family = fd && (k == 0 || rng.bernoulli(0.5));
            let code = pick(&mut rng, if c_family { C_FAMILY_CODES } else { OTHER_CODES }).to_string();
            if !icd_codes.contains(&code) {
                icd_codes.push(code);
            }
        }
        let k = 1 + rng.below(3);
        let mut inclusion = pick_distinct(&mut rng, INCLUSION_SENTENCES, k);
        if fp {
            let at = rng.below(inclusion.len() + 1);
            inclusion.insert(at, pick(&mut rng, KEYWORD_SENTENCES).to_string());
        }
        let k = rng.below(4);
        let exclusion = pick_distinct(&mut rng, EXCLUSION_SENTENCES, k);

        let majority = u8::from(fm) + u8::from(fd) + u8::from(fp) >= 2;
        let label = u8::from(majority != rng.bernoulli(cfg.noise));
        let date = cfg.start + Duration::days(rng.below(days as usize + 1) as i64);
        let missing = rng.bernoulli(cfg.missing_fraction);
        out.push(TrialRecord {
            nct_id: format!("NCT{:08}", i + 1),
            phase,
            smiles: if missing { Vec::new() } else { smiles },
            icd_codes,
            inclusion,
            exclusion,
            label,
            registration_date: date,
            molecule_missing: missing,
        });
    }
    Ok(out)
}

fn substructure_rule(property: AdmetProperty, smiles: &str) -> bool {
    match property {
        AdmetProperty::Absorption => smiles.contains("Cl"),
        AdmetProperty::Distribution => smiles.contains('c'),
        AdmetProperty::Metabolism => smiles.contains('N'),
        AdmetProperty::Excretion => smiles.contains("C(=O)O"),
        AdmetProperty::Toxicity => smiles.contains("Cl") || smiles.contains("Br"),
    }
}

/// `(smiles, label)` records for one property, labels from a substructure
/// rule flipped with probability 0.1.
pub fn synth_pk(property: AdmetProperty, n: usize, seed: u64) -> Vec<(String, f64)> {
    let mut rng = Rng::seed(seed ^ (property as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let pool: Vec<&str> = CHLORO_TEMPLATES.iter().chain(PLAIN_TEMPLATES).copied().collect();
    (0..n)
        .map(|_| {
            let s = pick(&mut rng, &pool);
            let y = substructure_rule(property, s) != rng.bernoulli(0.1);
            (s.to_string(), f64::from(u8::from(y)))
        })
        .collect()
}

/// `(codes, label)` records: label 1 when a `C`-family code is present,
/// flipped with probability 0.1.
pub fn synth_risk(n: usize, seed: u64) -> Vec<(Vec<String>, f64)> {
    let mut rng = Rng::seed(seed ^ 0xD1B5_4A32_D192_ED03);
    let pool: Vec<&str> = C_FAMILY_CODES.iter().chain(OTHER_CODES).copied().collect();
    (0..n)
        .map(|_| {
            let k = 1 + rng.below(2);
            let codes = pick_distinct(&mut rng, &pool, k);
            let y = codes.iter().any(|c| c.starts_with('C')) != rng.bernoulli(0.1);
            (codes, f64::from(u8::from(y)))
        })
        .collect()
}
