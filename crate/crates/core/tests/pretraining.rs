use hint_core::chem::{drug_embedding, parse_smiles, Mpnn};
use hint_core::ontology::{disease_embedding, Gram, Ontology};
use hint_core::pretrain::{pretrain_admet, pretrain_risk, risk_label, AdmetHead, AdmetProperty, RiskHead};
use hint_core::rng::Rng;
use hint_core::train::FitConfig;
use hint_core::{ParameterStore, Tape};

const CHLORO: [&str; 10] = [
    "ClCC", "CCCl", "Clc1ccccc1", "CC(Cl)C", "OCCCl", "ClC(=O)C", "NCCCl", "Clc1ccc(C)cc1", "CCC(Cl)CC", "ClCCO",
];
const PLAIN: [&str; 10] = ["CCO", "CCN", "c1ccccc1", "CC(=O)O", "CCCC", "OCCO", "NCC(=O)O", "Cc1ccccc1", "CC(C)O", "CCOC"];

fn toy(flip: bool) -> Vec<(String, f64)> {
    CHLORO
        .iter()
        .map(|s| (s, 1.0))
        .chain(PLAIN.iter().map(|s| (s, 0.0)))
        .map(|(s, y)| (s.to_string(), if flip { 1.0 - y } else { y }))
        .collect()
}

fn admet_model(seed: u64) -> (ParameterStore, Mpnn, Vec<AdmetHead>) {
    let mut store = ParameterStore::new(seed);
    let mut rng = Rng::seed(seed);
    let mpnn = Mpnn::new(&mut store, "molecule/mpnn", 100, 3, &mut rng).unwrap();
    let head = AdmetHead::new(&mut store, "admet/absorption", AdmetProperty::Absorption, 100, &mut rng).unwrap();
    (store, mpnn, vec![head])
}

fn admet_predictions(store: &ParameterStore, mpnn: &Mpnn, head: &AdmetHead, data: &[(String, f64)]) -> Vec<f64> {
    data.iter()
        .map(|(s, _)| {
            let mut tape = Tape::new(store);
            let h = drug_embedding(&mut tape, mpnn, &[parse_smiles(s).unwrap()]).unwrap();
            let (_, y) = head.forward(&mut tape, h).unwrap();
            tape.value(y).item()
        })
        .collect()
}

fn train_toy(flip: bool, steps: usize) -> Vec<f64> {
    let (mut store, mpnn, heads) = admet_model(1);
    let data = toy(flip);
    let cfg = FitConfig::new(steps, 5e-4, data.len()).unwrap();
    pretrain_admet(&mut store, &mpnn, &heads, &[(AdmetProperty::Absorption, data.clone())], &cfg, &mut Rng::seed(2)).unwrap();
    admet_predictions(&store, &mpnn, &heads[0], &data)
}

#[test]
fn admet_toy_reaches_high_training_accuracy() {
    let data = toy(false);
    let y = train_toy(false, 200);
    let correct = y.iter().zip(&data).filter(|(p, (_, l))| (**p >= 0.5) == (*l == 1.0)).count();
    assert!(correct as f64 / data.len() as f64 >= 0.95, "{correct}/20");
}

#[test]
fn flipped_labels_mirror_predictions() {
    let a = train_toy(false, 200);
    let b = train_toy(true, 200);
    for (p, q) in a.iter().zip(&b) {
        assert!((p - (1.0 - q)).abs() < 0.05, "{p} vs {q}");
    }
}

#[test]
fn zero_output_heads_predict_one_half_and_probabilities_are_open() {
    let (mut store, mpnn, heads) = admet_model(3);
    let data = toy(false);
    for p in admet_predictions(&store, &mpnn, &heads[0], &data) {
        assert!(p > 0.0 && p < 1.0);
    }
    for id in heads[0].output.params() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    assert!(admet_predictions(&store, &mpnn, &heads[0], &data).iter().all(|&p| p == 0.5));
}

#[test]
fn one_small_step_lowers_a_single_record_loss() {
    let (mut store, mpnn, heads) = admet_model(4);
    let record = vec![("CCCl".to_string(), 1.0)];
    let before = admet_predictions(&store, &mpnn, &heads[0], &record)[0];
    let cfg = FitConfig::new(1, 1e-4, 1).unwrap();
    pretrain_admet(&mut store, &mpnn, &heads, &[(AdmetProperty::Absorption, record.clone())], &cfg, &mut Rng::seed(0)).unwrap();
    let after = admet_predictions(&store, &mpnn, &heads[0], &record)[0];
    assert!(-after.ln() < -before.ln());
}

#[test]
fn empty_or_unparseable_datasets_are_errors() {
    let (mut store, mpnn, heads) = admet_model(5);
    let cfg = FitConfig::new(1, 1e-3, 4).unwrap();
    let mut rng = Rng::seed(0);
    assert!(pretrain_admet(&mut store, &mpnn, &heads, &[(AdmetProperty::Absorption, vec![])], &cfg, &mut rng).is_err());
    let bad = vec![("C(".to_string(), 1.0)];
    assert!(pretrain_admet(&mut store, &mpnn, &heads, &[(AdmetProperty::Absorption, bad)], &cfg, &mut rng).is_err());
    let mixed = vec![("C(".to_string(), 1.0), ("CCO".to_string(), 0.0)];
    let r = pretrain_admet(&mut store, &mpnn, &heads, &[(AdmetProperty::Absorption, mixed)], &cfg, &mut rng).unwrap();
    assert_eq!((r[0].used, r[0].skipped), (1, 1));
}

#[test]
fn pretraining_is_deterministic() {
    let run = || {
        let (mut store, mpnn, heads) = admet_model(6);
        let cfg = FitConfig::new(3, 1e-3, 4).unwrap();
        let r = pretrain_admet(&mut store, &mpnn, &heads, &[(AdmetProperty::Absorption, toy(false))], &cfg, &mut Rng::seed(7)).unwrap();
        r[0].epoch_losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

const C_CODES: [&str; 6] = ["C34.91", "C50.9", "C18.7", "C61", "C25.0", "C71.9"];
const OTHER: [&str; 6] = ["E11.9", "I10", "J45.9", "D41.20", "K50.0", "G30.9"];

fn risk_records(n: usize, seed: u64) -> Vec<(Vec<String>, f64)> {
    let mut rng = Rng::seed(seed);
    let pool: Vec<&str> = C_CODES.iter().chain(&OTHER).copied().collect();
    (0..n)
        .map(|_| {
            let k = 1 + rng.below(2);
            let codes: Vec<String> = (0..k).map(|_| pool[rng.below(pool.len())].to_string()).collect();
            let y = f64::from(u8::from(codes.iter().any(|c| c.starts_with('C'))));
            (codes, y)
        })
        .collect()
}

#[test]
fn risk_head_learns_the_code_family_rule() {
    let mut ontology = Ontology::new();
    for c in C_CODES.iter().chain(&OTHER) {
        ontology.register(c).unwrap();
    }
    let mut store = ParameterStore::new(0);
    let mut rng = Rng::seed(1);
    let gram = Gram::new(&mut store, "disease/gram", ontology.len(), 100, 100, &mut rng).unwrap();
    let head = RiskHead::new(&mut store, "risk", 100, &mut rng).unwrap();

    let initial = {
        let mut zeroed = store.clone();
        for id in head.output.params() {
            zeroed.get_mut(id).data_mut().fill(0.0);
        }
        let mut tape = Tape::new(&zeroed);
        let h = disease_embedding(&mut tape, &gram, &ontology, &[ontology.resolve("C61")]).unwrap();
        let (_, y) = head.forward(&mut tape, h).unwrap();
        tape.value(y).item()
    };
    assert_eq!(initial, 0.5);

    let train = risk_records(500, 2);
    let cfg = FitConfig::new(10, 1e-3, 8).unwrap();
    pretrain_risk(&mut store, &gram, &head, &ontology, &train, &cfg, &mut rng).unwrap();
    let test = risk_records(500, 3);
    let correct = test
        .iter()
        .filter(|(codes, y)| {
            let ids: Vec<_> = codes.iter().map(|c| ontology.resolve(c)).collect();
            let mut tape = Tape::new(&store);
            let h = disease_embedding(&mut tape, &gram, &ontology, &ids).unwrap();
            let (_, p) = head.forward(&mut tape, h).unwrap();
            (tape.value(p).item() >= 0.5) == (*y == 1.0)
        })
        .count();
    assert!(correct as f64 / 500.0 >= 0.9, "{correct}/500");
}

#[test]
fn risk_labels_threshold_rates() {
    assert_eq!(risk_label(1.0).unwrap(), 1.0);
    assert_eq!(risk_label(0.0).unwrap(), 0.0);
    assert_eq!(risk_label(0.5).unwrap(), 1.0);
    assert_eq!(risk_label(0.49).unwrap(), 0.0);
    assert!(risk_label(1.5).is_err());
}
