use hint_core::chem::parse_smiles;
use hint_core::graph::{adjacency, adjacency_from, Hint, HintConfig, NodeKind, TrialInput, EDGES, NUM_NODES};
use hint_core::ontology::Ontology;
use hint_core::protocol::SentenceMatrix;
use hint_core::rng::Rng;
use hint_core::tensor::{grad_check, GradCheckOptions};
use hint_core::train::{TrainConfig, Trainer};
use hint_core::{Gradients, ParamId, ParameterStore, Tape, Tensor};

const DIM: usize = 6;
const SENT: usize = 8;

fn tiny_config() -> HintConfig {
    HintConfig {
        dim: DIM,
        mpnn_depth: 2,
        gram_hidden: 5,
        sentence_dim: SENT,
        kernels: vec![1, 3],
        channels: 2,
        highway_layers: 2,
        gcn_layers: 3,
        attention_hidden: 4,
        dropout: 0.6,
        use_gnn: true,
    }
}

fn ontology() -> Ontology {
    let mut o = Ontology::new();
    for c in ["C34.91", "D41.20", "E11.9"] {
        o.register(c).unwrap();
    }
    o
}

fn jitter(store: &mut ParameterStore, seed: u64, amount: f64) {
    let mut rng = Rng::seed(seed);
    for id in store.all_ids() {
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v += rng.range(-amount, amount));
    }
}

fn build(config: HintConfig, seed: u64) -> (ParameterStore, Hint, Ontology) {
    let o = ontology();
    let mut store = ParameterStore::new(seed);
    let model = Hint::new(&mut store, config, o.len(), &mut Rng::seed(seed)).unwrap();
    (store, model, o)
}

fn sentences(rng: &mut Rng, n: usize) -> SentenceMatrix {
    SentenceMatrix::from_tensor(Tensor::matrix(n, SENT, (0..n * SENT).map(|_| rng.range(-1.0, 1.0)).collect()).unwrap()).unwrap()
}

fn trial(o: &Ontology, seed: u64, smiles: &[&str], codes: &[&str]) -> TrialInput {
    let mut rng = Rng::seed(seed);
    TrialInput {
        molecules: smiles.iter().map(|s| parse_smiles(s).unwrap()).collect(),
        codes: codes.iter().map(|c| o.resolve(c)).collect(),
        inclusion: sentences(&mut rng, 1),
        exclusion: sentences(&mut rng, 2),
    }
}

fn row(t: &Tensor, i: usize) -> Vec<f64> {
    t.row_slice(i).to_vec()
}

#[test]
fn zero_network_and_zero_inputs_give_zero_node_matrix() {
    let (mut store, model, _) = build(tiny_config(), 1);
    for id in store.all_ids() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let mut tape = Tape::new(&store);
    let z = tape.constant(Tensor::zeros(vec![1, DIM]));
    let (h0, _) = model.node_matrix(&mut tape, z, z, z).unwrap();
    assert_eq!(tape.value(h0).shape(), &[NUM_NODES, DIM]);
    assert!(tape.value(h0).data().iter().all(|&v| v == 0.0));
}

#[test]
fn node_rows_follow_their_definitions() {
    let (store, model, _) = build(tiny_config(), 2);
    let mut rng = Rng::seed(3);
    let mut vec = || Tensor::row((0..DIM).map(|_| rng.range(-1.0, 1.0)).collect());
    let (d, m, p, p2) = (vec(), vec(), vec(), vec());

    let mut tape = Tape::new(&store);
    let (vd, vm, vp) = (tape.constant(d.clone()), tape.constant(m.clone()), tape.constant(p));
    let (h0, rows) = model.node_matrix(&mut tape, vd, vm, vp).unwrap();
    let h0 = tape.value(h0).clone();
    let heads: Vec<_> = model.admet.iter().map(|h| h.embed(&mut tape, vm).unwrap()).collect();
    let pk = model.pk.forward_concat(&mut tape, &heads).unwrap();
    assert_eq!(row(&h0, NodeKind::Pharmacokinetics.index()), tape.value(pk).data());
    assert_eq!(tape.value(rows.get(NodeKind::Pharmacokinetics)).data(), tape.value(pk).data());

    let mut tape2 = Tape::new(&store);
    let (vd, vm, vp) = (tape2.constant(d), tape2.constant(m), tape2.constant(p2));
    let (h0b, _) = model.node_matrix(&mut tape2, vd, vm, vp).unwrap();
    let h0b = tape2.value(h0b);
    use NodeKind::*;
    for node in [Protocol, Interaction, Augmented, Prediction] {
        assert_ne!(row(&h0, node.index()), row(h0b, node.index()), "{node:?}");
    }
    for node in [Disease, Molecule, Absorption, Distribution, Metabolism, Excretion, Toxicity, Risk, Pharmacokinetics] {
        assert_eq!(row(&h0, node.index()), row(h0b, node.index()), "{node:?}");
    }
}

#[test]
fn attentive_matrix_range_and_zero_case() {
    let (store, model, o) = build(tiny_config(), 4);
    let input = trial(&o, 5, &["CCO"], &["C34.91"]);
    let mut tape = Tape::new(&store);
    let out = model.forward(&mut tape, &o, &input, None).unwrap();
    let v = tape.value(out.attention.unwrap());
    assert_eq!(v.shape(), &[NUM_NODES, NUM_NODES]);
    assert!(v.data().iter().all(|&x| x > 0.0 && x < 1.0));
    let asym = (0..NUM_NODES).any(|i| (0..NUM_NODES).any(|j| v.get(i, j) != v.get(j, i)));
    assert!(asym);

    let att = model.attention.as_ref().unwrap();
    let mut zeroed = store.clone();
    for id in att.output.params() {
        zeroed.get_mut(id).data_mut().fill(0.0);
    }
    let mut tape = Tape::new(&zeroed);
    let h0 = tape.constant(Tensor::zeros(vec![NUM_NODES, DIM]));
    let v = att.forward(&mut tape, h0).unwrap();
    assert!(tape.value(v).data().iter().all(|&x| x == 0.5));
}

#[test]
fn adjacency_structure() {
    let a = adjacency();
    let deg = |n: NodeKind| (0..NUM_NODES).filter(|&j| a.get(n.index(), j) == 1.0).count();
    assert_eq!(deg(NodeKind::Prediction), 3);
    assert_eq!(a.get(NodeKind::Protocol.index(), NodeKind::Pharmacokinetics.index()), 0.0);
    for i in 0..NUM_NODES {
        assert_eq!(a.get(i, i), 1.0);
    }
}

#[test]
fn gcn_zero_parameters_give_zero() {
    let (mut store, model, _) = build(tiny_config(), 6);
    let gcn = model.gcn.as_ref().unwrap();
    for id in gcn.params() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let mut rng = Rng::seed(1);
    let mut tape = Tape::new(&store);
    let h0 = tape.constant(Tensor::matrix(NUM_NODES, DIM, (0..NUM_NODES * DIM).map(|_| rng.range(-1.0, 1.0)).collect()).unwrap());
    let mask = tape.constant(adjacency());
    let h = gcn.forward(&mut tape, h0, mask, None).unwrap();
    assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
}

#[test]
fn deleting_an_edge_equals_zeroing_its_mask_entry() {
    let (mut store, model, o) = build(tiny_config(), 7);
    jitter(&mut store, 8, 0.1);
    let input = trial(&o, 9, &["CCO"], &["C34.91"]);
    let gcn = model.gcn.as_ref().unwrap();
    for (k, &(u, v)) in EDGES.iter().enumerate() {
        let kept: Vec<_> = EDGES.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &e)| e).collect();
        let mut tape = Tape::new(&store);
        let out = model.forward(&mut tape, &o, &input, None).unwrap();
        let att = out.attention.unwrap();

        let a_del = tape.constant(adjacency_from(&kept));
        let m_del = tape.mul(att, a_del).unwrap();
        let h_del = gcn.forward(&mut tape, out.h0, m_del, None).unwrap();

        let a = tape.constant(adjacency());
        let full = tape.mul(att, a).unwrap();
        let mut zero = Tensor::full(vec![NUM_NODES, NUM_NODES], 1.0);
        zero.data_mut()[u.index() * NUM_NODES + v.index()] = 0.0;
        zero.data_mut()[v.index() * NUM_NODES + u.index()] = 0.0;
        let z = tape.constant(zero);
        let m_zero = tape.mul(full, z).unwrap();
        let h_zero = gcn.forward(&mut tape, out.h0, m_zero, None).unwrap();

        assert!(tape.value(h_del).max_abs_diff(tape.value(h_zero)) <= 1e-9);
        assert!(tape.value(h_del).max_abs_diff(tape.value(out.h_final)) > 0.0, "edge {u:?}-{v:?} had no effect");
    }
}

#[test]
fn zero_output_layer_predicts_one_half() {
    let (mut store, model, o) = build(tiny_config(), 10);
    for id in model.output.params() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let input = trial(&o, 1, &["CCO"], &["E11.9"]);
    assert_eq!(model.predict(&store, &o, &input).unwrap(), 0.5);
}

#[test]
fn zero_imputer_outputs_zero_and_missing_molecules_are_imputed() {
    let (mut store, model, o) = build(tiny_config(), 11);
    for id in model.imputer_params() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let input = trial(&o, 2, &[], &["C34.91"]);
    assert!(input.molecule_missing());
    let mut tape = Tape::new(&store);
    let out = model.forward(&mut tape, &o, &input, None).unwrap();
    assert!(out.imputed);
    assert!(tape.value(out.h_m).data().iter().all(|&v| v == 0.0));
    let y = tape.value(out.y_hat).item();
    assert!(y > 0.0 && y < 1.0);
}

fn unreachable_from_hint_loss(model: &Hint) -> Vec<ParamId> {
    let mut p: Vec<ParamId> = model.admet.iter().flat_map(|h| h.output.params()).collect();
    p.extend(model.risk.output.params());
    p.extend(model.imputer_params());
    p
}

#[test]
fn every_reachable_parameter_gets_a_nonzero_gradient() {
    let (mut store, model, o) = build(HintConfig::default(), 12);
    jitter(&mut store, 13, 0.05);
    let input = trial_full(&o);
    let mut grads = Gradients::new(&store);
    let mut tape = Tape::new(&store);
    let out = model.forward(&mut tape, &o, &input, None).unwrap();
    let loss = tape.bce(out.y_hat, 1.0).unwrap();
    tape.backward(loss, &mut grads).unwrap();
    let skip = unreachable_from_hint_loss(&model);
    for id in model.all_params() {
        if skip.contains(&id) {
            continue;
        }
        let g = grads.get(id).unwrap_or_else(|| panic!("no gradient for {}", store.name(id)));
        assert!(g.iter().any(|&x| x != 0.0), "zero gradient for {}", store.name(id));
    }
}

fn trial_full(o: &Ontology) -> TrialInput {
    use hint_core::protocol::{encode_sentences, CriteriaSet, HashingEncoder};
    let criteria = CriteriaSet::new(
        vec!["Age 18 or older".into(), "Biomarker positive disease".into()],
        vec!["Prior chemotherapy".into()],
    )
    .unwrap();
    let (inclusion, exclusion) = encode_sentences(&criteria, &HashingEncoder::new(0)).unwrap();
    TrialInput {
        molecules: vec![parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap(), parse_smiles("ClCCl").unwrap()],
        codes: vec![o.resolve("C34.91"), o.resolve("D41.20")],
        inclusion,
        exclusion,
    }
}

#[test]
fn eval_forward_is_deterministic() {
    let (store, model, o) = build(HintConfig::default(), 14);
    let input = trial_full(&o);
    let a = model.predict(&store, &o, &input).unwrap();
    let b = model.predict(&store, &o, &input).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn end_to_end_gradient_on_a_tiny_trial() {
    let (mut store, model, o) = build(tiny_config(), 15);
    jitter(&mut store, 16, 0.2);
    let input = trial(&o, 17, &["CO"], &["C34.91"]);
    let r = grad_check(
        &store,
        &[],
        |t, _| {
            let out = model.forward(t, &o, &input, None)?;
            t.bce(out.y_hat, 1.0)
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

fn snapshot(store: &ParameterStore, ids: &[ParamId]) -> Vec<Vec<u64>> {
    ids.iter().map(|&id| store.get(id).data().iter().map(|v| v.to_bits()).collect()).collect()
}

#[test]
fn training_steps_respect_the_freezing_contract() {
    let (mut store, model, o) = build(tiny_config(), 18);
    let complete = trial(&o, 19, &["CCO"], &["C34.91"]);
    let missing = trial(&o, 20, &[], &["D41.20"]);
    let batch = [(&complete, 1.0), (&missing, 0.0)];
    let mut trainer = Trainer::new(&model, TrainConfig::default()).unwrap();
    let imp = model.imputer_params();
    let cls = model.classifier_params();
    for _ in 0..3 {
        let (imp0, cls0) = (snapshot(&store, &imp), snapshot(&store, &cls));
        let (_, cache, n_missing) = trainer.classification_step(&model, &mut store, &o, &batch).unwrap();
        assert_eq!((cache.len(), n_missing), (1, 1));
        assert_eq!(snapshot(&store, &imp), imp0);
        assert_ne!(snapshot(&store, &cls), cls0);

        let (imp1, cls1) = (snapshot(&store, &imp), snapshot(&store, &cls));
        trainer.recovery_step(&model, &mut store, &cache).unwrap().unwrap();
        assert_eq!(snapshot(&store, &cls), cls1);
        assert_ne!(snapshot(&store, &imp), imp1);
    }
}
