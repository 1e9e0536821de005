use hint_core::chem::{drug_embedding, parse_smiles, Mpnn};
use hint_core::ontology::{disease_embedding, Gram, Ontology};
use hint_core::pretrain::{Highway, HighwayLayer};
use hint_core::protocol::ProtocolEncoder;
use hint_core::rng::Rng;
use hint_core::tensor::{grad_check, GradCheckOptions};
use hint_core::{ParameterStore, Tape, Tensor, Var};

fn zero_all(store: &mut ParameterStore) {
    for id in store.all_ids() {
        store.get_mut(id).data_mut().fill(0.0);
    }
}

fn value(store: &ParameterStore, f: impl FnOnce(&mut Tape) -> Var) -> Tensor {
    let mut tape = Tape::new(store);
    let v = f(&mut tape);
    tape.value(v).clone()
}

fn mpnn() -> (ParameterStore, Mpnn) {
    let mut store = ParameterStore::new(0);
    let m = Mpnn::new(&mut store, "mpnn", 100, 3, &mut Rng::seed(1)).unwrap();
    (store, m)
}

#[test]
fn mpnn_zero_parameters_give_zero_embedding() {
    let (mut store, m) = mpnn();
    zero_all(&mut store);
    let g = parse_smiles("CC(=O)O").unwrap();
    let e = value(&store, |t| m.encode(t, &g).unwrap());
    assert_eq!(e.shape(), &[1, 100]);
    assert!(e.data().iter().all(|&v| v == 0.0));
}

#[test]
fn mpnn_single_atom_is_the_transformed_feature() {
    let (store, m) = mpnn();
    let g = parse_smiles("O").unwrap();
    let e = value(&store, |t| m.encode(t, &g).unwrap());
    let expect = value(&store, |t| {
        let x = t.constant(g.atom_feature_matrix());
        let pre = m.input.forward(t, x).unwrap();
        t.relu(pre)
    });
    assert_eq!(e, expect);
}

#[test]
fn mpnn_is_invariant_to_atom_order() {
    let (store, m) = mpnn();
    let g = parse_smiles("CCO").unwrap();
    let base = value(&store, |t| m.encode(t, &g).unwrap());
    for perm in [[2, 1, 0], [1, 0, 2], [0, 2, 1]] {
        let p = g.permuted(&perm).unwrap();
        let e = value(&store, |t| m.encode(t, &p).unwrap());
        assert!(e.max_abs_diff(&base) < 1e-12);
    }
}

#[test]
fn drug_embedding_is_a_mean() {
    let (store, m) = mpnn();
    let a = parse_smiles("CCO").unwrap();
    let b = parse_smiles("c1ccccc1Cl").unwrap();
    let ea = value(&store, |t| m.encode(t, &a).unwrap());
    let eb = value(&store, |t| m.encode(t, &b).unwrap());
    let one = value(&store, |t| drug_embedding(t, &m, std::slice::from_ref(&a)).unwrap());
    assert_eq!(one, ea);
    let twice = value(&store, |t| drug_embedding(t, &m, &[a.clone(), a.clone()]).unwrap());
    assert!(twice.max_abs_diff(&ea) < 1e-15);
    let mean = value(&store, |t| drug_embedding(t, &m, &[a.clone(), b.clone()]).unwrap());
    for j in 0..100 {
        assert!((mean.data()[j] - 0.5 * (ea.data()[j] + eb.data()[j])).abs() < 1e-15);
    }
    let mut tape = Tape::new(&store);
    assert!(drug_embedding(&mut tape, &m, &[]).is_err());
}

#[test]
fn mpnn_gradient_on_a_five_atom_molecule() {
    let mut store = ParameterStore::new(0);
    let m = Mpnn::new(&mut store, "mpnn", 8, 3, &mut Rng::seed(4)).unwrap();
    let g = parse_smiles("CC(N)C=O").unwrap();
    assert_eq!(g.num_atoms(), 5);
    let r = grad_check(
        &store,
        &[],
        |t, _| {
            let e = m.encode(t, &g)?;
            let s = t.sigmoid(e);
            Ok(t.sum(s))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

fn gram(dim: usize) -> (ParameterStore, Gram, Ontology) {
    let ontology = Ontology::from_parent_map([("C34", "C00-D49"), ("D41", "C00-D49"), ("D41.20", "D41.2")]).unwrap();
    let mut ontology = ontology;
    for c in ["C34.91", "D41.20"] {
        ontology.register(c).unwrap();
    }
    let mut store = ParameterStore::new(0);
    let g = Gram::new(&mut store, "gram", ontology.len(), dim, 16, &mut Rng::seed(2)).unwrap();
    (store, g, ontology)
}

#[test]
fn gram_root_returns_its_own_embedding() {
    let (store, g, o) = gram(8);
    let root = o.get("C00-D49").unwrap();
    let mut tape = Tape::new(&store);
    let (e, alpha) = g.embed_with_attention(&mut tape, &o, root).unwrap();
    assert_eq!(tape.value(alpha).data(), &[1.0]);
    let row = store.get(g.table).row_slice(root.embedding_index()).to_vec();
    assert_eq!(tape.value(e).data(), row.as_slice());
}

#[test]
fn gram_equal_basic_embeddings_are_reproduced() {
    let (mut store, g, o) = gram(8);
    let t = store.get_mut(g.table);
    for (j, v) in t.data_mut().iter_mut().enumerate() {
        *v = 0.1 * (j % 8) as f64;
    }
    let code = o.get("D41.20").unwrap();
    let e = value(&store, |t| g.embed(t, &o, code).unwrap());
    for (j, v) in e.data().iter().enumerate() {
        assert!((v - 0.1 * j as f64).abs() < 1e-12);
    }
}

#[test]
fn disease_embedding_mean_rules() {
    let (store, g, o) = gram(8);
    let a = o.get("C34.91").unwrap();
    let b = o.get("D41.20").unwrap();
    let ea = value(&store, |t| g.embed(t, &o, a).unwrap());
    let eb = value(&store, |t| g.embed(t, &o, b).unwrap());
    assert_eq!(value(&store, |t| disease_embedding(t, &g, &o, &[a]).unwrap()), ea);
    let dup = value(&store, |t| disease_embedding(t, &g, &o, &[a, a]).unwrap());
    assert!(dup.max_abs_diff(&ea) < 1e-15);
    let two = value(&store, |t| disease_embedding(t, &g, &o, &[a, b]).unwrap());
    for j in 0..8 {
        assert!((two.data()[j] - 0.5 * (ea.data()[j] + eb.data()[j])).abs() < 1e-15);
    }
    let mut tape = Tape::new(&store);
    assert!(disease_embedding(&mut tape, &g, &o, &[]).is_err());
}

#[test]
fn gram_gradient_through_table_and_attention() {
    let (store, g, o) = gram(6);
    let code = o.get("D41.20").unwrap();
    let r = grad_check(
        &store,
        &[],
        |t, _| {
            let e = g.embed(t, &o, code)?;
            let s = t.sigmoid(e);
            Ok(t.sum(s))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

fn layer(dim: usize, gate_bias: f64) -> (ParameterStore, HighwayLayer) {
    let mut store = ParameterStore::new(0);
    let l = HighwayLayer::new(&mut store, "hw", dim, &mut Rng::seed(6)).unwrap();
    store.get_mut(l.gate.bias).data_mut().fill(gate_bias);
    (store, l)
}

#[test]
fn highway_gate_limits() {
    let mut rng = Rng::seed(8);
    let u = Tensor::row((0..10).map(|_| rng.range(-2.0, 2.0)).collect());
    let (closed, l) = layer(10, -30.0);
    let z = value(&closed, |t| {
        let x = t.constant(u.clone());
        l.forward(t, x).unwrap()
    });
    assert!(z.max_abs_diff(&u) < 1e-6);

    let (open, l) = layer(10, 30.0);
    let z = value(&open, |t| {
        let x = t.constant(u.clone());
        l.forward(t, x).unwrap()
    });
    let t1 = value(&open, |t| {
        let x = t.constant(u.clone());
        let y = l.transform.forward(t, x).unwrap();
        t.relu(y)
    });
    assert!(z.max_abs_diff(&t1) < 1e-6);
}

#[test]
fn highway_zero_input_zero_bias_is_zero() {
    let mut store = ParameterStore::new(0);
    let h = Highway::new(&mut store, "hw", 10, 2, &mut Rng::seed(1)).unwrap();
    let z = value(&store, |t| {
        let x = t.constant(Tensor::zeros(vec![1, 10]));
        h.forward(t, x).unwrap()
    });
    assert!(z.data().iter().all(|&v| v == 0.0));
}

#[test]
fn highway_stack_gradient() {
    let mut store = ParameterStore::new(0);
    let h = Highway::new(&mut store, "hw", 6, 2, &mut Rng::seed(3)).unwrap();
    let mut rng = Rng::seed(4);
    for id in store.all_ids() {
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v += rng.range(-0.5, 0.5));
    }
    let u = Tensor::row((0..6).map(|_| rng.range(-2.0, 2.0)).collect());
    let r = grad_check(
        &store,
        &[u],
        |t, v| {
            let z = h.forward(t, v[0])?;
            let s = t.mul(z, z)?;
            Ok(t.sum(s))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

fn protocol(input_dim: usize, kernels: &[usize]) -> (ParameterStore, ProtocolEncoder) {
    let mut store = ParameterStore::new(0);
    let p = ProtocolEncoder::with_input_dim(&mut store, "protocol", input_dim, kernels, 5, 10, &mut Rng::seed(7)).unwrap();
    (store, p)
}

#[test]
fn protocol_zero_inputs_zero_biases_give_zero() {
    let (store, p) = protocol(12, &[1, 3, 5, 7]);
    let h = value(&store, |t| {
        let i = t.constant(Tensor::zeros(vec![3, 12]));
        let e = t.constant(Tensor::zeros(vec![1, 12]));
        p.forward(t, i, e).unwrap()
    });
    assert_eq!(h.shape(), &[1, 10]);
    assert!(h.data().iter().all(|&v| v == 0.0));
}

#[test]
fn protocol_kernel_one_ignores_sentence_order() {
    let (store, p) = protocol(12, &[1]);
    let mut rng = Rng::seed(2);
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..12).map(|_| rng.range(-1.0, 1.0)).collect()).collect();
    let as_tensor = |order: &[usize]| Tensor::matrix(4, 12, order.iter().flat_map(|&i| rows[i].clone()).collect()).unwrap();
    let run = |m: Tensor| {
        value(&store, |t| {
            let i = t.constant(m);
            let e = t.constant(Tensor::zeros(vec![1, 12]));
            p.forward(t, i, e).unwrap()
        })
    };
    assert!(run(as_tensor(&[0, 1, 2, 3])).max_abs_diff(&run(as_tensor(&[3, 1, 0, 2]))) < 1e-15);
}

#[test]
fn protocol_gradient_with_one_sentence() {
    let (mut store, p) = protocol(6, &[1, 3, 5, 7]);
    let mut rng = Rng::seed(10);
    for id in store.all_ids() {
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v += rng.range(-0.3, 0.3));
    }
    let incl = Tensor::row((0..6).map(|_| rng.range(-2.0, 2.0)).collect());
    let excl = Tensor::matrix(2, 6, (0..12).map(|_| rng.range(-2.0, 2.0)).collect()).unwrap();
    let r = grad_check(
        &store,
        &[incl, excl],
        |t, v| {
            let h = p.forward(t, v[0], v[1])?;
            let s = t.sigmoid(h);
            Ok(t.sum(s))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}
