use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::rng::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn eval1(f: impl Fn(&mut Tape, Var) -> Var, x: Tensor) -> Tensor {
    let store = ParameterStore::new(0);
    let mut tape = Tape::new(&store);
    let v = tape.input(x);
    let out = f(&mut tape, v);
    tape.value(out).clone()
}

fn random(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.range(-2.0, 2.0)).collect()).unwrap()
}

#[test]
fn matmul_identity_cases() {
    let store = ParameterStore::new(0);
    let mut tape = Tape::new(&store);
    let a = tape.constant(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
    let i = tape.constant(Tensor::identity(2));
    let out = tape.matmul(a, i).unwrap();
    assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);
    let b = tape.constant(Tensor::from_rows(&[&[5.0], &[7.0]]).unwrap());
    let out = tape.matmul(i, b).unwrap();
    assert_eq!(tape.value(out).data(), &[5.0, 7.0]);
}

#[test]
fn matmul_sum_gradient_is_ones_times_b_transpose() {
    let mut rng = Rng::seed(3);
    let a = random(&mut rng, 3, 4);
    let b = random(&mut rng, 4, 2);
    let store = ParameterStore::new(0);
    let mut tape = Tape::new(&store);
    let va = tape.input(a);
    let vb = tape.constant(b.clone());
    let prod = tape.matmul(va, vb).unwrap();
    let s = tape.sum(prod);
    let tg = tape.backward(s, &mut Gradients::new(&store)).unwrap();
    let g = tg.get(va).unwrap();
    for i in 0..3 {
        for k in 0..4 {
            let expect = b.get(k, 0) + b.get(k, 1);
            assert!(close(g[i * 4 + k], expect, 1e-12));
        }
    }
}

#[test]
fn activation_values() {
    let s = eval1(|t, v| t.sigmoid(v), Tensor::scalar(0.0));
    assert_eq!(s.item(), 0.5);
    let r = eval1(|t, v| t.relu(v), Tensor::row(vec![-3.0, 2.0]));
    assert_eq!(r.data(), &[0.0, 2.0]);

    let store = ParameterStore::new(0);
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::scalar(0.0));
    let y = tape.sigmoid(x);
    let tg = tape.backward(y, &mut Gradients::new(&store)).unwrap();
    assert!(close(tg.get(x).unwrap()[0], 0.25, 1e-15));
}

#[test]
fn conv_single_position_is_a_linear_map() {
    let store = ParameterStore::new(0);
    let mut tape = Tape::new(&store);
    let x = tape.constant(Tensor::row(vec![1.0, 2.0, 3.0]));
    let w = tape.constant(Tensor::matrix(3, 2, vec![0.5, 1.0, 0.5, 0.0, 0.5, -1.0]).unwrap());
    let b = tape.constant(Tensor::row(vec![0.0, 0.1]));
    let out = tape.conv1d_max(x, w, b, 1).unwrap();
    assert!(close(tape.value(out).get(0, 0), 3.0, 1e-12));
    assert!(close(tape.value(out).get(0, 1), 1.0 - 3.0 + 0.1, 1e-12));

    let zero = tape.constant(Tensor::zeros(vec![4, 3]));
    let w3 = tape.constant(Tensor::full(vec![9, 2], 0.3));
    let b0 = tape.constant(Tensor::zeros(vec![1, 2]));
    let out = tape.conv1d_max(zero, w3, b0, 3).unwrap();
    assert_eq!(tape.value(out).data(), &[0.0, 0.0]);
    assert!(tape.conv1d_max(zero, w3, b0, 2).is_err());
}

#[test]
fn bce_values() {
    let bce = |p: f64, y: f64| {
        let store = ParameterStore::new(0);
        let mut tape = Tape::new(&store);
        let v = tape.constant(Tensor::scalar(p));
        let l = tape.bce(v, y).unwrap();
        tape.value(l).item()
    };
    assert!(close(bce(0.5, 1.0), core::f64::consts::LN_2, 1e-12));
    assert!(close(bce(0.9, 0.0), 2.302585, 1e-6));
    assert!(bce(1.0, 1.0) < 1e-11);
    for p in [0.0, 1e-300, 0.3, 1.0] {
        for y in [0.0, 1.0] {
            assert!(bce(p, y).is_finite());
        }
    }
}

#[test]
fn mse_values_and_gradient() {
    let store = ParameterStore::new(0);
    let mut tape = Tape::new(&store);
    let a = tape.input(Tensor::row(vec![1.0, 2.0]));
    let z = tape.constant(Tensor::row(vec![0.0, 0.0]));
    let l = tape.mse(a, z).unwrap();
    assert_eq!(tape.value(l).item(), 5.0);
    let same = tape.mse(a, a).unwrap();
    assert_eq!(tape.value(same).item(), 0.0);

    let mut rng = Rng::seed(9);
    let (ta, tb) = (random(&mut rng, 2, 3), random(&mut rng, 2, 3));
    let mut tape = Tape::new(&store);
    let a = tape.input(ta.clone());
    let b = tape.constant(tb.clone());
    let l = tape.mse(a, b).unwrap();
    let tg = tape.backward(l, &mut Gradients::new(&store)).unwrap();
    for (j, g) in tg.get(a).unwrap().iter().enumerate() {
        assert!(close(*g, 2.0 * (ta.data()[j] - tb.data()[j]), 1e-12));
    }
}

fn scalar_param(store: &mut ParameterStore, w: f64) -> ParamId {
    store.insert("w", Tensor::scalar(w)).unwrap()
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut store = ParameterStore::new(0);
    let id = scalar_param(&mut store, 0.7);
    let mut grads = Gradients::new(&store);
    grads.accumulate(id, &[0.0]);
    let mut adam = Adam::new(AdamConfig::with_lr(1e-3));
    for _ in 0..5 {
        adam.step(&mut store, &grads, &[id]).unwrap();
    }
    assert_eq!(store.get(id).item(), 0.7);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let mut store = ParameterStore::new(0);
    let id = scalar_param(&mut store, 0.0);
    let mut grads = Gradients::new(&store);
    grads.accumulate(id, &[1.0]);
    Adam::new(AdamConfig::with_lr(1e-3)).step(&mut store, &grads, &[id]).unwrap();
    assert!(close(store.get(id).item(), -1e-3, 1e-10));
}

#[test]
fn adam_descends_a_parabola() {
    let mut store = ParameterStore::new(0);
    let id = scalar_param(&mut store, 1.0);
    let mut adam = Adam::new(AdamConfig::with_lr(0.05));
    let mut prev = f64::INFINITY;
    for _ in 0..10 {
        let mut grads = Gradients::new(&store);
        let f = {
            let mut tape = Tape::new(&store);
            let w = tape.param(id);
            let sq = tape.mul(w, w).unwrap();
            let f = tape.value(sq).item();
            tape.backward(sq, &mut grads).unwrap();
            f
        };
        assert!(f < prev);
        prev = f;
        adam.step(&mut store, &grads, &[id]).unwrap();
    }
}

#[test]
fn grad_check_reference_functions() {
    let mut rng = Rng::seed(11);
    let x = random(&mut rng, 1, 6);
    let w = random(&mut rng, 6, 1);
    let store = ParameterStore::new(0);
    let sq = grad_check(
        &store,
        &[x.clone()],
        |t, v| {
            let s = t.mul(v[0], v[0])?;
            Ok(t.sum(s))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(sq.max_rel_error < 1e-6, "{sq:?}");
    let sd = grad_check(
        &store,
        &[x, w],
        |t, v| {
            let d = t.matmul(v[0], v[1])?;
            Ok(t.sigmoid(d))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(sd.max_rel_error < 1e-4, "{sd:?}");
}

#[test]
fn conv_gradient_matches_finite_differences() {
    let mut rng = Rng::seed(5);
    let inputs: Vec<Tensor> = vec![random(&mut rng, 5, 4), random(&mut rng, 12, 3), random(&mut rng, 1, 3)];
    let r = grad_check(
        &ParameterStore::new(0),
        &inputs,
        |t, v| {
            let c = t.conv1d_max(v[0], v[1], v[2], 3)?;
            let s = t.sigmoid(c);
            Ok(t.sum(s))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn tensors_reject_bad_shapes_and_detect_nan() {
    assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
    assert!(!Tensor::row(vec![1.0, f64::NAN]).is_finite());
}

#[test]
fn store_iterates_in_path_order() {
    let mut store = ParameterStore::new(0);
    store.insert("b", Tensor::scalar(1.0)).unwrap();
    store.insert("a", Tensor::scalar(2.0)).unwrap();
    assert!(store.insert("a", Tensor::scalar(3.0)).is_err());
    let names: Vec<&str> = store.iter().map(|(n, _, _)| n).collect();
    assert_eq!(names, ["a", "b"]);
}
