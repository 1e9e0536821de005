use alloc::vec::Vec;

use super::{Gradients, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates sampled per parameter tensor; `usize::MAX` checks all.
    pub max_coords_per_param: usize,
    /// Denominator floor of the relative error, so that a pair of
    /// near-zero gradients compares on absolute error instead.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            max_coords_per_param: usize::MAX,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// `(label, tape gradient, finite difference)` of the worst coordinate.
    pub worst: Option<(alloc::string::String, f64, f64)>,
}

/// Compares tape gradients of `f` against central finite differences.
///
/// `f` builds a scalar on the tape from the `inputs` (one [`Var`] per input
/// tensor) and from any parameters in `store`. Both input coordinates and
/// parameter coordinates are checked.
pub fn grad_check<F>(store: &ParameterStore, inputs: &[Tensor], f: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&opts.eps) {
        return Err(Error::InvalidArgument(alloc::format!(
            "finite-difference step {} outside [1e-7, 1e-3]",
            opts.eps
        )));
    }
    let eval = |store: &ParameterStore, inputs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new(store);
        let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out);
        if v.len() != 1 {
            return Err(Error::InvalidArgument(alloc::format!(
                "grad_check needs a scalar function, got shape {:?}",
                v.shape()
            )));
        }
        Ok(v.item())
    };

    let mut tape = Tape::new(store);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.value(out).len() != 1 {
        return Err(Error::InvalidArgument(alloc::format!(
            "grad_check needs a scalar function, got shape {:?}",
            tape.value(out).shape()
        )));
    }
    let mut pgrads = Gradients::new(store);
    let tg = tape.backward(out, &mut pgrads)?;
    let input_grads: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tg.get(v).map_or_else(|| alloc::vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();
    drop(tape);

    let mut rng = Rng::seed(opts.seed);
    let mut report = GradCheckReport::default();
    let mut record = |label: &dyn Fn() -> alloc::string::String, analytic: f64, numeric: f64| {
        let denom = analytic.abs().max(numeric.abs()).max(opts.floor);
        let rel = (analytic - numeric).abs() / denom;
        report.coords_checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some((label(), analytic, numeric));
        }
    };

    let mut work_inputs: Vec<Tensor> = inputs.to_vec();
    for (k, grad) in input_grads.iter().enumerate() {
        for j in sample(grad.len(), opts.max_coords_per_param, &mut rng) {
            let orig = work_inputs[k].data()[j];
            work_inputs[k].data_mut()[j] = orig + opts.eps;
            let plus = eval(store, &work_inputs)?;
            work_inputs[k].data_mut()[j] = orig - opts.eps;
            let minus = eval(store, &work_inputs)?;
            work_inputs[k].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            record(&|| alloc::format!("input[{k}][{j}]"), grad[j], numeric);
        }
    }

    let mut work = store.clone();
    for (name, id, t) in store.iter() {
        let analytic = pgrads.get(id);
        for j in sample(t.len(), opts.max_coords_per_param, &mut rng) {
            let orig = t.data()[j];
            work.get_mut(id).data_mut()[j] = orig + opts.eps;
            let plus = eval(&work, inputs)?;
            work.get_mut(id).data_mut()[j] = orig - opts.eps;
            let minus = eval(&work, inputs)?;
            work.get_mut(id).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let a = analytic.map_or(0.0, |g| g[j]);
            record(&|| alloc::format!("{name}[{j}]"), a, numeric);
        }
    }
    Ok(report)
}

fn sample(n: usize, max: usize, rng: &mut Rng) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx.truncate(max);
    idx.sort_unstable();
    idx
}
