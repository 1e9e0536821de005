use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, ParamId, ParameterStore};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Adam with per-parameter moment state and step count.
///
/// [`Adam::step`] only touches the listed parameters, which is how the
/// training loop updates one parameter group while another stays frozen.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    state: Vec<Option<Moments>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            state: Vec::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParameterStore, grads: &Gradients, params: &[ParamId]) -> Result<()> {
        for &id in params {
            if grads.get(id).is_none() {
                return Err(Error::MissingGradient(store.name(id).into()));
            }
        }
        if self.state.len() < store.len() {
            self.state.resize(store.len(), None);
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        for &id in params {
            let g = grads.get(id).expect("checked above");
            let value = store.get_mut(id).data_mut();
            let st = self.state[id.index()].get_or_insert_with(|| Moments {
                m: vec![0.0; value.len()],
                v: vec![0.0; value.len()],
                t: 0,
            });
            st.t += 1;
            let bc1 = 1.0 - libm::pow(beta1, st.t as f64);
            let bc2 = 1.0 - libm::pow(beta2, st.t as f64);
            let step = lr / bc1;
            for (((w, &gi), m), v) in value.iter_mut().zip(g).zip(&mut st.m).zip(&mut st.v) {
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                *w -= step * *m / (math::sqrt(*v / bc2) + eps);
            }
        }
        Ok(())
    }
}
