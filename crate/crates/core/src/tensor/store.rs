use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Stable handle to a parameter; the insertion index in its store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors. Iteration is always sorted by path.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: BTreeMap<String, ParamId>,
    seed: u64,
}

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        ParameterStore {
            names: Vec::new(),
            tensors: Vec::new(),
            index: BTreeMap::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn insert(&mut self, path: &str, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(path) {
            return Err(Error::DuplicateParameter(path.to_string()));
        }
        let id = ParamId(self.tensors.len());
        self.names.push(path.to_string());
        self.tensors.push(value);
        self.index.insert(path.to_string(), id);
        Ok(id)
    }

    /// Registers a `fan_in × fan_out` weight, uniform in ±1/√fan_in.
    pub fn weight(&mut self, path: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<ParamId> {
        let bound = 1.0 / crate::math::sqrt(fan_in as f64);
        let data = (0..fan_in * fan_out).map(|_| rng.range(-bound, bound)).collect();
        self.insert(path, Tensor::from_parts(vec![fan_in, fan_out], data))
    }

    /// Registers a zero bias of shape `rows × cols`.
    pub fn bias(&mut self, path: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.insert(path, Tensor::zeros(vec![rows, cols]))
    }

    pub fn id(&self, path: &str) -> Option<ParamId> {
        self.index.get(path).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_path(&self, path: &str) -> Option<&Tensor> {
        self.id(path).map(|id| self.get(id))
    }

    /// Overwrites an existing parameter with a same-shaped value.
    pub fn assign(&mut self, path: &str, value: Tensor) -> Result<()> {
        let id = self
            .id(path)
            .ok_or_else(|| Error::UnknownParameter(path.to_string()))?;
        let slot = &mut self.tensors[id.0];
        if slot.shape() != value.shape() {
            return Err(Error::shape("assign", slot.shape(), value.shape()));
        }
        *slot = value;
        Ok(())
    }

    /// `(path, id, value)` sorted by path.
    pub fn iter(&self) -> impl Iterator<Item = (&str, ParamId, &Tensor)> {
        self.index
            .iter()
            .map(move |(name, &id)| (name.as_str(), id, &self.tensors[id.0]))
    }

    /// Ids whose path starts with `prefix`, sorted by path.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.index
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(_, &id)| id)
            .collect()
    }

    pub fn all_ids(&self) -> Vec<ParamId> {
        self.index.values().copied().collect()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Per-parameter gradient accumulators, allocated on first touch.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    slots: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new(store: &ParameterStore) -> Self {
        Gradients {
            slots: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots.get(id.0).and_then(|s| s.as_deref())
    }

    pub(crate) fn slot(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        self.slots[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &[f64]) {
        let slot = self.slot(id, grad.len());
        for (s, g) in slot.iter_mut().zip(grad) {
            *s += g;
        }
    }

    /// Ensures every listed parameter has a (possibly zero) gradient.
    pub fn fill_missing(&mut self, store: &ParameterStore, ids: &[ParamId]) {
        for &id in ids {
            self.slot(id, store.get(id).len());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.slots.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn touched(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| ParamId(i))
    }

    pub fn clear(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
    }
}
