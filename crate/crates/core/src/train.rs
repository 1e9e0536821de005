//! Optimization loops: a generic minibatch Adam fit used for pretraining,
//! and the two-step trainer for the full model with missing-molecule
//! imputation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Hint, TrialInput};
use crate::ontology::Ontology;
use crate::rng::Rng;
use crate::tensor::{Adam, AdamConfig, Gradients, ParamId, ParameterStore, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl FitConfig {
    pub fn new(epochs: usize, lr: f64, batch_size: usize) -> Result<Self> {
        let cfg = FitConfig { epochs, lr, batch_size };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Minibatch Adam over `params`, shuffling `items` each epoch. Returns the
/// mean loss of each epoch (measured on the pre-update parameters of each
/// batch).
pub fn fit<T, F>(store: &mut ParameterStore, params: &[ParamId], items: &[T], cfg: &FitConfig, rng: &mut Rng, mut loss: F) -> Result<Vec<f64>>
where
    F: FnMut(&mut Tape, &T) -> Result<Var>,
{
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut grads = Gradients::new(store);
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                let tape_loss = {
                    let mut tape = Tape::new(store);
                    let l = loss(&mut tape, &items[i])?;
                    tape.backward(l, &mut grads)?;
                    tape.value(l).item()
                };
                total += tape_loss;
            }
            grads.scale(1.0 / batch.len() as f64);
            grads.fill_missing(store, params);
            adam.step(store, &grads, params)?;
        }
        history.push(total / items.len() as f64);
    }
    Ok(history)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepLosses {
    pub classification: f64,
    /// `None` when the batch has no complete record.
    pub recovery: Option<f64>,
    pub complete: usize,
    pub missing: usize,
}

/// Embeddings of one complete record, held fixed during the recovery step.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryExample {
    pub h_d: Tensor,
    pub h_p: Tensor,
    pub h_m: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 5e-4,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub recovery_loss: f64,
    pub valid_loss: f64,
}

/// Trainer carrying the two optimizers and the dropout stream.
///
/// For a batch, [`Trainer::step`] first minimizes the classification loss
/// over every non-imputer parameter (records without molecules use the
/// imputed drug embedding, with gradient flowing through the imputer but
/// the imputer not updated), then minimizes the recovery loss
/// `‖IMP(h_d, h_p) − h_m‖²` over imputer parameters only, on the complete
/// records, with `h_d`, `h_p`, `h_m` taken as constants from the first pass.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    classifier: Adam,
    imputer: Adam,
    classifier_params: Vec<ParamId>,
    imputer_params: Vec<ParamId>,
    rng: Rng,
}

impl Trainer {
    pub fn new(model: &Hint, config: TrainConfig) -> Result<Self> {
        FitConfig::new(config.epochs, config.lr, config.batch_size)?;
        Ok(Trainer {
            classifier: Adam::new(AdamConfig::with_lr(config.lr)),
            imputer: Adam::new(AdamConfig::with_lr(config.lr)),
            classifier_params: model.classifier_params(),
            imputer_params: model.imputer_params(),
            rng: Rng::seed(config.seed),
            config,
        })
    }

    /// One training update on `batch` of `(input, label)`: a classification
    /// step followed by a recovery step.
    pub fn step(&mut self, model: &Hint, store: &mut ParameterStore, ontology: &Ontology, batch: &[(&TrialInput, f64)]) -> Result<StepLosses> {
        let (classification, cache, missing) = self.classification_step(model, store, ontology, batch)?;
        let recovery = self.recovery_step(model, store, &cache)?;
        Ok(StepLosses {
            classification,
            recovery,
            complete: cache.len(),
            missing,
        })
    }

    /// Updates every non-imputer parameter on the mean BCE of `batch`.
    /// Returns the loss, the `(h_d, h_p, h_m)` of the complete records, and
    /// the number of records that went through the imputer.
    pub fn classification_step(
        &mut self,
        model: &Hint,
        store: &mut ParameterStore,
        ontology: &Ontology,
        batch: &[(&TrialInput, f64)],
    ) -> Result<(f64, Vec<RecoveryExample>, usize)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch has no labelled records"));
        }
        let mut grads = Gradients::new(store);
        let mut cache = Vec::new();
        let mut total = 0.0;
        let mut missing = 0;
        for &(input, label) in batch {
            let mut tape = Tape::new(store);
            let out = model.forward(&mut tape, ontology, input, Some(&mut self.rng))?;
            let loss = tape.bce(out.y_hat, label)?;
            total += tape.value(loss).item();
            tape.backward(loss, &mut grads)?;
            if out.imputed {
                missing += 1;
            } else {
                cache.push(RecoveryExample {
                    h_d: tape.value(out.h_d).clone(),
                    h_p: tape.value(out.h_p).clone(),
                    h_m: tape.value(out.h_m).clone(),
                });
            }
        }
        grads.scale(1.0 / batch.len() as f64);
        grads.fill_missing(store, &self.classifier_params);
        self.classifier.step(store, &grads, &self.classifier_params)?;
        Ok((total / batch.len() as f64, cache, missing))
    }

    /// Updates the imputer alone on the mean recovery loss
    /// `‖IMP(h_d, h_p) − h_m‖²`; `None` when `examples` is empty.
    pub fn recovery_step(&mut self, model: &Hint, store: &mut ParameterStore, examples: &[RecoveryExample]) -> Result<Option<f64>> {
        if examples.is_empty() {
            return Ok(None);
        }
        let mut grads = Gradients::new(store);
        let mut total = 0.0;
        for ex in examples {
            let mut tape = Tape::new(store);
            let d = tape.constant(ex.h_d.clone());
            let p = tape.constant(ex.h_p.clone());
            let m = tape.constant(ex.h_m.clone());
            let m_hat = model.imputer.forward(&mut tape, d, p)?;
            let loss = tape.mse(m_hat, m)?;
            total += tape.value(loss).item();
            tape.backward(loss, &mut grads)?;
        }
        grads.scale(1.0 / examples.len() as f64);
        grads.fill_missing(store, &self.imputer_params);
        self.imputer.step(store, &grads, &self.imputer_params)?;
        Ok(Some(total / examples.len() as f64))
    }

    /// One shuffled pass over `data`; returns mean classification and recovery losses.
    pub fn epoch(&mut self, model: &Hint, store: &mut ParameterStore, ontology: &Ontology, data: &[(TrialInput, f64)]) -> Result<(f64, f64)> {
        if data.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        self.rng.shuffle(&mut order);
        let (mut cls, mut rec, mut rec_n) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<(&TrialInput, f64)> = chunk.iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let l = self.step(model, store, ontology, &batch)?;
            cls += l.classification * chunk.len() as f64;
            if let Some(r) = l.recovery {
                rec += r * l.complete as f64;
                rec_n += l.complete;
            }
        }
        Ok((cls / data.len() as f64, if rec_n > 0 { rec / rec_n as f64 } else { 0.0 }))
    }
}

/// Eval-mode probabilities.
pub fn predict_all(model: &Hint, store: &ParameterStore, ontology: &Ontology, inputs: &[TrialInput]) -> Result<Vec<f64>> {
    inputs.iter().map(|x| model.predict(store, ontology, x)).collect()
}

/// Mean eval-mode BCE.
pub fn mean_bce(model: &Hint, store: &ParameterStore, ontology: &Ontology, data: &[(TrialInput, f64)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut total = 0.0;
    for (input, y) in data {
        let mut tape = Tape::new(store);
        let out = model.forward(&mut tape, ontology, input, None)?;
        let l = tape.bce(out.y_hat, *y)?;
        total += tape.value(l).item();
    }
    Ok(total / data.len() as f64)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    /// Parameters at the epoch with the lowest validation loss.
    pub best: ParameterStore,
}

/// Runs `config.epochs` epochs and keeps the parameters with the lowest
/// validation loss (earliest epoch on ties).
pub fn train(model: &Hint, store: &mut ParameterStore, ontology: &Ontology, train_set: &[(TrialInput, f64)], valid_set: &[(TrialInput, f64)], config: TrainConfig) -> Result<TrainOutcome> {
    if valid_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut trainer = Trainer::new(model, config.clone())?;
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ParameterStore)> = None;
    for epoch in 1..=config.epochs {
        let (train_loss, recovery_loss) = trainer.epoch(model, store, ontology, train_set)?;
        let valid_loss = mean_bce(model, store, ontology, valid_set)?;
        log.push(EpochLog {
            epoch,
            train_loss,
            recovery_loss,
            valid_loss,
        });
        if best.as_ref().map_or(true, |b| valid_loss < b.1) {
            best = Some((epoch, valid_loss, store.clone()));
        }
    }
    let (best_epoch, _, best) = best.expect("at least one epoch");
    Ok(TrainOutcome { log, best_epoch, best })
}
