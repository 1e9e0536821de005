//! Ranking and classification metrics with bootstrap estimates.
//!
//! Ties: ROC-AUC counts a tied positive/negative pair as half a win.
//! PR-AUC is average precision where all instances sharing a score form a
//! single threshold step. F1 predicts positive when `ŷ ≥ 0.5`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Empty("scored set"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn from_pairs(pairs: &[(f64, bool)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn resample(&self, idx: &[usize]) -> ScoredSet {
        ScoredSet {
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// `(positives, negatives)` per distinct score, highest score first.
    fn groups(&self) -> Vec<(u64, u64)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut out: Vec<(u64, u64)> = Vec::new();
        let mut last = None;
        for i in order {
            let s = self.scores[i];
            if last != Some(s) {
                out.push((0, 0));
                last = Some(s);
            }
            let g = out.last_mut().expect("pushed above");
            if self.labels[i] {
                g.0 += 1;
            } else {
                g.1 += 1;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    PrAuc,
    F1,
    RocAuc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::PrAuc, Metric::F1, Metric::RocAuc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PrAuc => "pr_auc",
            Metric::F1 => "f1",
            Metric::RocAuc => "roc_auc",
        }
    }

    pub fn compute(self, s: &ScoredSet) -> Result<f64> {
        match self {
            Metric::PrAuc => pr_auc(s),
            Metric::F1 => Ok(f1_at_half(s)),
            Metric::RocAuc => roc_auc(s),
        }
    }

    fn defined_on(self, s: &ScoredSet) -> bool {
        let p = s.positives();
        match self {
            Metric::RocAuc => p > 0 && p < s.len(),
            Metric::PrAuc => p > 0 && p < s.len(),
            Metric::F1 => true,
        }
    }
}

/// Mann-Whitney estimate of `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, computed exactly in
/// integers before the final division.
pub fn roc_auc(s: &ScoredSet) -> Result<f64> {
    let pos = s.positives() as u128;
    let neg = s.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("ROC-AUC needs both classes"));
    }
    // Twice the U statistic; groups arrive highest score first.
    let mut twice_u: u128 = 0;
    let mut neg_below = neg;
    for (p, n) in s.groups() {
        let (p, n) = (p as u128, n as u128);
        neg_below -= n;
        twice_u += 2 * p * neg_below + p * n;
    }
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// Average precision with tied scores grouped into one threshold.
pub fn pr_auc(s: &ScoredSet) -> Result<f64> {
    let pos = s.positives() as u64;
    if pos == 0 {
        return Err(Error::Metric("PR-AUC needs at least one positive"));
    }
    let (mut tp, mut fp, mut area) = (0u64, 0u64, 0.0);
    for (p, n) in s.groups() {
        tp += p;
        fp += n;
        if p > 0 {
            area += (tp as f64 / (tp + fp) as f64) * (p as f64 / pos as f64);
        }
    }
    Ok(area)
}

/// Counts `(tp, fp, fn)` with `ŷ ≥ 0.5` predicted positive.
pub fn confusion_at_half(s: &ScoredSet) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fnn) = (0, 0, 0);
    for (&y_hat, &y) in s.scores.iter().zip(&s.labels) {
        match (y_hat >= 0.5, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    (tp, fp, fnn)
}

/// `2PR / (P + R)` at threshold 0.5; zero when `P + R = 0`.
pub fn f1_at_half(s: &ScoredSet) -> f64 {
    let (tp, fp, fnn) = confusion_at_half(s);
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fnn) as f64;
    2.0 * p * r / (p + r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapStats {
    pub mean: f64,
    /// Sample standard deviation (divisor `B − 1`).
    pub std: f64,
    pub n: usize,
    pub resamples: usize,
    pub seed: u64,
    /// Resamples drawn again because they held a single class.
    pub redrawn: usize,
}

const MAX_REDRAWS_PER_RESAMPLE: usize = 10_000;

fn draw(rng: &mut Rng, n: usize, idx: &mut Vec<usize>) {
    idx.clear();
    idx.extend((0..n).map(|_| rng.below(n)));
}

/// Bootstrap indices for resample `b`, redrawn until `accept` holds.
fn resample_indices(base: &mut Rng, n: usize, accept: impl Fn(&[usize]) -> bool, idx: &mut Vec<usize>) -> Result<usize> {
    let mut rng = base.fork();
    for redraws in 0..MAX_REDRAWS_PER_RESAMPLE {
        draw(&mut rng, n, idx);
        if accept(idx) {
            return Ok(redraws);
        }
    }
    Err(Error::Metric("bootstrap could not draw a resample with both classes"))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, sqrt(var))
}

fn both_classes(labels: &[bool], idx: &[usize]) -> bool {
    let first = labels[idx[0]];
    idx.iter().any(|&i| labels[i] != first)
}

/// Mean and standard deviation of `metric` over `b` resamples of size `n`.
pub fn bootstrap_stats(s: &ScoredSet, metric: Metric, b: usize, seed: u64) -> Result<BootstrapStats> {
    if b < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 resamples".into()));
    }
    if !metric.defined_on(s) {
        return Err(Error::Metric("metric undefined on the full set"));
    }
    let mut base = Rng::seed(seed);
    let mut idx = Vec::with_capacity(s.len());
    let mut values = Vec::with_capacity(b);
    let mut redrawn = 0;
    let needs_both = metric != Metric::F1;
    for _ in 0..b {
        redrawn += resample_indices(&mut base, s.len(), |ix| !needs_both || both_classes(&s.labels, ix), &mut idx)?;
        values.push(metric.compute(&s.resample(&idx))?);
    }
    let (mean, std) = mean_std(&values);
    Ok(BootstrapStats {
        mean,
        std,
        n: s.len(),
        resamples: b,
        seed,
        redrawn,
    })
}

/// One-sided paired bootstrap: fraction of resamples where
/// `metric(a) ≤ metric(b)`. Ties count toward the fraction, so `a ≡ b`
/// gives 1.
pub fn paired_bootstrap_pvalue(a: &ScoredSet, b_set: &ScoredSet, metric: Metric, b: usize, seed: u64) -> Result<f64> {
    if a.len() != b_set.len() || a.labels != b_set.labels {
        return Err(Error::InvalidArgument("paired sets must share instances and labels".into()));
    }
    if b < 1 {
        return Err(Error::InvalidArgument("bootstrap needs at least 1 resample".into()));
    }
    if !metric.defined_on(a) {
        return Err(Error::Metric("metric undefined on the full set"));
    }
    let mut base = Rng::seed(seed);
    let mut idx = Vec::with_capacity(a.len());
    let needs_both = metric != Metric::F1;
    let mut hits = 0usize;
    for _ in 0..b {
        resample_indices(&mut base, a.len(), |ix| !needs_both || both_classes(&a.labels, ix), &mut idx)?;
        if metric.compute(&a.resample(&idx))? <= metric.compute(&b_set.resample(&idx))? {
            hits += 1;
        }
    }
    Ok(hits as f64 / b as f64)
}
