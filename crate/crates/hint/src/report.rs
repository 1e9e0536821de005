//! Metrics reports: one JSON document plus a plain-text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hint_core::metrics::{bootstrap_stats, paired_bootstrap_pvalue, Metric, ScoredSet};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Metric on the full set, no resampling.
    pub point: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub redrawn: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricsReport(pub BTreeMap<String, MetricSummary>);

impl MetricsReport {
    /// Bootstrap summaries of every metric; with `baseline`, also the paired
    /// p-value that `scores` is no better than `baseline`.
    pub fn compute(scores: &ScoredSet, baseline: Option<&ScoredSet>, b: usize, seed: u64) -> Result<Self> {
        let mut out = BTreeMap::new();
        for metric in Metric::ALL {
            let stats = bootstrap_stats(scores, metric, b, seed)?;
            let p_value = baseline.map(|base| paired_bootstrap_pvalue(scores, base, metric, b, seed)).transpose()?;
            out.insert(
                metric.name().to_string(),
                MetricSummary {
                    point: metric.compute(scores)?,
                    mean: stats.mean,
                    std: stats.std,
                    n: stats.n,
                    b: stats.resamples,
                    seed: stats.seed,
                    redrawn: stats.redrawn,
                    p_value,
                },
            );
        }
        Ok(MetricsReport(out))
    }

    pub fn get(&self, metric: Metric) -> Option<&MetricSummary> {
        self.0.get(metric.name())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8} {:>6} {:>6} {:>8}", "metric", "point", "mean", "std", "n", "B", "p");
        for (name, m) in &self.0 {
            let p = m.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
            let _ = writeln!(s, "{:<8} {:>8.4} {:>8.4} {:>8.4} {:>6} {:>6} {:>8}", name, m.point, m.mean, m.std, m.n, m.b, p);
        }
        s
    }
}
