//! Evaluation metrics. Undefined values are `None` and print as `NA`.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ClusterRmse,
    EntityRmse,
    TopDecileF1,
    TurnoverApe,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::ClusterRmse, Metric::EntityRmse, Metric::TopDecileF1, Metric::TurnoverApe];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ClusterRmse => "cluster_rmse",
            Metric::EntityRmse => "entity_rmse",
            Metric::TopDecileF1 => "top_decile_f1",
            Metric::TurnoverApe => "turnover_ape",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const ABSENT: &str = "NA";

pub fn format_value(v: Option<f64>) -> String {
    v.map_or_else(|| ABSENT.to_owned(), |v| v.to_string())
}

fn rmse(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    Some((pairs.iter().map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / pairs.len() as f64).sqrt())
}

/// RMSE over `(proxy prediction, mean member outcome)` pairs.
pub fn cluster_rmse(pairs: &[(f64, f64)]) -> Option<f64> {
    rmse(pairs)
}

/// RMSE over `(assigned prediction, outcome)` pairs.
pub fn entity_rmse(pairs: &[(f64, f64)]) -> Option<f64> {
    rmse(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecileRecord {
    /// Tie-breaker: lower ids rank first.
    pub entity: u32,
    pub previous: f64,
    pub truth: f64,
    pub predicted: f64,
}

fn top_set(records: &[DecileRecord], m: usize, current: impl Fn(&DecileRecord) -> f64) -> Vec<u32> {
    let mut order: Vec<(f64, u32)> = records.iter().map(|r| (r.previous - current(r), r.entity)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut top: Vec<u32> = order[..m].iter().map(|x| x.1).collect();
    top.sort_unstable();
    top
}

/// F1 between the true and predicted top-⌊n/10⌋ sets by drop
/// `previous − current`. Needs at least 10 records.
pub fn top_decile_f1(records: &[DecileRecord]) -> Option<f64> {
    let n = records.len();
    if n < 10 {
        return None;
    }
    let m = n / 10;
    let truth = top_set(records, m, |r| r.truth);
    let pred = top_set(records, m, |r| r.predicted);
    let hits = pred.iter().filter(|e| truth.binary_search(e).is_ok()).count() as f64;
    // both sets have m members, so precision = recall = hits / m
    let p = hits / m as f64;
    Some(if hits == 0.0 { 0.0 } else { 2.0 * p * p / (p + p) })
}

/// `|T − T̂| / T × 100` over `(prediction, truth)` pairs.
pub fn turnover_ape(pairs: &[(f64, f64)]) -> Option<f64> {
    let t: f64 = pairs.iter().map(|p| p.1).sum();
    if t == 0.0 {
        return None;
    }
    let t_hat: f64 = pairs.iter().map(|p| p.0).sum();
    Some((t - t_hat).abs() / t * 100.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: i64,
    pub cluster_rmse: Option<f64>,
    pub entity_rmse: Option<f64>,
    pub top_decile_f1: Option<f64>,
    pub turnover_ape: Option<f64>,
    pub resolved_entities: usize,
    pub resolved_clusters: usize,
}

impl StepMetrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::ClusterRmse => self.cluster_rmse,
            Metric::EntityRmse => self.entity_rmse,
            Metric::TopDecileF1 => self.top_decile_f1,
            Metric::TurnoverApe => self.turnover_ape,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub steps: Vec<StepMetrics>,
}

impl MetricReport {
    /// Unweighted mean over steps where the metric is defined.
    pub fn mean(&self, m: Metric) -> Option<f64> {
        let vals: Vec<f64> = self.steps.iter().filter_map(|s| s.get(m)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn series(&self, m: Metric) -> Vec<(i64, Option<f64>)> {
        self.steps.iter().map(|s| (s.step, s.get(m))).collect()
    }
}
