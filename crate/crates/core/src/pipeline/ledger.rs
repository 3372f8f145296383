use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::CompensatedSum;
use crate::error::{Error, Result};
use crate::event_model::EntityId;
use crate::metrics::{cluster_rmse, entity_rmse, top_decile_f1, turnover_ape, DecileRecord, StepMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingRecord {
    pub entity: EntityId,
    pub step: i64,
    pub predicted: f64,
    pub cluster: usize,
    pub proxy_prediction: f64,
    pub previous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRecord {
    #[serde(flatten)]
    pub record: PendingRecord,
    pub truth: f64,
    pub resolved_at: i64,
}

/// Predictions waiting for their outcome, and those already scored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pending: BTreeMap<EntityId, PendingRecord>,
    resolved: Vec<ResolvedRecord>,
}

impl Ledger {
    pub fn pending(&self) -> impl Iterator<Item = &PendingRecord> {
        self.pending.values()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn resolved(&self) -> &[ResolvedRecord] {
        &self.resolved
    }

    pub fn is_pending(&self, c: EntityId) -> bool {
        self.pending.contains_key(&c)
    }

    pub fn push(&mut self, record: PendingRecord) -> Result<()> {
        if let Some(old) = self.pending.get(&record.entity) {
            return Err(Error::SelectionContract(format!(
                "entity {} predicted at step {} while its step-{} prediction is unresolved",
                record.entity.0, record.step, old.step
            )));
        }
        self.pending.insert(record.entity, record);
        Ok(())
    }

    /// Resolve the pending record of `c` if `accept` agrees. Returns whether
    /// a record was resolved.
    pub fn resolve(&mut self, c: EntityId, truth: f64, now: i64, accept: impl Fn(&PendingRecord) -> bool) -> bool {
        match self.pending.get(&c) {
            Some(r) if accept(r) => {
                let record = self.pending.remove(&c).expect("present");
                self.resolved.push(ResolvedRecord { record, truth, resolved_at: now });
                true
            }
            _ => false,
        }
    }

    pub fn resolved_at(&self, step: i64) -> impl Iterator<Item = &ResolvedRecord> {
        self.resolved.iter().filter(move |r| r.resolved_at == step)
    }

    /// Metrics over the records resolved at `step`. A cluster contributes
    /// one pair built from those of its members resolved at this step.
    pub fn step_metrics(&self, step: i64) -> StepMetrics {
        step_metrics(step, self.resolved_at(step))
    }
}

pub(crate) fn step_metrics<'a>(step: i64, records: impl Iterator<Item = &'a ResolvedRecord>) -> StepMetrics {
    let mut entity_pairs = Vec::new();
    let mut deciles = Vec::new();
    let mut clusters: BTreeMap<(i64, usize), (f64, CompensatedSum, usize)> = BTreeMap::new();
    for r in records {
        entity_pairs.push((r.record.predicted, r.truth));
        if let Some(previous) = r.record.previous {
            deciles.push(DecileRecord { entity: r.record.entity.0, previous, truth: r.truth, predicted: r.record.predicted });
        }
        let slot = clusters.entry((r.record.step, r.record.cluster)).or_insert((r.record.proxy_prediction, CompensatedSum::default(), 0));
        slot.1.add(r.truth);
        slot.2 += 1;
    }
    let cluster_pairs: Vec<(f64, f64)> = clusters.values().map(|(p, s, n)| (*p, s.value() / *n as f64)).collect();
    StepMetrics {
        step,
        cluster_rmse: cluster_rmse(&cluster_pairs),
        entity_rmse: entity_rmse(&entity_pairs),
        top_decile_f1: top_decile_f1(&deciles),
        turnover_ape: turnover_ape(&entity_pairs),
        resolved_entities: entity_pairs.len(),
        resolved_clusters: cluster_pairs.len(),
    }
}
