use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{zscore, BinGrid, DistanceSpec, GowerColumn, GowerSpace};
use crate::encoding::{encode_invoice, invoice_outcome, linear_fit, one_hot_encode, one_hot_width, InvoiceLabels, JourneyEncoder};
use crate::error::{Error, Result};
use crate::event_model::{AttrKind, EntityId, EventStore, TimeWindow};
use crate::ingestion::filter::{RIR_LABEL, VCI_LABEL};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UseCaseKind {
    Supermarket { tau: usize },
    PaintFactory,
}

impl UseCaseKind {
    pub fn name(&self) -> &'static str {
        match self {
            UseCaseKind::Supermarket { .. } => "supermarket",
            UseCaseKind::PaintFactory => "paint_factory",
        }
    }

    pub fn tau(&self) -> Option<usize> {
        match *self {
            UseCaseKind::Supermarket { tau } => Some(tau),
            UseCaseKind::PaintFactory => None,
        }
    }

    pub fn default_distance(&self) -> DistanceKind {
        match self {
            UseCaseKind::Supermarket { .. } => DistanceKind::BinnedEuclidean { bins: DEFAULT_BINS },
            UseCaseKind::PaintFactory => DistanceKind::Gower,
        }
    }

    pub fn build(&self, store: &EventStore) -> Result<Box<dyn UseCase>> {
        Ok(match *self {
            UseCaseKind::Supermarket { tau } => Box::new(Supermarket::new(store, tau)?),
            UseCaseKind::PaintFactory => Box::new(PaintFactory::new(store)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
    BinnedEuclidean {
        #[serde(default = "default_bins")]
        bins: usize,
    },
    Gower,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl DistanceKind {
    /// Fit the distance on one batch of clustering points.
    pub fn fit(&self, points: &[Vec<f64>], layout: &[GowerColumn]) -> Result<DistanceSpec> {
        Ok(match *self {
            DistanceKind::Euclidean => DistanceSpec::Euclidean,
            DistanceKind::BinnedEuclidean { bins } => DistanceSpec::BinnedEuclidean(BinGrid::fit(points, bins)?),
            DistanceKind::Gower => DistanceSpec::Gower(GowerSpace::fit(layout, points)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Training,
    Prediction,
}

/// Encoded entities of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub entities: Vec<EntityId>,
    /// Model inputs, one per entity.
    pub inputs: Vec<Vec<f64>>,
    /// Clustering points, one per entity.
    pub points: Vec<Vec<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

pub trait UseCase: Send + Sync {
    fn kind(&self) -> UseCaseKind;
    fn input_width(&self) -> usize;
    /// Default `(first, last)` steps for this store.
    fn step_range(&self, store: &EventStore) -> (i64, i64);
    fn select_training(&self, store: &EventStore, t: i64) -> Vec<EntityId>;
    fn select_prediction(&self, store: &EventStore, t: i64) -> Vec<EntityId>;
    fn encode(&self, store: &EventStore, phase: Phase, t: i64, entities: Vec<EntityId>) -> Result<Batch>;
    /// Layout used when the distance is Gower.
    fn gower_layout(&self) -> Vec<GowerColumn>;
    fn training_outcome(&self, store: &EventStore, c: EntityId, t: i64) -> Result<f64>;
    /// Outcome of the period before the prediction target, if it exists.
    fn previous_outcome(&self, store: &EventStore, c: EntityId, t: i64) -> Option<f64>;
    /// Batches with equal keys are identical.
    fn batch_key(&self, phase: Phase, t: i64) -> u64;
    /// Whether a prediction batch at `t` is the training batch at `t + 1`.
    fn reuses_prediction_batch(&self) -> bool;
    /// Whether a record predicted at `predicted_at` may resolve at `now`,
    /// given the entity is in the training set at `now`.
    fn matures(&self, predicted_at: i64, now: i64) -> bool;
}

fn week(t: i64) -> TimeWindow {
    TimeWindow::new((t - 1) as f64, t as f64).expect("unit window")
}

fn last_step(store: &EventStore) -> i64 {
    store.max_time().map_or(0, |m| m.floor() as i64 + 1)
}

#[derive(Debug, Clone)]
pub struct Supermarket {
    tau: usize,
    encoder: JourneyEncoder,
}

impl Supermarket {
    pub fn new(store: &EventStore, tau: usize) -> Result<Self> {
        if tau < 2 {
            return Err(Error::Config(format!("journey length must be at least 2, got {tau}")));
        }
        Ok(Self { tau, encoder: JourneyEncoder::for_store(store)? })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn encoder(&self) -> &JourneyEncoder {
        &self.encoder
    }
}

impl UseCase for Supermarket {
    fn kind(&self) -> UseCaseKind {
        UseCaseKind::Supermarket { tau: self.tau }
    }

    fn input_width(&self) -> usize {
        self.encoder.rows() * self.tau
    }

    fn step_range(&self, store: &EventStore) -> (i64, i64) {
        (self.tau as i64 + 1, last_step(store))
    }

    /// `start(c) < t−τ` and at least one event in `[t−τ−1, t−1)`.
    fn select_training(&self, store: &EventStore, t: i64) -> Vec<EntityId> {
        let tau = self.tau as i64;
        let w = TimeWindow::new((t - tau - 1) as f64, (t - 1) as f64).expect("tau >= 2");
        store
            .entities()
            .filter(|&c| store.start(c).is_some_and(|s| s < (t - tau) as f64) && store.has_events_in(w, c))
            .collect()
    }

    fn select_prediction(&self, store: &EventStore, t: i64) -> Vec<EntityId> {
        self.select_training(store, t + 1)
    }

    fn encode(&self, store: &EventStore, phase: Phase, t: i64, entities: Vec<EntityId>) -> Result<Batch> {
        let t_enc = match phase {
            Phase::Training => t,
            Phase::Prediction => t + 1,
        };
        let (inputs, coeffs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = entities
            .par_iter()
            .map(|&c| {
                let m = self.encoder.encode(store, c, t_enc, self.tau);
                let fit = linear_fit(&m)?;
                Ok((m.flatten().to_vec(), fit.to_vec()))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Batch { entities, inputs, points: zscore(&coeffs) })
    }

    fn gower_layout(&self) -> Vec<GowerColumn> {
        (0..3 * self.encoder.rows()).map(|index| GowerColumn::Numeric { index }).collect()
    }

    fn training_outcome(&self, store: &EventStore, c: EntityId, t: i64) -> Result<f64> {
        Ok(self.encoder.outcome(store, c, week(t)))
    }

    fn previous_outcome(&self, store: &EventStore, c: EntityId, t: i64) -> Option<f64> {
        Some(self.encoder.outcome(store, c, week(t)))
    }

    fn batch_key(&self, phase: Phase, t: i64) -> u64 {
        match phase {
            Phase::Training => t as u64,
            Phase::Prediction => (t + 1) as u64,
        }
    }

    fn reuses_prediction_batch(&self) -> bool {
        true
    }

    fn matures(&self, predicted_at: i64, now: i64) -> bool {
        now == predicted_at + 1
    }
}

/// Invoices keyed by the step whose day contains their milestones.
#[derive(Debug, Clone)]
pub struct PaintFactory {
    labels: InvoiceLabels,
    by_vci: BTreeMap<i64, Vec<EntityId>>,
    by_rir: BTreeMap<i64, Vec<EntityId>>,
    width: usize,
    layout: Vec<GowerColumn>,
}

fn day_step(time: f64) -> i64 {
    time.floor() as i64 + 1
}

impl PaintFactory {
    pub fn new(store: &EventStore) -> Result<Self> {
        Self::with_labels(store, VCI_LABEL, RIR_LABEL)
    }

    pub fn with_labels(store: &EventStore, vci: &str, rir: &str) -> Result<Self> {
        let labels = InvoiceLabels::resolve_named(store, vci, rir)?;
        let mut by_vci: BTreeMap<i64, Vec<EntityId>> = BTreeMap::new();
        let mut by_rir: BTreeMap<i64, Vec<EntityId>> = BTreeMap::new();
        for c in store.entities() {
            if let Some(v) = labels.vci_time(store, c) {
                by_vci.entry(day_step(v)).or_default().push(c);
            }
            if let Some(r) = labels.rir_time(store, c) {
                by_rir.entry(day_step(r)).or_default().push(c);
            }
        }
        let schema = store.entity_schema();
        let mut layout: Vec<GowerColumn> = (0..store.alphabet().len()).map(|index| GowerColumn::Numeric { index }).collect();
        let mut at = store.alphabet().len();
        for def in &schema.attributes {
            match &def.kind {
                AttrKind::Categorical { categories } => {
                    layout.push(GowerColumn::categorical(at..at + categories.len()));
                    at += categories.len();
                }
                AttrKind::Boolean => {
                    layout.push(GowerColumn::categorical(at..at + 1));
                    at += 1;
                }
                AttrKind::Numeric => {
                    layout.push(GowerColumn::Numeric { index: at });
                    at += 1;
                }
            }
        }
        let width = one_hot_width(store.alphabet().len(), schema);
        debug_assert_eq!(width, at);
        Ok(Self { labels, by_vci, by_rir, width, layout })
    }

    pub fn labels(&self) -> InvoiceLabels {
        self.labels
    }
}

impl UseCase for PaintFactory {
    fn kind(&self) -> UseCaseKind {
        UseCaseKind::PaintFactory
    }

    fn input_width(&self) -> usize {
        self.width
    }

    fn step_range(&self, store: &EventStore) -> (i64, i64) {
        (1, last_step(store))
    }

    /// RIR inside `[t−1, t)`.
    fn select_training(&self, _store: &EventStore, t: i64) -> Vec<EntityId> {
        self.by_rir.get(&t).cloned().unwrap_or_default()
    }

    /// VCI inside `[t−1, t)`.
    fn select_prediction(&self, _store: &EventStore, t: i64) -> Vec<EntityId> {
        self.by_vci.get(&t).cloned().unwrap_or_default()
    }

    fn encode(&self, store: &EventStore, _phase: Phase, _t: i64, entities: Vec<EntityId>) -> Result<Batch> {
        let schema = store.entity_schema();
        let inputs: Vec<Vec<f64>> = entities
            .par_iter()
            .map(|&c| one_hot_encode(&encode_invoice(store, c, &self.labels)?, schema))
            .collect::<Result<_>>()?;
        Ok(Batch { entities, points: inputs.clone(), inputs })
    }

    fn gower_layout(&self) -> Vec<GowerColumn> {
        self.layout.clone()
    }

    fn training_outcome(&self, store: &EventStore, c: EntityId, _t: i64) -> Result<f64> {
        invoice_outcome(store, c, &self.labels)
    }

    fn previous_outcome(&self, _store: &EventStore, _c: EntityId, _t: i64) -> Option<f64> {
        None
    }

    fn batch_key(&self, phase: Phase, t: i64) -> u64 {
        (t as u64) << 1 | u64::from(phase == Phase::Prediction)
    }

    fn reuses_prediction_batch(&self) -> bool {
        false
    }

    fn matures(&self, _predicted_at: i64, _now: i64) -> bool {
        true
    }
}
