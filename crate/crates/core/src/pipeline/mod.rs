//! Streaming orchestration: select, encode, cluster, average, update, then
//! predict and hand proxy predictions back to the members.

mod ledger;
mod usecase;

use std::fmt;
use std::str::FromStr;

use log::{debug, info};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use ledger::{Ledger, PendingRecord, ResolvedRecord};
pub use usecase::{Batch, DistanceKind, PaintFactory, Phase, Supermarket, UseCase, UseCaseKind, DEFAULT_BINS};

use crate::clustering::{cluster_count, k_medoids, make_proxies, random_partition, Partition, ProxyEntity, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::event_model::{EntityId, EventStore};
use crate::metrics::{MetricReport, StepMetrics};
use crate::model::{init_model, IncrementalModel, ModelSpec};
use crate::seed::mix;

/// Target average cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rho {
    Fixed(usize),
    /// One cluster holding the whole selection.
    All,
}

impl Rho {
    pub fn cluster_count(self, n: usize) -> Result<usize> {
        match self {
            Rho::Fixed(r) => cluster_count(n, r),
            Rho::All => cluster_count(n, n.max(1)),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Rho::Fixed(0) => Err(Error::Config("rho must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho::Fixed(r) => write!(f, "{r}"),
            Rho::All => f.write_str("all"),
        }
    }
}

impl FromStr for Rho {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Rho::All);
        }
        let r: usize = s.parse().map_err(|_| Error::Config(format!("rho must be a positive integer or `all`, got `{s}`")))?;
        let rho = Rho::Fixed(r);
        rho.validate()?;
        Ok(rho)
    }
}

impl Serialize for Rho {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rho::Fixed(r) => s.serialize_u64(*r as u64),
            Rho::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for Rho {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(r) => {
                let rho = Rho::Fixed(r as usize);
                rho.validate().map_err(serde::de::Error::custom)?;
                Ok(rho)
            }
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    #[default]
    KMedoids,
    /// Uniform random assignment; the ablation baseline.
    Random,
    /// No clustering or averaging: each entity goes to the model as is.
    Bypass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRange {
    pub first: i64,
    pub last: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub use_case: UseCaseKind,
    pub rho: Rho,
    #[serde(default)]
    pub method: ClusterMethod,
    /// Defaults per use case: binned Euclidean for journeys, Gower for invoices.
    #[serde(default)]
    pub distance: Option<DistanceKind>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub steps: Option<StepRange>,
    /// Reuse the prediction batch of step t as the training batch of t+1
    /// where the use case allows it.
    #[serde(default = "yes")]
    pub reuse: bool,
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn yes() -> bool {
    true
}

impl PipelineConfig {
    pub fn new(use_case: UseCaseKind, rho: Rho) -> Self {
        Self {
            use_case,
            rho,
            method: ClusterMethod::default(),
            distance: None,
            model: ModelSpec::default(),
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
            steps: None,
            reuse: true,
        }
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance.unwrap_or_else(|| self.use_case.default_distance())
    }

    pub fn validate(&self) -> Result<()> {
        self.rho.validate()?;
        self.model.validate()?;
        if let UseCaseKind::Supermarket { tau } = self.use_case {
            if tau < 2 {
                return Err(Error::Config(format!("tau must be at least 2, got {tau}")));
            }
        }
        if let Some(r) = self.steps {
            if r.first < 1 || r.last < r.first {
                return Err(Error::Config(format!("invalid step range {}..={}", r.first, r.last)));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepResult {
    pub t: i64,
    pub n_train: usize,
    pub n_pred: usize,
    pub k_train: usize,
    pub k_pred: usize,
    pub train_partition: Option<Partition>,
    pub pred_partition: Option<Partition>,
    /// `(cluster, prediction)` per proxy, in cluster order.
    pub proxy_predictions: Vec<(usize, f64)>,
    /// One assigned prediction per entity of the prediction set.
    pub entity_predictions: Vec<(EntityId, f64)>,
    /// Prediction phase skipped because the model had no update yet.
    pub cold: bool,
    pub metrics: StepMetrics,
}

/// What one phase saw, for audits.
#[derive(Debug)]
pub struct PhaseRecord<'r> {
    pub t: i64,
    pub phase: Phase,
    pub rho: Rho,
    pub method: ClusterMethod,
    pub batch: &'r Batch,
    pub outcomes: Option<&'r [f64]>,
    pub partition: &'r Partition,
    /// Empty when clustering is bypassed.
    pub proxies: &'r [ProxyEntity],
}

type Observer<'a> = Box<dyn FnMut(&PhaseRecord<'_>) + 'a>;

struct Cached {
    t: i64,
    batch: Batch,
    partition: Partition,
}

pub struct Pipeline<'a> {
    store: &'a EventStore,
    config: PipelineConfig,
    use_case: Box<dyn UseCase>,
    model: Box<dyn IncrementalModel>,
    ledger: Ledger,
    cache: Option<Cached>,
    last_step: Option<i64>,
    observer: Option<Observer<'a>>,
}

impl fmt::Debug for Pipeline<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline").field("config", &self.config).field("last_step", &self.last_step).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: PipelineConfig,
    pub steps: Vec<StepResult>,
    pub ledger: Ledger,
    pub report: MetricReport,
}

impl<'a> Pipeline<'a> {
    pub fn new(store: &'a EventStore, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let use_case = config.use_case.build(store)?;
        let model = init_model(&config.model, use_case.input_width(), mix(config.seed, &[0x6d6f64]))?;
        Ok(Self { store, config, use_case, model, ledger: Ledger::default(), cache: None, last_step: None, observer: None })
    }

    pub fn with_observer(mut self, f: impl FnMut(&PhaseRecord<'_>) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    pub fn use_case(&self) -> &dyn UseCase {
        self.use_case.as_ref()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn model(&self) -> &dyn IncrementalModel {
        self.model.as_ref()
    }

    /// Configured step range, or the use case's default for the store.
    pub fn step_range(&self) -> (i64, i64) {
        match self.config.steps {
            Some(r) => (r.first, r.last),
            None => self.use_case.step_range(self.store),
        }
    }

    fn cluster(&self, batch: &Batch, key: u64) -> Result<Partition> {
        let n = batch.len();
        let k = self.config.rho.cluster_count(n)?;
        let seed = mix(self.config.seed, &[0x636c, key]);
        match self.config.method {
            ClusterMethod::Bypass => Ok(Partition::singletons(n)),
            ClusterMethod::Random => random_partition(n, k, seed),
            ClusterMethod::KMedoids => {
                let spec = self.config.distance_kind().fit(&batch.points, &self.use_case.gower_layout())?;
                k_medoids(&batch.points, k, &spec, seed, self.config.max_iter)
            }
        }
    }

    fn proxies(&self, partition: &Partition, batch: &Batch, outcomes: Option<&[f64]>) -> Result<Vec<ProxyEntity>> {
        if self.config.method == ClusterMethod::Bypass {
            return Ok(Vec::new());
        }
        make_proxies(partition, &batch.inputs, outcomes)
    }

    fn observe(&mut self, record: PhaseRecord<'_>) {
        if let Some(f) = self.observer.as_mut() {
            f(&record);
        }
    }

    /// Run step `t`. Steps must be strictly increasing; a prediction batch is
    /// reused by the next step only when that step is `t + 1`.
    pub fn run_step(&mut self, t: i64) -> Result<StepResult> {
        self.step_inner(t).map_err(|e| e.at_step(t))
    }

    fn step_inner(&mut self, t: i64) -> Result<StepResult> {
        if t < 1 {
            return Err(Error::InvalidArgument(format!("steps start at 1, got {t}")));
        }
        if let Some(last) = self.last_step {
            if t <= last {
                return Err(Error::InvalidArgument(format!("step {t} does not follow step {last}")));
            }
        }
        self.last_step = Some(t);
        let store = self.store;
        let mut out = StepResult { t, ..Default::default() };
        let resolved_before = self.ledger.resolved().len();

        // training phase
        let selected = self.use_case.select_training(store, t);
        let cached = self.cache.take().filter(|c| c.t + 1 == t);
        if !selected.is_empty() {
            let (batch, partition) = match cached {
                Some(c) => {
                    if c.batch.entities != selected {
                        return Err(Error::SelectionContract(format!(
                            "prediction set of step {} ({} entities) differs from training set of step {t} ({} entities)",
                            c.t,
                            c.batch.len(),
                            selected.len()
                        )));
                    }
                    (c.batch, c.partition)
                }
                None => {
                    let batch = self.use_case.encode(store, Phase::Training, t, selected)?;
                    let partition = self.cluster(&batch, self.use_case.batch_key(Phase::Training, t))?;
                    (batch, partition)
                }
            };
            let ys: Vec<f64> = batch.entities.iter().map(|&c| self.use_case.training_outcome(store, c, t)).collect::<Result<_>>()?;
            let proxies = self.proxies(&partition, &batch, Some(&ys))?;
            self.observe(PhaseRecord {
                t,
                phase: Phase::Training,
                rho: self.config.rho,
                method: self.config.method,
                batch: &batch,
                outcomes: Some(&ys),
                partition: &partition,
                proxies: &proxies,
            });
            if self.config.method == ClusterMethod::Bypass {
                self.model.update(&batch.inputs, &ys)?;
            } else {
                let xs: Vec<Vec<f64>> = proxies.iter().map(|p| p.x.clone()).collect();
                let py: Vec<f64> = proxies.iter().map(|p| p.y.expect("training proxies carry outcomes")).collect();
                self.model.update(&xs, &py)?;
            }
            out.n_train = batch.len();
            out.k_train = partition.k();
            for (&c, &y) in batch.entities.iter().zip(&ys) {
                self.ledger.resolve(c, y, t, |r| self.use_case.matures(r.step, t));
            }
            out.train_partition = Some(partition);
        }

        // prediction phase
        let selected = self.use_case.select_prediction(store, t);
        out.n_pred = selected.len();
        if !selected.is_empty() {
            if self.model.updates() == 0 {
                info!("step {t}: model is cold, skipping {} predictions", selected.len());
                out.cold = true;
            } else {
                let batch = self.use_case.encode(store, Phase::Prediction, t, selected)?;
                let partition = self.cluster(&batch, self.use_case.batch_key(Phase::Prediction, t))?;
                let proxies = self.proxies(&partition, &batch, None)?;
                self.observe(PhaseRecord {
                    t,
                    phase: Phase::Prediction,
                    rho: self.config.rho,
                    method: self.config.method,
                    batch: &batch,
                    outcomes: None,
                    partition: &partition,
                    proxies: &proxies,
                });
                let mut by_cluster = vec![f64::NAN; partition.k()];
                if self.config.method == ClusterMethod::Bypass {
                    by_cluster = self.model.predict(&batch.inputs)?;
                    out.proxy_predictions = by_cluster.iter().copied().enumerate().collect();
                } else {
                    let xs: Vec<Vec<f64>> = proxies.iter().map(|p| p.x.clone()).collect();
                    let preds = self.model.predict(&xs)?;
                    for (p, &y) in proxies.iter().zip(&preds) {
                        by_cluster[p.cluster] = y;
                        out.proxy_predictions.push((p.cluster, y));
                    }
                }
                for (&c, &g) in batch.entities.iter().zip(partition.assignment()) {
                    let y = by_cluster[g];
                    out.entity_predictions.push((c, y));
                    self.ledger.push(PendingRecord {
                        entity: c,
                        step: t,
                        predicted: y,
                        cluster: g,
                        proxy_prediction: y,
                        previous: self.use_case.previous_outcome(store, c, t),
                    })?;
                }
                out.k_pred = partition.k();
                if self.config.reuse && self.use_case.reuses_prediction_batch() {
                    self.cache = Some(Cached { t, batch, partition: partition.clone() });
                }
                out.pred_partition = Some(partition);
            }
        }

        out.metrics = ledger::step_metrics(t, self.ledger.resolved()[resolved_before..].iter());
        debug!("step {t}: train {}/{} pred {}/{} resolved {}", out.n_train, out.k_train, out.n_pred, out.k_pred, out.metrics.resolved_entities);
        Ok(out)
    }

    /// Run every step of the range and collect the results.
    pub fn run(mut self) -> Result<RunOutput> {
        let (first, last) = self.step_range();
        let mut steps = Vec::new();
        for t in first..=last {
            steps.push(self.run_step(t)?);
        }
        let report = MetricReport { steps: steps.iter().map(|s| s.metrics.clone()).collect() };
        Ok(RunOutput { config: self.config, steps, ledger: self.ledger, report })
    }
}

pub fn run_stream(store: &EventStore, config: &PipelineConfig) -> Result<RunOutput> {
    Pipeline::new(store, config.clone())?.run()
}

#[cfg(test)]
mod tests;
