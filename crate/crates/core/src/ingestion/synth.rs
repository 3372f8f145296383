//! Synthetic event streams with known archetype structure.
//!
//! Every entity draws one archetype. Shopper archetypes fix a label mix, a
//! visit rate and a spend line `intercept + slope * week`; invoice
//! archetypes fix a prefix mix, preferred attribute values and a mean
//! payment duration. `noise_scale` scales every noise term, so a zero value
//! reproduces archetype parameters exactly.
//!
//! Generated times sit on a 1/1024 grid, which keeps sums and differences of
//! times exact in `f64`.

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{
    ActivityId, Alphabet, AttrValue, AttributeDef, AttributeSchema, EventStore, EventStoreBuilder, TimeBase,
};
use crate::ingestion::filter::{INVOICE_ATTRIBUTES, RIR_LABEL, VCI_LABEL};

const GRID: f64 = 1024.0;
/// 2018-01-01T00:00:00Z
pub const INVOICE_ORIGIN_UNIX: i64 = 1_514_764_800;
/// Longest horizon, in days, for which every invoice case still ends in the
/// origin's calendar year.
pub const MAX_INVOICE_HORIZON: u32 = 200;
const MAX_DURATION: f64 = 150.0;

fn snap(t: f64) -> f64 {
    (t * GRID).floor() / GRID
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Shopper,
    Invoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub flavor: Flavor,
    pub n_entities: usize,
    pub n_archetypes: usize,
    pub noise_scale: f64,
    /// Weeks for shoppers, days for invoices.
    pub horizon: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shopper: ShopperParams,
    #[serde(default)]
    pub invoice: InvoiceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShopperParams {
    pub n_labels: usize,
    /// Exact visits per week; Poisson with the archetype rate when absent.
    pub fixed_visits: Option<u32>,
    /// Persistent per-entity spend offset, in units of `noise_scale`.
    pub entity_spread: f64,
    /// Per-visit attribute noise, in units of `noise_scale`.
    pub attribute_noise: f64,
    /// Entities start uniformly in weeks `0..=start_spread`.
    pub start_spread: u32,
    /// Explicit archetypes; drawn from the seed when absent.
    pub archetypes: Option<Vec<ShopperArchetype>>,
}

impl Default for ShopperParams {
    fn default() -> Self {
        Self {
            n_labels: 8,
            fixed_visits: None,
            entity_spread: 0.0,
            attribute_noise: 0.01,
            start_spread: 0,
            archetypes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShopperArchetype {
    pub label_weights: Vec<f64>,
    pub visit_rate: f64,
    pub spend_intercept: f64,
    #[serde(default)]
    pub spend_slope: f64,
    pub freshness: f64,
    pub item_value: f64,
    pub product_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvoiceParams {
    /// Poisson arrivals per day; `n_entities` uniform arrivals when absent.
    pub arrival_rate: Option<f64>,
    /// Probability that a categorical attribute takes the archetype's
    /// preferred value instead of a uniform draw.
    pub attribute_purity: f64,
    pub archetypes: Option<Vec<InvoiceArchetype>>,
}

impl Default for InvoiceParams {
    fn default() -> Self {
        Self { arrival_rate: None, attribute_purity: 0.85, archetypes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvoiceArchetype {
    /// Mean VCI-to-RIR duration in days.
    pub duration_mean: f64,
    /// Mix over the prefix activities; uniform when empty.
    #[serde(default)]
    pub prefix_weights: Vec<f64>,
    #[serde(default = "default_prefix_len")]
    pub prefix_len_mean: f64,
    /// Preferred category per categorical attribute; drawn when empty.
    #[serde(default)]
    pub preferred: Vec<u32>,
    /// Probability of `true` for each boolean attribute; drawn when empty.
    #[serde(default)]
    pub flag_probability: Vec<f64>,
}

fn default_prefix_len() -> f64 {
    3.0
}

/// Activities that may precede VCI in a synthetic invoice.
pub const PREFIX_LABELS: [&str; 6] = [
    "Create Purchase Order Item",
    "Change Price",
    "Change Quantity",
    "Receive Order Confirmation",
    "Record Goods Receipt",
    "Remove Payment Block",
];
pub const CLEAR_LABEL: &str = "Clear Invoice";

/// Categorical sizes of the invoice attributes, in [`INVOICE_ATTRIBUTES`]
/// order, with `None` marking the two flags.
pub const INVOICE_ATTRIBUTE_SIZES: [Option<usize>; 8] = [Some(3), Some(3), None, None, Some(3), Some(5), Some(21), Some(4)];

pub fn shopper_event_schema() -> AttributeSchema {
    AttributeSchema::new(vec![
        AttributeDef::numeric("freshness"),
        AttributeDef::numeric("item_value"),
        AttributeDef::numeric("product_density"),
        AttributeDef::numeric("total_value"),
        AttributeDef::numeric("total_item_count"),
    ])
}

pub fn shopper_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("dept_{i:02}")).collect()
}

pub fn invoice_entity_schema() -> AttributeSchema {
    AttributeSchema::new(
        INVOICE_ATTRIBUTES
            .iter()
            .zip(INVOICE_ATTRIBUTE_SIZES)
            .map(|(name, size)| match size {
                Some(k) => {
                    let short: String = name.trim_start_matches("case ").chars().filter(|c| c.is_alphanumeric()).collect();
                    AttributeDef::categorical(*name, (0..k).map(|i| format!("{short}_{i:02}")))
                }
                None => AttributeDef::boolean(*name),
            })
            .collect(),
    )
}

/// One row of a ground-truth table. For shoppers `period` is the week and
/// `value` that week's spend; for invoices `period` is the VCI day and
/// `value` the VCI-to-RIR duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub entity_id: String,
    pub archetype: usize,
    pub period: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub rows: Vec<TruthRow>,
}

impl GroundTruth {
    pub fn archetype_of(&self, entity: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.entity_id == entity).map(|r| r.archetype)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return bad(format!("noise_scale must be finite and >= 0, got {}", self.noise_scale));
        }
        if self.n_archetypes == 0 || self.n_archetypes > self.n_entities {
            return bad(format!(
                "need 1 <= n_archetypes <= n_entities, got {} archetypes for {} entities",
                self.n_archetypes, self.n_entities
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        match self.flavor {
            Flavor::Shopper => {
                let p = &self.shopper;
                if p.n_labels == 0 {
                    return bad("n_labels must be positive".into());
                }
                if p.entity_spread < 0.0 || p.attribute_noise < 0.0 {
                    return bad("entity_spread and attribute_noise must be >= 0".into());
                }
                if let Some(a) = &p.archetypes {
                    if a.len() != self.n_archetypes {
                        return bad(format!("{} archetypes listed, n_archetypes = {}", a.len(), self.n_archetypes));
                    }
                    for arch in a {
                        if arch.label_weights.len() != p.n_labels {
                            return bad(format!("label_weights needs {} entries", p.n_labels));
                        }
                        if !(arch.visit_rate > 0.0) {
                            return bad("visit_rate must be positive".into());
                        }
                    }
                }
            }
            Flavor::Invoice => {
                let p = &self.invoice;
                if self.horizon > MAX_INVOICE_HORIZON {
                    return bad(format!("invoice horizon is capped at {MAX_INVOICE_HORIZON} days"));
                }
                if let Some(r) = p.arrival_rate {
                    if !(r > 0.0) {
                        return bad("arrival_rate must be positive".into());
                    }
                }
                if !(0.0..=1.0).contains(&p.attribute_purity) {
                    return bad("attribute_purity must lie in [0, 1]".into());
                }
                if let Some(a) = &p.archetypes {
                    if a.len() != self.n_archetypes {
                        return bad(format!("{} archetypes listed, n_archetypes = {}", a.len(), self.n_archetypes));
                    }
                    for arch in a {
                        if !(arch.duration_mean > 0.0 && arch.duration_mean <= MAX_DURATION) {
                            return bad(format!("duration_mean must lie in (0, {MAX_DURATION}]"));
                        }
                        if !arch.prefix_weights.is_empty() && arch.prefix_weights.len() != PREFIX_LABELS.len() {
                            return bad(format!("prefix_weights needs {} entries", PREFIX_LABELS.len()));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Shoppers with no persistent offsets whose weekly spend noise dominates
    /// the prediction error. Visit attributes follow one latent level per
    /// archetype while spend alternates between low and high levels, so the
    /// archetype is visible to clustering but not linear in the attributes.
    pub fn noisy_shoppers(n_entities: usize, horizon: u32, seed: u64) -> Self {
        let archetypes = (0..5)
            .map(|u| {
                let u = f64::from(u);
                ShopperArchetype {
                    label_weights: vec![1.0],
                    visit_rate: 3.0,
                    spend_intercept: if u % 2.0 == 0.0 { 200.0 } else { 40.0 },
                    spend_slope: 0.0,
                    freshness: 0.1 + 0.2 * u,
                    item_value: 2.0 + u,
                    product_density: 1.0 + 0.4 * u,
                }
            })
            .collect();
        Self {
            flavor: Flavor::Shopper,
            n_entities,
            n_archetypes: 5,
            noise_scale: 40.0,
            horizon,
            seed,
            shopper: ShopperParams {
                n_labels: 1,
                fixed_visits: Some(3),
                entity_spread: 0.0,
                attribute_noise: 0.0,
                start_spread: 2,
                archetypes: Some(archetypes),
            },
            invoice: InvoiceParams::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Draw `n` archetypes from the seed stream.
fn draw_shopper_archetypes(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> Vec<ShopperArchetype> {
    (0..n)
        .map(|j| {
            let dominant = j % labels;
            let label_weights = (0..labels)
                .map(|l| if l == dominant { 4.0 } else { rng.random_range(0.2..1.0) })
                .collect();
            ShopperArchetype {
                label_weights,
                visit_rate: rng.random_range(1.0..4.0),
                spend_intercept: rng.random_range(40.0..200.0),
                spend_slope: rng.random_range(-2.0..2.0),
                freshness: rng.random_range(0.1..0.9),
                item_value: rng.random_range(1.5..8.0),
                product_density: rng.random_range(1.0..3.0),
            }
        })
        .collect()
}

fn draw_invoice_archetypes(rng: &mut ChaCha8Rng, n: usize) -> Vec<InvoiceArchetype> {
    (0..n).map(|_| InvoiceArchetype {
        duration_mean: rng.random_range(2.0..20.0),
        prefix_weights: Vec::new(),
        prefix_len_mean: rng.random_range(1.5..5.0),
        preferred: Vec::new(),
        flag_probability: Vec::new(),
    })
    .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Generate a shopper stream; time unit is one week.
pub fn generate_shopper_stream(spec: &SyntheticSpec) -> Result<(EventStore, GroundTruth)> {
    if spec.flavor != Flavor::Shopper {
        return Err(Error::InvalidArgument("spec flavor is not `shopper`".into()));
    }
    spec.validate()?;
    let p = &spec.shopper;
    let sigma = spec.noise_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let archetypes = match &p.archetypes {
        Some(a) => a.clone(),
        None => draw_shopper_archetypes(&mut rng, spec.n_archetypes, p.n_labels),
    };
    let pickers = archetypes
        .iter()
        .map(|a| WeightedIndex::new(&a.label_weights).map_err(|e| Error::InvalidArgument(format!("label_weights: {e}"))))
        .collect::<Result<Vec<_>>>()?;

    let alphabet = Alphabet::explicit(shopper_labels(p.n_labels))?;
    let mut b = EventStoreBuilder::new(alphabet, shopper_event_schema(), AttributeSchema::default())
        .time_base(TimeBase { origin_unix_secs: INVOICE_ORIGIN_UNIX, unit_secs: TimeBase::WEEK_SECS });
    let mut truth = GroundTruth::default();
    let attr_sd = sigma * p.attribute_noise;

    for i in 0..spec.n_entities {
        let name = format!("s{i:05}");
        // the first n_archetypes entities cover every archetype once
        let a = if i < spec.n_archetypes { i } else { rng.random_range(0..spec.n_archetypes) };
        let arch = &archetypes[a];
        let offset = sigma * p.entity_spread * normal(&mut rng);
        let start = if p.start_spread > 0 { rng.random_range(0..=p.start_spread) } else { 0 };
        let visits_dist = Poisson::new(arch.visit_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for w in start..spec.horizon {
            let n_visits = match p.fixed_visits {
                Some(v) => v as usize,
                None => visits_dist.sample(&mut rng) as usize,
            };
            let level = arch.spend_intercept + arch.spend_slope * f64::from(w);
            let spend = (level + offset + sigma * normal(&mut rng)).max(0.0);
            let mut times: Vec<f64> = (0..n_visits).map(|_| snap(f64::from(w) + rng.random::<f64>())).collect();
            times.sort_by(f64::total_cmp);
            let mut week_total = 0.0;
            for &t in &times {
                let value = spend / n_visits as f64;
                let jitter = |rng: &mut ChaCha8Rng| attr_sd * normal(rng);
                let freshness = (arch.freshness + jitter(&mut rng)).clamp(0.0, 1.0);
                let item_value = (arch.item_value + jitter(&mut rng)).max(0.05);
                let density = (arch.product_density + jitter(&mut rng)).max(0.0);
                let items = (value / item_value).round().max(1.0);
                let label = ActivityId(pickers[a].sample(&mut rng) as u16);
                b.push_id(
                    &name,
                    label,
                    t,
                    vec![
                        AttrValue::Numeric(freshness),
                        AttrValue::Numeric(item_value),
                        AttrValue::Numeric(density),
                        AttrValue::Numeric(value),
                        AttrValue::Numeric(items),
                    ],
                )?;
                week_total += value;
            }
            truth.rows.push(TruthRow { entity_id: name.clone(), archetype: a, period: w, value: week_total });
        }
    }
    Ok((b.build()?, truth))
}

/// Generate an invoice stream; time unit is one day from 2018-01-01 UTC.
pub fn generate_invoice_stream(spec: &SyntheticSpec) -> Result<(EventStore, GroundTruth)> {
    if spec.flavor != Flavor::Invoice {
        return Err(Error::InvalidArgument("spec flavor is not `invoice`".into()));
    }
    spec.validate()?;
    let p = &spec.invoice;
    let sigma = spec.noise_scale;
    let horizon = f64::from(spec.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut archetypes = match &p.archetypes {
        Some(a) => a.clone(),
        None => draw_invoice_archetypes(&mut rng, spec.n_archetypes),
    };
    let cat_sizes: Vec<usize> = INVOICE_ATTRIBUTE_SIZES.iter().flatten().copied().collect();
    let n_flags = INVOICE_ATTRIBUTE_SIZES.iter().filter(|s| s.is_none()).count();
    for arch in &mut archetypes {
        if arch.prefix_weights.is_empty() {
            arch.prefix_weights = (0..PREFIX_LABELS.len()).map(|_| rng.random_range(0.1..1.0)).collect();
        }
        if arch.preferred.is_empty() {
            arch.preferred = cat_sizes.iter().map(|&k| rng.random_range(0..k as u32)).collect();
        }
        if arch.flag_probability.is_empty() {
            arch.flag_probability = (0..n_flags).map(|_| if rng.random::<bool>() { 0.9 } else { 0.1 }).collect();
        }
        if arch.preferred.len() != cat_sizes.len() || arch.flag_probability.len() != n_flags {
            return Err(Error::InvalidArgument("archetype attribute lists have the wrong length".into()));
        }
    }
    let prefix_pickers = archetypes
        .iter()
        .map(|a| WeightedIndex::new(&a.prefix_weights).map_err(|e| Error::InvalidArgument(format!("prefix_weights: {e}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut arrivals: Vec<f64> = match p.arrival_rate {
        Some(rate) => {
            let gap = Exp::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut out = Vec::new();
            let mut t = gap.sample(&mut rng);
            while t < horizon {
                out.push(t);
                t += gap.sample(&mut rng);
            }
            out
        }
        None => (0..spec.n_entities).map(|_| rng.random_range(0.0..horizon)).collect(),
    };
    arrivals.sort_by(f64::total_cmp);

    let mut labels: Vec<&str> = PREFIX_LABELS.to_vec();
    labels.extend([VCI_LABEL, RIR_LABEL, CLEAR_LABEL]);
    let alphabet = Alphabet::sorted(labels);
    let prefix_ids: Vec<ActivityId> = PREFIX_LABELS.iter().map(|l| alphabet.id(l)).collect::<Result<_>>()?;
    let vci = alphabet.id(VCI_LABEL)?;
    let rir = alphabet.id(RIR_LABEL)?;
    let clear = alphabet.id(CLEAR_LABEL)?;
    let mut b = EventStoreBuilder::new(alphabet, AttributeSchema::default(), invoice_entity_schema())
        .time_base(TimeBase { origin_unix_secs: INVOICE_ORIGIN_UNIX, unit_secs: TimeBase::DAY_SECS });
    let mut truth = GroundTruth::default();
    let dur_noise = Normal::new(0.0, 1.0).expect("unit normal");

    for (i, &arrival) in arrivals.iter().enumerate() {
        let name = format!("inv{i:05}");
        let a = if i < archetypes.len() { i } else { rng.random_range(0..archetypes.len()) };
        let arch = &archetypes[a];

        let start = snap(arrival);
        let span = snap(rng.random_range(0.5..5.0));
        let vci_t = start + span;
        let extra = Poisson::new(arch.prefix_len_mean.max(1.0 + 1e-9) - 1.0)
            .map(|d| d.sample(&mut rng) as usize)
            .unwrap_or(0)
            .min(9);
        let mut prefix_times: Vec<f64> = (0..extra).map(|_| snap(start + rng.random::<f64>() * span)).collect();
        prefix_times.push(start);
        prefix_times.sort_by(f64::total_cmp);
        for &t in &prefix_times {
            let label = prefix_ids[prefix_pickers[a].sample(&mut rng)];
            b.push_id(&name, label, t.min(vci_t - 1.0 / GRID), vec![])?;
        }
        b.push_id(&name, vci, vci_t, vec![])?;
        let duration = snap(arch.duration_mean + sigma * dur_noise.sample(&mut rng)).clamp(1.0 / GRID, MAX_DURATION);
        let rir_t = vci_t + duration;
        b.push_id(&name, rir, rir_t, vec![])?;
        b.push_id(&name, clear, rir_t + snap(rng.random_range(0.0..5.0)), vec![])?;

        let mut attrs = Vec::with_capacity(INVOICE_ATTRIBUTE_SIZES.len());
        let (mut ci, mut fi) = (0, 0);
        for size in INVOICE_ATTRIBUTE_SIZES {
            match size {
                Some(k) => {
                    let v = if rng.random::<f64>() < p.attribute_purity { arch.preferred[ci] } else { rng.random_range(0..k as u32) };
                    attrs.push(AttrValue::Categorical(v));
                    ci += 1;
                }
                None => {
                    attrs.push(AttrValue::Boolean(rng.random::<f64>() < arch.flag_probability[fi]));
                    fi += 1;
                }
            }
        }
        b.set_entity_attributes(&name, attrs)?;
        truth.rows.push(TruthRow { entity_id: name, archetype: a, period: vci_t.floor() as u32, value: rir_t - vci_t });
    }
    Ok((b.build()?, truth))
}

/// Dispatch on the spec flavor.
pub fn generate(spec: &SyntheticSpec) -> Result<(EventStore, GroundTruth)> {
    match spec.flavor {
        Flavor::Shopper => generate_shopper_stream(spec),
        Flavor::Invoice => generate_invoice_stream(spec),
    }
}
