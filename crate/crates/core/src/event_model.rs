//! Events, entities and the frozen event store.
//!
//! An [`EventStore`] is built once through [`EventStoreBuilder`] and is
//! read-only afterwards. Events iterate in non-decreasing time order; events
//! sharing a timestamp keep their insertion order. Entities are interned and
//! numbered in lexicographic order of their external identifiers, so every
//! "entity-id order" tie rule in the crate follows the identifier text.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of an entity inside one [`EventStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense index of an activity label inside an [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActivityId(pub u16);

impl ActivityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The finite, ordered set of activity labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, ActivityId>,
}

impl Alphabet {
    /// Lexicographically ordered alphabet. Duplicates are collapsed.
    pub fn sorted<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Self::build(set.into_iter().collect())
    }

    /// Alphabet in exactly the given order.
    pub fn explicit<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Schema {
                    column: "activity".into(),
                    message: format!("duplicate activity label `{l}` in explicit alphabet"),
                });
            }
        }
        Ok(Self::build(labels))
    }

    fn build(labels: Vec<String>) -> Self {
        assert!(labels.len() <= u16::MAX as usize, "alphabet too large");
        let lookup = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), ActivityId(i as u16)))
            .collect();
        Self { labels, lookup }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: ActivityId) -> &str {
        &self.labels[id.index()]
    }

    pub fn id(&self, label: &str) -> Result<ActivityId> {
        self.lookup.get(label).copied().ok_or_else(|| Error::Schema {
            column: "activity".into(),
            message: format!("activity `{label}` is not in the alphabet"),
        })
    }

    pub fn contains(&self, label: &str) -> bool {
        self.lookup.contains_key(label)
    }
}

/// Kind of an event or entity attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttrKind {
    Numeric,
    Boolean,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttrKind,
}

impl AttributeDef {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: AttrKind::Numeric }
    }

    pub fn boolean(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: AttrKind::Boolean }
    }

    pub fn categorical<I, S>(name: impl Into<String>, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            kind: AttrKind::Categorical { categories: categories.into_iter().map(Into::into).collect() },
        }
    }
}

/// A single attribute value. Categorical values are indices into the
/// attribute's category list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Numeric(f64),
    Boolean(bool),
    Categorical(u32),
}

impl AttrValue {
    pub fn as_f64(self) -> f64 {
        match self {
            AttrValue::Numeric(v) => v,
            AttrValue::Boolean(b) => f64::from(u8::from(b)),
            AttrValue::Categorical(c) => f64::from(c),
        }
    }
}

/// Ordered attribute definitions, for either events or entities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<AttributeDef>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Self {
        Self { attributes }
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.position(name).ok_or_else(|| Error::Schema {
            column: name.into(),
            message: "required attribute is missing from the schema".into(),
        })
    }

    /// Check that `values` conforms to this schema.
    pub fn validate(&self, values: &[AttrValue]) -> Result<()> {
        if values.len() != self.attributes.len() {
            return Err(Error::Schema {
                column: "<attributes>".into(),
                message: format!("expected {} attribute values, got {}", self.attributes.len(), values.len()),
            });
        }
        for (def, value) in self.attributes.iter().zip(values) {
            let ok = match (&def.kind, value) {
                (AttrKind::Numeric, AttrValue::Numeric(v)) => v.is_finite(),
                (AttrKind::Boolean, AttrValue::Boolean(_)) => true,
                (AttrKind::Categorical { categories }, AttrValue::Categorical(c)) => (*c as usize) < categories.len(),
                _ => false,
            };
            if !ok {
                return Err(Error::Schema {
                    column: def.name.clone(),
                    message: format!("value {value:?} does not conform to {:?}", def.kind),
                });
            }
        }
        Ok(())
    }
}

/// One timestamped activity occurrence belonging to an entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub entity: EntityId,
    pub activity: ActivityId,
    pub time: f64,
    pub attributes: Vec<AttrValue>,
}

/// Mapping between store time units and absolute UTC time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBase {
    /// Unix seconds of store time 0.
    pub origin_unix_secs: i64,
    /// Seconds per store time unit.
    pub unit_secs: f64,
}

impl TimeBase {
    pub const DAY_SECS: f64 = 86_400.0;
    pub const WEEK_SECS: f64 = 7.0 * 86_400.0;

    pub fn to_store_time(&self, unix_secs: f64) -> f64 {
        (unix_secs - self.origin_unix_secs as f64) / self.unit_secs
    }

    pub fn to_unix_secs(&self, time: f64) -> f64 {
        self.origin_unix_secs as f64 + time * self.unit_secs
    }
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    start: f64,
    end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start < end) || start.is_nan() || end.is_nan() {
            return Err(Error::InvalidArgument(format!("invalid time window [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn contains(&self, time: f64) -> bool {
        self.start <= time && time < self.end
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Accumulates events before freezing them into an [`EventStore`].
#[derive(Debug, Clone)]
pub struct EventStoreBuilder {
    alphabet: Alphabet,
    event_schema: AttributeSchema,
    entity_schema: AttributeSchema,
    time_base: Option<TimeBase>,
    entity_ids: BTreeMap<String, ()>,
    entity_attrs: HashMap<String, Vec<AttrValue>>,
    pending: Vec<(String, ActivityId, f64, Vec<AttrValue>)>,
}

impl EventStoreBuilder {
    pub fn new(alphabet: Alphabet, event_schema: AttributeSchema, entity_schema: AttributeSchema) -> Self {
        Self {
            alphabet,
            event_schema,
            entity_schema,
            time_base: None,
            entity_ids: BTreeMap::new(),
            entity_attrs: HashMap::new(),
            pending: Vec::new(),
        }
    }

    pub fn time_base(mut self, base: TimeBase) -> Self {
        self.time_base = Some(base);
        self
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn push(&mut self, entity: &str, activity: &str, time: f64, attributes: Vec<AttrValue>) -> Result<()> {
        let id = self.alphabet.id(activity)?;
        self.push_id(entity, id, time, attributes)
    }

    pub fn push_id(&mut self, entity: &str, activity: ActivityId, time: f64, attributes: Vec<AttrValue>) -> Result<()> {
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::InvalidArgument(format!("event time {time} must be finite and non-negative")));
        }
        if activity.index() >= self.alphabet.len() {
            return Err(Error::Schema {
                column: "activity".into(),
                message: format!("activity index {} outside alphabet of {}", activity.0, self.alphabet.len()),
            });
        }
        self.event_schema.validate(&attributes)?;
        if !self.entity_ids.contains_key(entity) {
            self.entity_ids.insert(entity.to_owned(), ());
        }
        self.pending.push((entity.to_owned(), activity, time, attributes));
        Ok(())
    }

    /// Set the attribute record of an entity. Entities with a non-empty
    /// entity schema must have one before [`EventStoreBuilder::build`].
    pub fn set_entity_attributes(&mut self, entity: &str, values: Vec<AttrValue>) -> Result<()> {
        self.entity_schema.validate(&values)?;
        if let Some(existing) = self.entity_attrs.get(entity) {
            if existing != &values {
                let column = self
                    .entity_schema
                    .attributes
                    .iter()
                    .zip(existing.iter().zip(&values))
                    .find(|(_, (a, b))| a != b)
                    .map(|(d, _)| d.name.clone())
                    .unwrap_or_default();
                return Err(Error::Schema {
                    column,
                    message: format!("conflicting entity attribute values for `{entity}`"),
                });
            }
            return Ok(());
        }
        self.entity_attrs.insert(entity.to_owned(), values);
        Ok(())
    }

    pub fn build(self) -> Result<EventStore> {
        let names: Vec<String> = self.entity_ids.into_keys().collect();
        let index: HashMap<&str, EntityId> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), EntityId(i as u32))).collect();

        let mut events: Vec<Event> = self
            .pending
            .into_iter()
            .map(|(name, activity, time, attributes)| Event { entity: index[name.as_str()], activity, time, attributes })
            .collect();
        // stable: equal timestamps keep insertion order
        events.sort_by(|a, b| a.time.total_cmp(&b.time));

        let entity_attrs = if self.entity_schema.is_empty() {
            vec![Vec::new(); names.len()]
        } else {
            let mut attrs = Vec::with_capacity(names.len());
            for n in &names {
                match self.entity_attrs.get(n) {
                    Some(v) => attrs.push(v.clone()),
                    None => {
                        return Err(Error::Schema {
                            column: "<entity attributes>".into(),
                            message: format!("entity `{n}` has no attribute record"),
                        })
                    }
                }
            }
            attrs
        };

        let mut by_entity: Vec<Vec<u32>> = vec![Vec::new(); names.len()];
        for (i, e) in events.iter().enumerate() {
            by_entity[e.entity.index()].push(i as u32);
        }

        Ok(EventStore {
            alphabet: self.alphabet,
            event_schema: self.event_schema,
            entity_schema: self.entity_schema,
            time_base: self.time_base,
            entity_names: names,
            entity_attrs,
            events,
            by_entity,
        })
    }
}

/// Frozen, time-ordered collection of events with per-entity indexes.
#[derive(Debug, Clone)]
pub struct EventStore {
    alphabet: Alphabet,
    event_schema: AttributeSchema,
    entity_schema: AttributeSchema,
    time_base: Option<TimeBase>,
    entity_names: Vec<String>,
    entity_attrs: Vec<Vec<AttrValue>>,
    events: Vec<Event>,
    by_entity: Vec<Vec<u32>>,
}

impl EventStore {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn event_schema(&self) -> &AttributeSchema {
        &self.event_schema
    }

    pub fn entity_schema(&self) -> &AttributeSchema {
        &self.entity_schema
    }

    pub fn time_base(&self) -> Option<TimeBase> {
        self.time_base
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entity_names.len() as u32).map(EntityId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id.index()]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| EntityId(i as u32))
    }

    pub fn entity_attributes(&self, id: EntityId) -> &[AttrValue] {
        &self.entity_attrs[id.index()]
    }

    /// All events of one entity, in time order.
    pub fn entity_events(&self, id: EntityId) -> impl DoubleEndedIterator<Item = &Event> + ExactSizeIterator + '_ {
        self.by_entity[id.index()].iter().map(move |&i| &self.events[i as usize])
    }

    /// Time of the entity's first event.
    pub fn start(&self, id: EntityId) -> Option<f64> {
        self.by_entity[id.index()].first().map(|&i| self.events[i as usize].time)
    }

    pub fn max_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.time)
    }

    /// Events with `w.start <= time < w.end`, in time order.
    pub fn window_slice(&self, w: TimeWindow) -> &[Event] {
        let lo = self.events.partition_point(|e| e.time < w.start());
        let hi = self.events.partition_point(|e| e.time < w.end());
        &self.events[lo..hi]
    }

    /// Events of entity `c` inside `w`, in time order.
    pub fn entity_slice(&self, w: TimeWindow, c: EntityId) -> Vec<&Event> {
        let idx = &self.by_entity[c.index()];
        let lo = idx.partition_point(|&i| self.events[i as usize].time < w.start());
        let hi = idx.partition_point(|&i| self.events[i as usize].time < w.end());
        idx[lo..hi].iter().map(|&i| &self.events[i as usize]).collect()
    }

    /// Whether entity `c` has at least one event inside `w`.
    pub fn has_events_in(&self, w: TimeWindow, c: EntityId) -> bool {
        let idx = &self.by_entity[c.index()];
        let lo = idx.partition_point(|&i| self.events[i as usize].time < w.start());
        lo < idx.len() && self.events[idx[lo] as usize].time < w.end()
    }

    /// Copy of this store containing only events with `time < cutoff`.
    /// Entities keep their identifiers even when all their events are cut.
    pub fn truncated(&self, cutoff: f64) -> EventStore {
        let n = self.events.partition_point(|e| e.time < cutoff);
        let events: Vec<Event> = self.events[..n].to_vec();
        let mut by_entity: Vec<Vec<u32>> = vec![Vec::new(); self.entity_names.len()];
        for (i, e) in events.iter().enumerate() {
            by_entity[e.entity.index()].push(i as u32);
        }
        EventStore {
            alphabet: self.alphabet.clone(),
            event_schema: self.event_schema.clone(),
            entity_schema: self.entity_schema.clone(),
            time_base: self.time_base,
            entity_names: self.entity_names.clone(),
            entity_attrs: self.entity_attrs.clone(),
            events,
            by_entity,
        }
    }

    /// Rebuild a store from a subset of entities, optionally reducing the
    /// entity schema to `keep_attrs` (in that order) and restricting the
    /// alphabet and categorical category lists to values still in use.
    pub fn restrict(&self, keep: &[EntityId], keep_attrs: Option<&[String]>) -> Result<EventStore> {
        let attr_positions: Vec<usize> = match keep_attrs {
            Some(names) => names
                .iter()
                .map(|n| self.entity_schema.require(n))
                .collect::<Result<_>>()?,
            None => (0..self.entity_schema.len()).collect(),
        };

        let mut used_labels = BTreeSet::new();
        for &c in keep {
            for e in self.entity_events(c) {
                used_labels.insert(self.alphabet.label(e.activity).to_owned());
            }
        }
        let alphabet = Alphabet::sorted(used_labels);

        let mut used_cats: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); attr_positions.len()];
        for &c in keep {
            let attrs = self.entity_attributes(c);
            for (slot, &p) in attr_positions.iter().enumerate() {
                if let AttrValue::Categorical(v) = attrs[p] {
                    used_cats[slot].insert(v);
                }
            }
        }
        let mut remaps: Vec<Option<HashMap<u32, u32>>> = Vec::with_capacity(attr_positions.len());
        let mut defs = Vec::with_capacity(attr_positions.len());
        for (slot, &p) in attr_positions.iter().enumerate() {
            let def = &self.entity_schema.attributes[p];
            match &def.kind {
                AttrKind::Categorical { categories } => {
                    let mut kept: Vec<(String, u32)> =
                        used_cats[slot].iter().map(|&v| (categories[v as usize].clone(), v)).collect();
                    kept.sort();
                    let remap = kept.iter().enumerate().map(|(new, (_, old))| (*old, new as u32)).collect();
                    remaps.push(Some(remap));
                    defs.push(AttributeDef::categorical(def.name.clone(), kept.into_iter().map(|(s, _)| s)));
                }
                _ => {
                    remaps.push(None);
                    defs.push(def.clone());
                }
            }
        }
        let entity_schema = AttributeSchema::new(defs);

        let mut builder = EventStoreBuilder::new(alphabet, self.event_schema.clone(), entity_schema);
        builder.time_base = self.time_base;
        let keep_set: BTreeSet<EntityId> = keep.iter().copied().collect();
        for e in &self.events {
            if keep_set.contains(&e.entity) {
                let label = self.alphabet.label(e.activity);
                builder.push(self.entity_name(e.entity), label, e.time, e.attributes.clone())?;
            }
        }
        for &c in keep {
            if self.entity_schema.is_empty() {
                continue;
            }
            let attrs = self.entity_attributes(c);
            let values = attr_positions
                .iter()
                .zip(&remaps)
                .map(|(&p, remap)| match (attrs[p], remap) {
                    (AttrValue::Categorical(v), Some(m)) => AttrValue::Categorical(m[&v]),
                    (v, _) => v,
                })
                .collect();
            builder.set_entity_attributes(self.entity_name(c), values)?;
        }
        builder.build()
    }
}

/// Relative activity frequencies of `events` over `alphabet`.
///
/// Returns the all-zeros vector for an empty input.
pub fn parikh<'a, I>(events: I, alphabet: &Alphabet) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut counts = vec![0usize; alphabet.len()];
    let mut total = 0usize;
    for e in events {
        let slot = counts.get_mut(e.activity.index()).ok_or_else(|| Error::Schema {
            column: "activity".into(),
            message: format!("activity index {} outside alphabet of {}", e.activity.0, alphabet.len()),
        })?;
        *slot += 1;
        total += 1;
    }
    if total == 0 {
        return Ok(vec![0.0; alphabet.len()]);
    }
    let n = total as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}
