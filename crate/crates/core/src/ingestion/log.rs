//! Flat CSV event logs.
//!
//! Layout: a header row, then one event per row. The entity, activity and
//! timestamp columns are bound by name through [`LogSchema`]; every other
//! bound column is either an event attribute or an entity attribute. Entity
//! attributes repeat on each row of the entity and must agree.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{
    Alphabet, AttrKind, AttrValue, AttributeDef, AttributeSchema, EventStore, EventStoreBuilder, TimeBase,
};

/// How the timestamp column is interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum TimestampFormat {
    /// Plain numbers already expressed in store time units. `origin` and
    /// `unit` optionally anchor them to calendar time.
    Units {
        #[serde(default)]
        origin: Option<String>,
        #[serde(default)]
        unit: Option<TimeUnit>,
    },
    /// ISO-8601 / RFC 3339 date-times, converted to `unit`s since `origin`
    /// (default: midnight UTC of the earliest timestamp in the file).
    Iso8601 {
        unit: TimeUnit,
        #[serde(default)]
        origin: Option<String>,
    },
}

impl Default for TimestampFormat {
    fn default() -> Self {
        TimestampFormat::Units { origin: None, unit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Second,
    Hour,
    Day,
    Week,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Second => 1.0,
            TimeUnit::Hour => 3600.0,
            TimeUnit::Day => TimeBase::DAY_SECS,
            TimeUnit::Week => TimeBase::WEEK_SECS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Boolean,
    /// Without `categories` the list is discovered from the file and sorted.
    Categorical {
        #[serde(default)]
        categories: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn numeric(name: &str) -> Self {
        Self { name: name.into(), kind: ColumnKind::Numeric }
    }

    pub fn boolean(name: &str) -> Self {
        Self { name: name.into(), kind: ColumnKind::Boolean }
    }

    pub fn categorical(name: &str, categories: Option<Vec<String>>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Categorical { categories } }
    }
}

/// Column bindings for reading an event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSchema {
    #[serde(default = "default_entity_column")]
    pub entity_column: String,
    #[serde(default = "default_activity_column")]
    pub activity_column: String,
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    #[serde(default)]
    pub timestamp: TimestampFormat,
    /// Explicit alphabet order; lexicographic when absent.
    #[serde(default)]
    pub alphabet: Option<Vec<String>>,
    #[serde(default)]
    pub event_attributes: Vec<ColumnSpec>,
    #[serde(default)]
    pub entity_attributes: Vec<ColumnSpec>,
}

fn default_entity_column() -> String {
    "entity_id".into()
}
fn default_activity_column() -> String {
    "activity".into()
}
fn default_timestamp_column() -> String {
    "timestamp".into()
}

impl Default for LogSchema {
    fn default() -> Self {
        Self {
            entity_column: default_entity_column(),
            activity_column: default_activity_column(),
            timestamp_column: default_timestamp_column(),
            timestamp: TimestampFormat::default(),
            alphabet: None,
            event_attributes: Vec::new(),
            entity_attributes: Vec::new(),
        }
    }
}

impl LogSchema {
    /// Bindings for the flattened CSV export of the 2019 purchase-order log:
    /// case and event columns carry `case ` / `event ` prefixes, times are
    /// naive date-times read as UTC and measured in days from 2018-01-01.
    pub fn bpic2019() -> Self {
        let entity_attributes = crate::ingestion::filter::INVOICE_ATTRIBUTES
            .iter()
            .map(|&name| match name {
                "case GR-Based Inv. Verif." | "case Goods Receipt" => ColumnSpec::boolean(name),
                _ => ColumnSpec::categorical(name, None),
            })
            .collect();
        Self {
            entity_column: "case concept:name".into(),
            activity_column: "event concept:name".into(),
            timestamp_column: "event time:timestamp".into(),
            timestamp: TimestampFormat::Iso8601 { unit: TimeUnit::Day, origin: Some("2018-01-01T00:00:00Z".into()) },
            alphabet: None,
            event_attributes: Vec::new(),
            entity_attributes,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("schema serializes")
    }

    /// Schema that reads back exactly what [`write_event_log`] wrote for `store`.
    pub fn for_store(store: &EventStore) -> Self {
        let to_spec = |d: &AttributeDef| ColumnSpec {
            name: d.name.clone(),
            kind: match &d.kind {
                AttrKind::Numeric => ColumnKind::Numeric,
                AttrKind::Boolean => ColumnKind::Boolean,
                AttrKind::Categorical { categories } => ColumnKind::Categorical { categories: Some(categories.clone()) },
            },
        };
        let timestamp = match store.time_base() {
            Some(tb) => TimestampFormat::Units {
                origin: Some(format_unix(tb.origin_unix_secs)),
                unit: Some(unit_for(tb.unit_secs)),
            },
            None => TimestampFormat::default(),
        };
        Self {
            timestamp,
            alphabet: Some(store.alphabet().labels().to_vec()),
            event_attributes: store.event_schema().attributes.iter().map(to_spec).collect(),
            entity_attributes: store.entity_schema().attributes.iter().map(to_spec).collect(),
            ..Self::default()
        }
    }
}

fn unit_for(secs: f64) -> TimeUnit {
    [TimeUnit::Second, TimeUnit::Hour, TimeUnit::Day, TimeUnit::Week]
        .into_iter()
        .find(|u| u.seconds() == secs)
        .unwrap_or(TimeUnit::Day)
}

fn format_unix(secs: i64) -> String {
    Utc.timestamp_opt(secs, 0).single().map(|d| d.to_rfc3339()).unwrap_or_default()
}

/// Parse an ISO-8601 timestamp into fractional Unix seconds. Values without
/// an offset are taken as UTC.
pub fn parse_iso(text: &str) -> Option<f64> {
    let text = text.trim();
    let to_secs = |d: DateTime<Utc>| d.timestamp() as f64 + f64::from(d.timestamp_subsec_nanos()) * 1e-9;
    if let Ok(d) = DateTime::parse_from_rfc3339(text) {
        return Some(to_secs(d.with_timezone(&Utc)));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%:z", "%Y-%m-%dT%H:%M:%S%.f%z"] {
        if let Ok(d) = DateTime::parse_from_str(text, fmt) {
            return Some(to_secs(d.with_timezone(&Utc)));
        }
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%d-%m-%Y %H:%M:%S%.f", "%d-%m-%Y %H:%M:%S"] {
        if let Ok(d) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(to_secs(Utc.from_utc_datetime(&d)));
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|d| to_secs(Utc.from_utc_datetime(&d)))
}

struct Binding {
    spec: ColumnSpec,
    index: usize,
}

fn bind(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
        column: name.into(),
        message: "column not found in header".into(),
    })
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "True" | "TRUE" | "1" => Some(true),
        "false" | "False" | "FALSE" | "0" => Some(false),
        _ => None,
    }
}

/// Read an event log from a CSV file.
pub fn read_event_log(path: &Path, schema: &LogSchema) -> Result<EventStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_event_log_from(BufReader::new(file), schema)
}

/// Read an event log from any reader. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn read_event_log_from<R: Read>(reader: R, schema: &LogSchema) -> Result<EventStore> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ent_col = bind(&headers, &schema.entity_column)?;
    let act_col = bind(&headers, &schema.activity_column)?;
    let ts_col = bind(&headers, &schema.timestamp_column)?;
    let ev_bind: Vec<Binding> = schema
        .event_attributes
        .iter()
        .map(|s| Ok(Binding { spec: s.clone(), index: bind(&headers, &s.name)? }))
        .collect::<Result<_>>()?;
    let en_bind: Vec<Binding> = schema
        .entity_attributes
        .iter()
        .map(|s| Ok(Binding { spec: s.clone(), index: bind(&headers, &s.name)? }))
        .collect::<Result<_>>()?;

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { row: i + 1, message: e.to_string() })?;
        rows.push(rec);
    }

    // scan pass: closed category lists and the alphabet
    let resolve_categories = |binds: &[Binding]| -> Vec<Option<Vec<String>>> {
        binds
            .iter()
            .map(|b| match &b.spec.kind {
                ColumnKind::Categorical { categories: Some(c) } => Some(c.clone()),
                ColumnKind::Categorical { categories: None } => {
                    let set: BTreeSet<&str> = rows.iter().map(|r| &r[b.index]).collect();
                    Some(set.into_iter().map(str::to_owned).collect())
                }
                _ => None,
            })
            .collect()
    };
    let ev_cats = resolve_categories(&ev_bind);
    let en_cats = resolve_categories(&en_bind);

    let alphabet = match &schema.alphabet {
        Some(order) => Alphabet::explicit(order.iter().cloned())?,
        None => Alphabet::sorted(rows.iter().map(|r| r[act_col].to_owned())),
    };

    let to_defs = |binds: &[Binding], cats: &[Option<Vec<String>>]| -> AttributeSchema {
        AttributeSchema::new(
            binds
                .iter()
                .zip(cats)
                .map(|(b, c)| AttributeDef {
                    name: b.spec.name.clone(),
                    kind: match &b.spec.kind {
                        ColumnKind::Numeric => AttrKind::Numeric,
                        ColumnKind::Boolean => AttrKind::Boolean,
                        ColumnKind::Categorical { .. } => {
                            AttrKind::Categorical { categories: c.clone().unwrap_or_default() }
                        }
                    },
                })
                .collect(),
        )
    };
    let event_schema = to_defs(&ev_bind, &ev_cats);
    let entity_schema = to_defs(&en_bind, &en_cats);

    let lookups = |cats: &[Option<Vec<String>>]| -> Vec<Option<HashMap<String, u32>>> {
        cats.iter()
            .map(|c| c.as_ref().map(|c| c.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect()))
            .collect()
    };
    let ev_lookup = lookups(&ev_cats);
    let en_lookup = lookups(&en_cats);

    let parse_value = |row: usize, b: &Binding, lookup: &Option<HashMap<String, u32>>, raw: &str| -> Result<AttrValue> {
        match &b.spec.kind {
            ColumnKind::Numeric => raw.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(AttrValue::Numeric).ok_or_else(|| {
                Error::Parse { row, message: format!("column `{}`: `{raw}` is not a number", b.spec.name) }
            }),
            ColumnKind::Boolean => parse_bool(raw).map(AttrValue::Boolean).ok_or_else(|| Error::Parse {
                row,
                message: format!("column `{}`: `{raw}` is not a boolean", b.spec.name),
            }),
            ColumnKind::Categorical { .. } => lookup
                .as_ref()
                .and_then(|m| m.get(raw))
                .map(|&c| AttrValue::Categorical(c))
                .ok_or_else(|| Error::Schema {
                    column: b.spec.name.clone(),
                    message: format!("row {row}: unknown category `{raw}`"),
                }),
        }
    };

    // timestamps
    let mut raw_times = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let raw = &r[ts_col];
        let v = match &schema.timestamp {
            TimestampFormat::Units { .. } => raw.trim().parse::<f64>().ok(),
            TimestampFormat::Iso8601 { .. } => parse_iso(raw),
        };
        match v {
            Some(v) if v.is_finite() => raw_times.push(v),
            _ => {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("column `{}`: cannot parse timestamp `{raw}`", schema.timestamp_column),
                })
            }
        }
    }
    let (time_base, times): (Option<TimeBase>, Vec<f64>) = match &schema.timestamp {
        TimestampFormat::Units { origin, unit } => {
            let base = match origin {
                Some(o) => {
                    let secs = parse_iso(o).ok_or_else(|| Error::Config(format!("cannot parse origin `{o}`")))?;
                    Some(TimeBase { origin_unix_secs: secs as i64, unit_secs: unit.unwrap_or(TimeUnit::Day).seconds() })
                }
                None => None,
            };
            (base, raw_times)
        }
        TimestampFormat::Iso8601 { unit, origin } => {
            let origin_secs = match origin {
                Some(o) => parse_iso(o).ok_or_else(|| Error::Config(format!("cannot parse origin `{o}`")))? as i64,
                None => {
                    let min = raw_times.iter().copied().fold(f64::INFINITY, f64::min);
                    if min.is_finite() {
                        (min / TimeBase::DAY_SECS).floor() as i64 * TimeBase::DAY_SECS as i64
                    } else {
                        0
                    }
                }
            };
            let base = TimeBase { origin_unix_secs: origin_secs, unit_secs: unit.seconds() };
            let times = raw_times.iter().map(|&s| base.to_store_time(s)).collect();
            (Some(base), times)
        }
    };

    let mut builder = EventStoreBuilder::new(alphabet, event_schema, entity_schema);
    if let Some(tb) = time_base {
        builder = builder.time_base(tb);
    }
    for (i, (r, &t)) in rows.iter().zip(&times).enumerate() {
        let row = i + 1;
        let entity = &r[ent_col];
        let activity = &r[act_col];
        if !builder.alphabet().contains(activity) {
            return Err(Error::Schema {
                column: schema.activity_column.clone(),
                message: format!("row {row}: activity `{activity}` is not in the alphabet"),
            });
        }
        let ev_values = ev_bind
            .iter()
            .zip(&ev_lookup)
            .map(|(b, l)| parse_value(row, b, l, &r[b.index]))
            .collect::<Result<Vec<_>>>()?;
        if !en_bind.is_empty() {
            let en_values = en_bind
                .iter()
                .zip(&en_lookup)
                .map(|(b, l)| parse_value(row, b, l, &r[b.index]))
                .collect::<Result<Vec<_>>>()?;
            builder.set_entity_attributes(entity, en_values)?;
        }
        builder.push(entity, activity, t, ev_values).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Parse { row, message: m },
            other => other,
        })?;
    }
    builder.build()
}

fn format_value(v: AttrValue, def: &AttributeDef) -> String {
    match (v, &def.kind) {
        (AttrValue::Categorical(c), AttrKind::Categorical { categories }) => categories[c as usize].clone(),
        (AttrValue::Boolean(b), _) => b.to_string(),
        (AttrValue::Numeric(x), _) => x.to_string(),
        (AttrValue::Categorical(c), _) => c.to_string(),
    }
}

/// Write `store` as CSV with numeric timestamps in store units. Read it back
/// with [`LogSchema::for_store`].
pub fn write_event_log<W: Write>(store: &EventStore, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut header = vec!["entity_id".to_owned(), "activity".to_owned(), "timestamp".to_owned()];
    header.extend(store.event_schema().attributes.iter().map(|a| a.name.clone()));
    header.extend(store.entity_schema().attributes.iter().map(|a| a.name.clone()));
    w.write_record(&header)?;
    let ev_defs = &store.event_schema().attributes;
    let en_defs = &store.entity_schema().attributes;
    for e in store.events() {
        let mut rec = vec![
            store.entity_name(e.entity).to_owned(),
            store.alphabet().label(e.activity).to_owned(),
            e.time.to_string(),
        ];
        rec.extend(e.attributes.iter().zip(ev_defs).map(|(&v, d)| format_value(v, d)));
        rec.extend(store.entity_attributes(e.entity).iter().zip(en_defs).map(|(&v, d)| format_value(v, d)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_event_log_file(store: &EventStore, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_event_log(store, std::io::BufWriter::new(file))
}
