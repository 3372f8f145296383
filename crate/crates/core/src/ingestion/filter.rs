//! Case filter for invoice logs.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event_model::{EntityId, EventStore};
use crate::ingestion::log::parse_iso;

pub const VCI_LABEL: &str = "Vendor creates invoice";
pub const RIR_LABEL: &str = "Record Invoice Receipt";

/// Entity attributes retained after filtering, in output order.
pub const INVOICE_ATTRIBUTES: [&str; 8] = [
    "case Company",
    "case Document Type",
    "case GR-Based Inv. Verif.",
    "case Goods Receipt",
    "case Item Category",
    "case Item Type",
    "case Spend area text",
    "case Spend classification text",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvoiceFilter {
    pub vci_label: String,
    pub rir_label: String,
    /// Cases must start at or after this instant (RFC 3339, UTC).
    pub period_start: String,
    /// Cases must end strictly before this instant.
    pub period_end: String,
    /// Entity attributes to keep; `None` keeps all of them.
    pub keep_attributes: Option<Vec<String>>,
}

impl Default for InvoiceFilter {
    fn default() -> Self {
        Self {
            vci_label: VCI_LABEL.into(),
            rir_label: RIR_LABEL.into(),
            period_start: "2018-01-01T00:00:00Z".into(),
            period_end: "2019-01-01T00:00:00Z".into(),
            keep_attributes: Some(INVOICE_ATTRIBUTES.iter().map(|s| s.to_string()).collect()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedByRule {
    pub multiplicity: usize,
    pub order: usize,
    pub date_range: usize,
}

impl DroppedByRule {
    pub fn total(&self) -> usize {
        self.multiplicity + self.order + self.date_range
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub cases_in: usize,
    pub cases_kept: usize,
    pub cases_dropped_by_rule: DroppedByRule,
    pub events_kept: usize,
    pub labels_kept: usize,
    /// False when the store carries no calendar anchor, so the period rule
    /// could not be evaluated.
    pub date_rule_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Keep,
    Multiplicity,
    Order,
    DateRange,
}

/// Filter with the default invoice rules.
pub fn filter_invoice_cases(store: &EventStore) -> Result<(EventStore, FilterReport)> {
    filter_invoice_cases_with(store, &InvoiceFilter::default())
}

/// Keep cases with exactly one VCI and exactly one RIR event, VCI strictly
/// before RIR, and all events inside the configured period. A dropped case
/// is counted under the first rule it fails, in that order.
pub fn filter_invoice_cases_with(store: &EventStore, filter: &InvoiceFilter) -> Result<(EventStore, FilterReport)> {
    let vci = store.alphabet().id(&filter.vci_label).ok();
    let rir = store.alphabet().id(&filter.rir_label).ok();
    let period = match store.time_base() {
        Some(tb) => {
            let start = parse_iso(&filter.period_start).map(|s| tb.to_store_time(s));
            let end = parse_iso(&filter.period_end).map(|s| tb.to_store_time(s));
            start.zip(end)
        }
        None => None,
    };

    let mut report = FilterReport { cases_in: store.num_entities(), date_rule_applied: period.is_some(), ..Default::default() };
    let mut keep: Vec<EntityId> = Vec::new();
    for c in store.entities() {
        let verdict = classify(store, c, vci, rir, period);
        match verdict {
            Verdict::Keep => keep.push(c),
            Verdict::Multiplicity => report.cases_dropped_by_rule.multiplicity += 1,
            Verdict::Order => report.cases_dropped_by_rule.order += 1,
            Verdict::DateRange => report.cases_dropped_by_rule.date_range += 1,
        }
    }
    let filtered = store.restrict(&keep, filter.keep_attributes.as_deref())?;
    report.cases_kept = keep.len();
    report.events_kept = filtered.len();
    report.labels_kept = filtered.alphabet().len();
    Ok((filtered, report))
}

fn classify(
    store: &EventStore,
    c: EntityId,
    vci: Option<crate::event_model::ActivityId>,
    rir: Option<crate::event_model::ActivityId>,
    period: Option<(f64, f64)>,
) -> Verdict {
    let (Some(vci), Some(rir)) = (vci, rir) else {
        return Verdict::Multiplicity;
    };
    let mut vci_times = Vec::new();
    let mut rir_times = Vec::new();
    for e in store.entity_events(c) {
        if e.activity == vci {
            vci_times.push(e.time);
        } else if e.activity == rir {
            rir_times.push(e.time);
        }
    }
    if vci_times.len() != 1 || rir_times.len() != 1 {
        return Verdict::Multiplicity;
    }
    if !(vci_times[0] < rir_times[0]) {
        return Verdict::Order;
    }
    if let Some((start, end)) = period {
        let mut events = store.entity_events(c);
        let first = events.next().map(|e| e.time).unwrap_or(start);
        let last = events.next_back().map(|e| e.time).unwrap_or(first);
        if first < start || last >= end {
            return Verdict::DateRange;
        }
    }
    Verdict::Keep
}
