//! Feature records and outcomes for the two use cases.

use crate::error::{Error, Result};
use crate::event_model::{parikh, ActivityId, AttrKind, AttrValue, AttributeSchema, EntityId, Event, EventStore, TimeWindow};
use crate::ingestion::filter::{RIR_LABEL, VCI_LABEL};

/// Per-visit numeric attributes a shopper log must carry, in row order.
/// The first three are averaged per week, the last two summed.
pub const VISIT_ATTRIBUTES: [&str; 5] = ["freshness", "item_value", "product_density", "total_value", "total_item_count"];
const MEAN_ROWS: usize = 3;
const TOTAL_VALUE: usize = 3;
/// Row index of the weekly visit count.
pub const VISIT_COUNT_ROW: usize = VISIT_ATTRIBUTES.len();
/// First row of the label-frequency block.
pub const LABEL_BLOCK_ROW: usize = VISIT_COUNT_ROW + 1;

/// Weekly aggregates of one shopper, stored column-major: column `j` is
/// week `j` of the journey, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct JourneyMatrix {
    rows: usize,
    tau: usize,
    values: Vec<f64>,
}

impl JourneyMatrix {
    pub fn zeros(rows: usize, tau: usize) -> Self {
        Self { rows, tau, values: vec![0.0; rows * tau] }
    }

    /// Build from row-major data, mostly for fixtures.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let tau = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), tau);
        for (v, row) in rows.iter().enumerate() {
            if row.len() != tau {
                return Err(Error::DimensionMismatch { expected: tau, got: row.len() });
            }
            for (j, &x) in row.iter().enumerate() {
                m.set(v, j, x);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.rows + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[col * self.rows + row] = value;
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.values[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.tau).map(|j| self.get(row, j)).collect()
    }

    /// Column-major flattening, oldest week first. This is the model input.
    pub fn flatten(&self) -> &[f64] {
        &self.values
    }
}

/// Slope, intercept and RMS residual of a least-squares line per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFitCoeffs {
    pub slope: Vec<f64>,
    pub intercept: Vec<f64>,
    pub residual: Vec<f64>,
}

impl LinearFitCoeffs {
    /// `[a_0, b_0, r_0, a_1, b_1, r_1, ...]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.slope.len());
        for v in 0..self.slope.len() {
            out.extend([self.slope[v], self.intercept[v], self.residual[v]]);
        }
        out
    }
}

/// Fit `value_j ≈ a·j + b` over `j = 0..τ` for one row.
pub fn fit_row(values: &[f64]) -> Result<(f64, f64, f64)> {
    let tau = values.len();
    if tau < 2 {
        return Err(Error::InvalidJourney(format!("linear fit needs at least 2 weeks, got {tau}")));
    }
    let n = tau as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (j, &y) in values.iter().enumerate() {
        let dx = j as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    let sse: f64 = values.iter().enumerate().map(|(j, &y)| (y - a * j as f64 - b).powi(2)).sum();
    Ok((a, b, (sse / n).sqrt()))
}

pub fn linear_fit(matrix: &JourneyMatrix) -> Result<LinearFitCoeffs> {
    let mut out = LinearFitCoeffs {
        slope: Vec::with_capacity(matrix.rows()),
        intercept: Vec::with_capacity(matrix.rows()),
        residual: Vec::with_capacity(matrix.rows()),
    };
    for v in 0..matrix.rows() {
        let (a, b, r) = fit_row(&matrix.row(v))?;
        out.slope.push(a);
        out.intercept.push(b);
        out.residual.push(r);
    }
    Ok(out)
}

/// Positions of the visit attributes inside a store's event schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JourneyEncoder {
    positions: [usize; 5],
    labels: usize,
}

impl JourneyEncoder {
    pub fn for_store(store: &EventStore) -> Result<Self> {
        let schema = store.event_schema();
        let mut positions = [0; 5];
        for (p, name) in positions.iter_mut().zip(VISIT_ATTRIBUTES) {
            *p = schema.require(name)?;
        }
        Ok(Self { positions, labels: store.alphabet().len() })
    }

    /// Rows per journey column: five aggregates, visit count, label block.
    pub fn rows(&self) -> usize {
        LABEL_BLOCK_ROW + self.labels
    }

    /// Encode the `tau` weeks `[t−τ−1, t−1)` of entity `c`.
    pub fn encode(&self, store: &EventStore, c: EntityId, t: i64, tau: usize) -> JourneyMatrix {
        let start = (t - tau as i64 - 1) as f64;
        let end = start + tau as f64;
        let mut m = JourneyMatrix::zeros(self.rows(), tau);
        let mut counts = vec![0usize; tau];
        for e in store.entity_events(c) {
            if e.time < start || e.time >= end {
                continue;
            }
            let j = week_of(e.time, start, tau);
            counts[j] += 1;
            for (row, &pos) in self.positions.iter().enumerate() {
                m.set(row, j, m.get(row, j) + e.attributes[pos].as_f64());
            }
            let lr = LABEL_BLOCK_ROW + e.activity.index();
            m.set(lr, j, m.get(lr, j) + 1.0);
        }
        for (j, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let n = n as f64;
            for row in 0..MEAN_ROWS {
                m.set(row, j, m.get(row, j) / n);
            }
            m.set(VISIT_COUNT_ROW, j, n);
            for lr in LABEL_BLOCK_ROW..self.rows() {
                m.set(lr, j, m.get(lr, j) / n);
            }
        }
        m
    }

    /// Σ total_value over the entity's events in `window`.
    pub fn outcome(&self, store: &EventStore, c: EntityId, window: TimeWindow) -> f64 {
        let pos = self.positions[TOTAL_VALUE];
        store
            .entity_events(c)
            .filter(|e| window.contains(e.time))
            .fold(0.0, |acc, e| acc + e.attributes[pos].as_f64())
    }
}

/// Week index of `time` inside `[start, start + tau)`, robust to rounding in
/// the subtraction.
fn week_of(time: f64, start: f64, tau: usize) -> usize {
    let mut j = (time - start).floor().clamp(0.0, (tau - 1) as f64) as usize;
    if time < start + j as f64 && j > 0 {
        j -= 1;
    } else if j + 1 < tau && time >= start + (j + 1) as f64 {
        j += 1;
    }
    j
}

pub fn encode_journey(store: &EventStore, c: EntityId, t: i64, tau: usize) -> Result<JourneyMatrix> {
    Ok(JourneyEncoder::for_store(store)?.encode(store, c, t, tau))
}

pub fn shopper_outcome(store: &EventStore, c: EntityId, window: TimeWindow) -> Result<f64> {
    Ok(JourneyEncoder::for_store(store)?.outcome(store, c, window))
}

/// Activity ids of the two milestones of an invoice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvoiceLabels {
    pub vci: ActivityId,
    pub rir: ActivityId,
}

impl InvoiceLabels {
    pub fn resolve(store: &EventStore) -> Result<Self> {
        Self::resolve_named(store, VCI_LABEL, RIR_LABEL)
    }

    pub fn resolve_named(store: &EventStore, vci: &str, rir: &str) -> Result<Self> {
        Ok(Self { vci: store.alphabet().id(vci)?, rir: store.alphabet().id(rir)? })
    }

    pub fn vci_time(&self, store: &EventStore, c: EntityId) -> Option<f64> {
        store.entity_events(c).find(|e| e.activity == self.vci).map(|e| e.time)
    }

    pub fn rir_time(&self, store: &EventStore, c: EntityId) -> Option<f64> {
        store.entity_events(c).find(|e| e.activity == self.rir).map(|e| e.time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvoiceFeatures {
    pub activity_freqs: Vec<f64>,
    pub attributes: Vec<AttrValue>,
}

/// Relative activity frequencies of the events strictly before VCI, plus the
/// entity attributes.
pub fn encode_invoice(store: &EventStore, c: EntityId, labels: &InvoiceLabels) -> Result<InvoiceFeatures> {
    let vci = labels.vci_time(store, c).ok_or_else(|| {
        Error::SelectionContract(format!("entity `{}` has no invoice-creation event", store.entity_name(c)))
    })?;
    let prefix: Vec<&Event> = store.entity_events(c).take_while(|e| e.time < vci).collect();
    Ok(InvoiceFeatures {
        activity_freqs: parikh(prefix, store.alphabet())?,
        attributes: store.entity_attributes(c).to_vec(),
    })
}

/// Days from VCI to RIR.
pub fn invoice_outcome(store: &EventStore, c: EntityId, labels: &InvoiceLabels) -> Result<f64> {
    let name = || store.entity_name(c).to_owned();
    let vci = labels.vci_time(store, c).ok_or_else(|| Error::FilterContract(format!("`{}` has no VCI event", name())))?;
    let rir = labels.rir_time(store, c).ok_or_else(|| Error::FilterContract(format!("`{}` has no RIR event", name())))?;
    if rir <= vci {
        return Err(Error::FilterContract(format!("`{}`: RIR at {rir} does not follow VCI at {vci}", name())));
    }
    Ok(rir - vci)
}

/// Width of [`one_hot_encode`] output.
pub fn one_hot_width(labels: usize, schema: &AttributeSchema) -> usize {
    labels
        + schema
            .attributes
            .iter()
            .map(|a| match &a.kind {
                AttrKind::Categorical { categories } => categories.len(),
                _ => 1,
            })
            .sum::<usize>()
}

/// Frequency block, then one indicator block per categorical and a single
/// 0/1 or raw value per boolean or numeric attribute, in schema order.
pub fn one_hot_encode(features: &InvoiceFeatures, schema: &AttributeSchema) -> Result<Vec<f64>> {
    if features.attributes.len() != schema.len() {
        return Err(Error::DimensionMismatch { expected: schema.len(), got: features.attributes.len() });
    }
    let mut out = Vec::with_capacity(one_hot_width(features.activity_freqs.len(), schema));
    out.extend_from_slice(&features.activity_freqs);
    for (def, &value) in schema.attributes.iter().zip(&features.attributes) {
        match (&def.kind, value) {
            (AttrKind::Categorical { categories }, AttrValue::Categorical(v)) => {
                let v = v as usize;
                if v >= categories.len() {
                    return Err(Error::Schema {
                        column: def.name.clone(),
                        message: format!("category index {v} outside {} categories", categories.len()),
                    });
                }
                out.extend((0..categories.len()).map(|i| if i == v { 1.0 } else { 0.0 }));
            }
            (AttrKind::Boolean, AttrValue::Boolean(b)) => out.push(if b { 1.0 } else { 0.0 }),
            (AttrKind::Numeric, AttrValue::Numeric(x)) => out.push(x),
            (_, v) => {
                return Err(Error::Schema { column: def.name.clone(), message: format!("value {v:?} does not match its declared kind") })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::{Alphabet, AttributeDef, EventStoreBuilder};
    use crate::ingestion::synth::shopper_event_schema;
    use proptest::prelude::*;

    fn visit(f: f64, iv: f64, d: f64, tv: f64, items: f64) -> Vec<AttrValue> {
        [f, iv, d, tv, items].into_iter().map(AttrValue::Numeric).collect()
    }

    fn shop(rows: &[(&str, &str, f64, Vec<AttrValue>)]) -> EventStore {
        let mut b = EventStoreBuilder::new(Alphabet::sorted(["a", "b"]), shopper_event_schema(), AttributeSchema::default());
        for (c, a, t, attrs) in rows {
            b.push(c, a, *t, attrs.clone()).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn single_visit_column() {
        // t=3, tau=2: weeks [0,1) and [1,2)
        let s = shop(&[("x", "a", 1.5, visit(0.5, 2.0, 1.0, 20.0, 10.0))]);
        let c = s.entity_id("x").unwrap();
        let m = encode_journey(&s, c, 3, 2).unwrap();
        assert_eq!(m.rows(), 8);
        assert_eq!(m.column(1), &[0.5, 2.0, 1.0, 20.0, 10.0, 1.0, 1.0, 0.0]);
        assert_eq!(m.column(0), &[0.0; 8]);
    }

    #[test]
    fn two_visit_aggregates() {
        let s = shop(&[
            ("x", "a", 0.2, visit(0.2, 3.0, 1.0, 10.0, 4.0)),
            ("x", "b", 0.7, visit(0.6, 5.0, 2.0, 30.0, 6.0)),
        ]);
        let c = s.entity_id("x").unwrap();
        let m = encode_journey(&s, c, 3, 2).unwrap();
        let col = m.column(0);
        assert_eq!(col[3], 40.0);
        assert_eq!(col[VISIT_COUNT_ROW], 2.0);
        assert_eq!(col[1], 4.0);
        assert_eq!(col[4], 10.0);
        assert_eq!(&col[LABEL_BLOCK_ROW..], &[0.5, 0.5]);
    }

    #[test]
    fn journey_ignores_events_outside_window() {
        let base = vec![("x", "a", 1.5, visit(0.5, 2.0, 1.0, 20.0, 10.0))];
        let mut more = base.clone();
        more.push(("x", "b", 2.0, visit(0.9, 9.0, 9.0, 99.0, 9.0)));
        more.push(("x", "b", 0.0, visit(0.9, 9.0, 9.0, 99.0, 9.0)));
        let (a, b) = (shop(&base), shop(&more));
        // t=4, tau=2 covers [1,3); the event at 0 falls outside, the one at 2 inside
        let ma = encode_journey(&a, EntityId(0), 4, 2).unwrap();
        let mb = encode_journey(&b, EntityId(0), 4, 2).unwrap();
        assert_eq!(ma.column(0), mb.column(0));
        assert_ne!(ma.column(1), mb.column(1));
    }

    #[test]
    fn outcome_sums_values() {
        let s = shop(&[
            ("x", "a", 4.1, visit(0.5, 1.0, 1.0, 12.5, 1.0)),
            ("x", "a", 4.9, visit(0.5, 1.0, 1.0, 7.5, 1.0)),
            ("x", "b", 5.0, visit(0.5, 1.0, 1.0, 100.0, 1.0)),
        ]);
        let c = EntityId(0);
        assert_eq!(shopper_outcome(&s, c, TimeWindow::new(4.0, 5.0).unwrap()).unwrap(), 20.0);
        assert_eq!(shopper_outcome(&s, c, TimeWindow::new(0.0, 4.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn five_visit_outcome() {
        let values = [3.25, 11.0, 0.5, 42.0, 7.75];
        let rows: Vec<_> = values.iter().enumerate().map(|(i, &v)| ("x", "a", 2.0 + i as f64 * 0.1, visit(0.1, 1.0, 1.0, v, 1.0))).collect();
        let s = shop(&rows);
        // 3.25 + 11 + 0.5 + 42 + 7.75
        assert_eq!(shopper_outcome(&s, EntityId(0), TimeWindow::new(2.0, 3.0).unwrap()).unwrap(), 64.5);
    }

    #[test]
    fn missing_visit_attribute_is_schema_error() {
        let mut b = EventStoreBuilder::new(Alphabet::sorted(["a"]), AttributeSchema::default(), AttributeSchema::default());
        b.push("x", "a", 0.0, vec![]).unwrap();
        assert!(matches!(encode_journey(&b.build().unwrap(), EntityId(0), 3, 2), Err(Error::Schema { .. })));
    }

    #[test]
    fn fit_examples() {
        assert_eq!(fit_row(&[1.0, 2.0, 3.0]).unwrap(), (1.0, 1.0, 0.0));
        assert_eq!(fit_row(&[5.0, 5.0, 5.0]).unwrap(), (0.0, 5.0, 0.0));
        let (a, b, r) = fit_row(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(a, 0.0);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
        assert!((r - (2.0f64 / 9.0).sqrt()).abs() < 1e-15);
        assert!(matches!(fit_row(&[1.0]), Err(Error::InvalidJourney(_))));
    }

    #[test]
    fn coefficient_count_is_three_per_row() {
        let rows: Vec<Vec<f64>> = (0..14).map(|v| vec![v as f64, 1.0, 2.0]).collect();
        let fit = linear_fit(&JourneyMatrix::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(fit.to_vec().len(), 42);
        assert!(fit.residual.iter().all(|&r| r >= 0.0));
    }

    /// Normal equations [[Σj², Σj],[Σj, n]] [a b]ᵀ = [Σjy, Σy]ᵀ solved by Cramer's rule.
    fn normal_equations(y: &[f64]) -> (f64, f64) {
        let n = y.len() as f64;
        let sj: f64 = (0..y.len()).map(|j| j as f64).sum();
        let sjj: f64 = (0..y.len()).map(|j| (j * j) as f64).sum();
        let sy: f64 = y.iter().sum();
        let sjy: f64 = y.iter().enumerate().map(|(j, v)| j as f64 * v).sum();
        let det = sjj * n - sj * sj;
        ((sjy * n - sj * sy) / det, (sjj * sy - sj * sjy) / det)
    }

    proptest! {
        #[test]
        fn fit_is_exact_on_lines(alpha in -50.0..50.0f64, beta in -50.0..50.0f64, tau in 2usize..12) {
            let y: Vec<f64> = (0..tau).map(|j| alpha * j as f64 + beta).collect();
            let (a, b, r) = fit_row(&y).unwrap();
            prop_assert!((a - alpha).abs() < 1e-9);
            prop_assert!((b - beta).abs() < 1e-9);
            prop_assert!(r < 1e-9);
        }

        #[test]
        fn fit_matches_normal_equations(y in prop::collection::vec(-100.0..100.0f64, 2..15)) {
            let (a, b, _) = fit_row(&y).unwrap();
            let (oa, ob) = normal_equations(&y);
            prop_assert!((a - oa).abs() < 1e-9, "{} vs {}", a, oa);
            prop_assert!((b - ob).abs() < 1e-9, "{} vs {}", b, ob);
        }
    }

    fn invoice_store(extra: &[(&str, f64)]) -> EventStore {
        let alphabet = Alphabet::explicit(["createPO", "approve", VCI_LABEL, RIR_LABEL]).unwrap();
        let entity = AttributeSchema::new(vec![AttributeDef::categorical("kind", ["p", "q", "r"]), AttributeDef::boolean("flag")]);
        let mut b = EventStoreBuilder::new(alphabet, AttributeSchema::default(), entity);
        for &(a, t) in [("createPO", 1.0), ("approve", 2.0), (VCI_LABEL, 3.0), (RIR_LABEL, 10.0)].iter().chain(extra) {
            b.push("inv", a, t, vec![]).unwrap();
        }
        b.set_entity_attributes("inv", vec![AttrValue::Categorical(1), AttrValue::Boolean(true)]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn invoice_prefix_frequencies() {
        let s = invoice_store(&[]);
        let labels = InvoiceLabels::resolve(&s).unwrap();
        let f = encode_invoice(&s, EntityId(0), &labels).unwrap();
        assert_eq!(f.activity_freqs, vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(invoice_outcome(&s, EntityId(0), &labels).unwrap(), 7.0);
        let v = one_hot_encode(&f, s.entity_schema()).unwrap();
        assert_eq!(v, vec![0.5, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(v.len(), one_hot_width(4, s.entity_schema()));
    }

    #[test]
    fn post_vci_events_ignored() {
        let a = invoice_store(&[]);
        let b = invoice_store(&[("approve", 3.0), ("createPO", 12.0)]);
        let la = InvoiceLabels::resolve(&a).unwrap();
        let lb = InvoiceLabels::resolve(&b).unwrap();
        assert_eq!(encode_invoice(&a, EntityId(0), &la).unwrap(), encode_invoice(&b, EntityId(0), &lb).unwrap());
    }

    #[test]
    fn five_event_prefix() {
        let s = invoice_store(&[("approve", 0.5), ("approve", 0.7), ("createPO", 2.5)]);
        let l = InvoiceLabels::resolve(&s).unwrap();
        // prefix: createPO x2, approve x3
        assert_eq!(encode_invoice(&s, EntityId(0), &l).unwrap().activity_freqs, vec![0.4, 0.6, 0.0, 0.0]);
    }

    #[test]
    fn empty_prefix_and_half_day() {
        let alphabet = Alphabet::explicit([VCI_LABEL, RIR_LABEL]).unwrap();
        let mut b = EventStoreBuilder::new(alphabet, AttributeSchema::default(), AttributeSchema::default());
        b.push("i", VCI_LABEL, 3.25, vec![]).unwrap();
        b.push("i", RIR_LABEL, 3.75, vec![]).unwrap();
        let s = b.build().unwrap();
        let l = InvoiceLabels::resolve(&s).unwrap();
        assert_eq!(encode_invoice(&s, EntityId(0), &l).unwrap().activity_freqs, vec![0.0, 0.0]);
        assert_eq!(invoice_outcome(&s, EntityId(0), &l).unwrap(), 0.5);
    }

    #[test]
    fn missing_vci_is_contract_error() {
        let alphabet = Alphabet::explicit([VCI_LABEL, RIR_LABEL]).unwrap();
        let mut b = EventStoreBuilder::new(alphabet, AttributeSchema::default(), AttributeSchema::default());
        b.push("i", RIR_LABEL, 3.0, vec![]).unwrap();
        let s = b.build().unwrap();
        let l = InvoiceLabels::resolve(&s).unwrap();
        assert!(matches!(encode_invoice(&s, EntityId(0), &l), Err(Error::SelectionContract(_))));
        assert!(matches!(invoice_outcome(&s, EntityId(0), &l), Err(Error::FilterContract(_))));
    }

    #[test]
    fn one_hot_blocks() {
        let schema = AttributeSchema::new(vec![AttributeDef::categorical("k", ["x", "y", "z"]), AttributeDef::boolean("b")]);
        let f = InvoiceFeatures { activity_freqs: vec![], attributes: vec![AttrValue::Categorical(1), AttrValue::Boolean(true)] };
        assert_eq!(one_hot_encode(&f, &schema).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        let bad = InvoiceFeatures { activity_freqs: vec![], attributes: vec![AttrValue::Categorical(3), AttrValue::Boolean(true)] };
        assert!(matches!(one_hot_encode(&bad, &schema), Err(Error::Schema { .. })));
    }

    #[test]
    fn invoice_schema_width_is_81_with_40_labels() {
        let schema = crate::ingestion::synth::invoice_entity_schema();
        assert_eq!(one_hot_width(40, &schema), 40 + (3 + 3 + 3 + 5 + 21 + 4) + 2);
        assert_eq!(one_hot_width(40, &schema), 81);
    }

    proptest! {
        #[test]
        fn argmax_recovers_category(v in 0u32..21) {
            let schema = crate::ingestion::synth::invoice_entity_schema();
            let mut attrs: Vec<AttrValue> = schema.attributes.iter().map(|a| match a.kind {
                AttrKind::Boolean => AttrValue::Boolean(false),
                _ => AttrValue::Categorical(0),
            }).collect();
            attrs[6] = AttrValue::Categorical(v);
            let enc = one_hot_encode(&InvoiceFeatures { activity_freqs: vec![], attributes: attrs }, &schema).unwrap();
            // spend area block starts after 3+3+1+1+3+5 = 16 entries
            let block = &enc[16..37];
            let arg = block.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            prop_assert_eq!(arg as u32, v);
        }
    }
}
