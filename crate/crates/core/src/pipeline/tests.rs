use std::collections::BTreeSet;

use super::*;
use crate::event_model::{Alphabet, AttrValue, EventStoreBuilder};
use crate::ingestion::synth::{shopper_event_schema, shopper_labels};
use crate::ingestion::{generate, Flavor, SyntheticSpec};
use crate::event_model::AttributeSchema;

fn shopper_spec(n: usize, horizon: u32, sigma: f64, seed: u64) -> SyntheticSpec {
    let mut spec = SyntheticSpec {
        flavor: Flavor::Shopper,
        n_entities: n,
        n_archetypes: 3,
        noise_scale: sigma,
        horizon,
        seed,
        shopper: Default::default(),
        invoice: Default::default(),
    };
    spec.shopper.start_spread = 4;
    spec
}

fn invoice_spec(n: usize, horizon: u32, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        flavor: Flavor::Invoice,
        n_entities: n,
        n_archetypes: 4,
        noise_scale: 1.0,
        horizon,
        seed,
        shopper: Default::default(),
        invoice: Default::default(),
    }
}

fn shopper_store(weeks: &[(&str, &[f64])]) -> EventStore {
    let mut b = EventStoreBuilder::new(Alphabet::sorted(shopper_labels(2)), shopper_event_schema(), AttributeSchema::default());
    for (name, times) in weeks {
        for &t in *times {
            let attrs = vec![AttrValue::Numeric(1.0); 5];
            b.push(name, "dept_00", t, attrs).unwrap();
        }
    }
    b.build().unwrap()
}

fn names(store: &EventStore, ids: &[EntityId]) -> Vec<String> {
    ids.iter().map(|&c| store.entity_name(c).to_owned()).collect()
}

#[test]
fn supermarket_selection_examples() {
    let store = shopper_store(&[
        ("weekly", &[0.5, 1.5, 2.5, 3.5, 4.5]),
        ("gap", &[0.5, 4.5]),
        ("late", &[3.5, 4.5]),
    ]);
    let uc = Supermarket::new(&store, 3).unwrap();
    // t = 5: start < 2 and an event in [1, 4)
    assert_eq!(names(&store, &uc.select_training(&store, 5)), ["weekly"]);
    // prediction at 5: start < 3 and an event in [2, 5)
    assert_eq!(names(&store, &uc.select_prediction(&store, 5)), ["gap", "weekly"]);
    assert_eq!(uc.select_prediction(&store, 5), uc.select_training(&store, 6));
    // a shopper starting at t − 1 is never in the prediction set at t
    assert!(!names(&store, &uc.select_prediction(&store, 4)).contains(&"late".to_owned()));
}

#[test]
fn reuse_identity_on_synthetic_stream() {
    let (store, _) = generate(&shopper_spec(300, 16, 1.0, 4)).unwrap();
    for tau in [2, 3, 5] {
        let uc = Supermarket::new(&store, tau).unwrap();
        for t in 1..=17 {
            assert_eq!(uc.select_prediction(&store, t), uc.select_training(&store, t + 1));
        }
    }
}

#[test]
fn paint_selection_days_are_half_open() {
    let (store, _) = generate(&invoice_spec(200, 30, 2)).unwrap();
    let uc = PaintFactory::new(&store).unwrap();
    let labels = uc.labels();
    let (first, last) = uc.step_range(&store);
    let mut seen_t = BTreeSet::new();
    let mut seen_p = BTreeSet::new();
    for t in first..=last + 1 {
        for c in uc.select_training(&store, t) {
            let r = labels.rir_time(&store, c).unwrap();
            assert!(r >= (t - 1) as f64 && r < t as f64);
            assert!(seen_t.insert(c), "trained twice");
        }
        for c in uc.select_prediction(&store, t) {
            let v = labels.vci_time(&store, c).unwrap();
            assert!(v >= (t - 1) as f64 && v < t as f64);
            assert!(seen_p.insert(c), "predicted twice");
        }
    }
    assert_eq!(seen_p.len(), store.num_entities());
    assert_eq!(seen_t.len(), store.num_entities());
}

fn config(use_case: UseCaseKind, rho: Rho, seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::new(use_case, rho);
    c.seed = seed;
    c
}

#[test]
fn rho_one_equals_bypass() {
    let (store, _) = generate(&shopper_spec(200, 12, 1.0, 7)).unwrap();
    let a = run_stream(&store, &config(UseCaseKind::Supermarket { tau: 3 }, Rho::Fixed(1), 7)).unwrap();
    let mut bypass = config(UseCaseKind::Supermarket { tau: 3 }, Rho::Fixed(1), 7);
    bypass.method = ClusterMethod::Bypass;
    let b = run_stream(&store, &bypass).unwrap();
    assert!(a.steps.iter().any(|s| !s.entity_predictions.is_empty()));
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert_eq!(x.entity_predictions.len(), y.entity_predictions.len());
        for (p, q) in x.entity_predictions.iter().zip(&y.entity_predictions) {
            assert_eq!(p.0, q.0);
            assert_eq!(p.1.to_bits(), q.1.to_bits());
        }
        assert_eq!(x.metrics.entity_rmse, x.metrics.cluster_rmse);
    }
}

#[test]
fn cache_does_not_change_results() {
    let (store, _) = generate(&shopper_spec(200, 10, 1.0, 3)).unwrap();
    let mut c = config(UseCaseKind::Supermarket { tau: 2 }, Rho::Fixed(4), 3);
    let a = run_stream(&store, &c).unwrap();
    c.reuse = false;
    let b = run_stream(&store, &c).unwrap();
    assert_eq!(a.steps, b.steps);
}

#[test]
fn partition_sizes_and_assignment() {
    let (store, _) = generate(&shopper_spec(150, 10, 1.0, 5)).unwrap();
    for rho in [Rho::Fixed(1), Rho::Fixed(3), Rho::Fixed(1000), Rho::All] {
        let out = run_stream(&store, &config(UseCaseKind::Supermarket { tau: 3 }, rho, 5)).unwrap();
        for s in &out.steps {
            if s.n_train > 0 {
                assert_eq!(s.k_train, rho.cluster_count(s.n_train).unwrap());
                s.train_partition.as_ref().unwrap().check_laws(s.n_train, true).unwrap();
            }
            if let Some(p) = &s.pred_partition {
                assert_eq!(s.k_pred, rho.cluster_count(s.n_pred).unwrap());
                assert_eq!(s.entity_predictions.len(), s.n_pred);
                for (&(_, y), &g) in s.entity_predictions.iter().zip(p.assignment()) {
                    let proxy = s.proxy_predictions.iter().find(|q| q.0 == g).unwrap().1;
                    assert_eq!(y.to_bits(), proxy.to_bits());
                }
            }
        }
    }
}

#[test]
fn horizon_one_resolves_nothing() {
    let (store, _) = generate(&shopper_spec(50, 6, 1.0, 1)).unwrap();
    let mut c = config(UseCaseKind::Supermarket { tau: 3 }, Rho::Fixed(2), 1);
    c.steps = Some(StepRange { first: 5, last: 5 });
    let out = run_stream(&store, &c).unwrap();
    assert!(out.ledger.resolved().is_empty());
    assert_eq!(out.report.steps[0].entity_rmse, None);
}

#[test]
fn first_step_trains_before_predicting() {
    let (store, _) = generate(&shopper_spec(80, 8, 1.0, 2)).unwrap();
    let out = run_stream(&store, &config(UseCaseKind::Supermarket { tau: 3 }, Rho::Fixed(2), 2)).unwrap();
    let first = out.steps.iter().find(|s| s.n_train > 0 && s.n_pred > 0).unwrap();
    assert!(!first.cold);
    assert_eq!(first.entity_predictions.len(), first.n_pred);
}

#[test]
fn noiseless_stream_is_learned() {
    let mut spec = shopper_spec(300, 24, 0.0, 11);
    spec.shopper.fixed_visits = Some(1);
    spec.shopper.start_spread = 0;
    let (store, _) = generate(&spec).unwrap();
    let mut c = config(UseCaseKind::Supermarket { tau: 3 }, Rho::Fixed(1), 11);
    c.model = ModelSpec::RlsLinear { lambda: 1e-6 };
    let out = run_stream(&store, &c).unwrap();
    let scale: f64 = out.ledger.resolved().iter().map(|r| r.truth.abs()).fold(0.0, f64::max);
    let last = out.report.steps.iter().rev().find_map(|s| s.entity_rmse).unwrap();
    assert!(last < 1e-6 * scale.max(1.0), "rmse {last} at scale {scale}");
}

#[test]
fn deterministic() {
    let (store, _) = generate(&invoice_spec(300, 20, 9)).unwrap();
    let c = config(UseCaseKind::PaintFactory, Rho::Fixed(5), 9);
    let a = run_stream(&store, &c).unwrap();
    let b = run_stream(&store, &c).unwrap();
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.ledger, b.ledger);
}

#[test]
fn paint_steps_without_training_still_predict() {
    let (store, _) = generate(&invoice_spec(40, 30, 9)).unwrap();
    let mut updates = Vec::new();
    let mut p = Pipeline::new(&store, config(UseCaseKind::PaintFactory, Rho::Fixed(5), 9)).unwrap();
    let (first, last) = p.step_range();
    let mut checked = false;
    for t in first..=last {
        let before = p.model().updates();
        let s = p.run_step(t).unwrap();
        updates.push(p.model().updates());
        if s.n_train == 0 {
            assert_eq!(p.model().updates(), before);
            if before > 0 && s.n_pred > 0 {
                assert_eq!(s.entity_predictions.len(), s.n_pred);
                checked = true;
            }
        }
    }
    assert!(checked, "fixture has no step with predictions but no training");
    // every invoice predicted after warm-up resolves exactly once
    let out = p.ledger();
    let mut ids: Vec<_> = out.resolved().iter().map(|r| r.record.entity).collect();
    let n = ids.len();
    ids.dedup();
    assert_eq!(ids.len(), n);
}

#[test]
fn no_look_ahead() {
    let (store, _) = generate(&shopper_spec(120, 12, 1.0, 6)).unwrap();
    let c = config(UseCaseKind::Supermarket { tau: 3 }, Rho::Fixed(3), 6);
    let full = run_stream(&store, &c).unwrap();
    for s in &full.steps[..full.steps.len() - 1] {
        let cut = store.truncated(s.t as f64);
        let mut ct = c.clone();
        ct.steps = Some(StepRange { first: full.steps[0].t, last: s.t });
        let partial = run_stream(&cut, &ct).unwrap();
        assert_eq!(partial.steps.last().unwrap(), s, "step {}", s.t);
    }

    let (store, _) = generate(&invoice_spec(200, 15, 6)).unwrap();
    let c = config(UseCaseKind::PaintFactory, Rho::Fixed(4), 6);
    let full = run_stream(&store, &c).unwrap();
    for s in full.steps.iter().step_by(7) {
        let cut = store.truncated(s.t as f64);
        let mut ct = c.clone();
        ct.steps = Some(StepRange { first: 1, last: s.t });
        let partial = run_stream(&cut, &ct).unwrap();
        assert_eq!(partial.steps.last().unwrap(), s, "step {}", s.t);
    }
}

#[test]
fn steps_must_increase() {
    let (store, _) = generate(&shopper_spec(30, 8, 1.0, 1)).unwrap();
    let mut p = Pipeline::new(&store, config(UseCaseKind::Supermarket { tau: 2 }, Rho::Fixed(2), 1)).unwrap();
    p.run_step(4).unwrap();
    let err = p.run_step(4).unwrap_err();
    assert!(matches!(err, Error::Step { step: 4, .. }));
}

#[test]
fn rho_parsing() {
    assert_eq!("all".parse::<Rho>().unwrap(), Rho::All);
    assert_eq!("32".parse::<Rho>().unwrap(), Rho::Fixed(32));
    assert!("0".parse::<Rho>().is_err());
    assert!("x".parse::<Rho>().is_err());
    let c: PipelineConfig = toml::from_str("rho = \"all\"\n[use_case]\nkind = \"paint_factory\"\n").unwrap();
    assert_eq!(c.rho, Rho::All);
    assert_eq!(c.distance_kind(), DistanceKind::Gower);
    let c: PipelineConfig = toml::from_str("rho = 8\n[use_case]\nkind = \"supermarket\"\ntau = 3\n").unwrap();
    assert_eq!(c.distance_kind(), DistanceKind::BinnedEuclidean { bins: 20 });
    assert!(toml::from_str::<PipelineConfig>("rho = 0\n[use_case]\nkind = \"paint_factory\"\n").is_err());
}
