//! C ABI over the proxystream library.
//!
//! Every function returns a [`PsStatus`]; outputs go through pointer
//! arguments. On failure the message is kept per thread and can be read with
//! [`ps_last_error`]. Handles are opaque and must be released with the
//! matching `*_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! makes: strings NUL-terminated, arrays at least `len` long, handles
//! obtained from this library and not yet freed. Null pointers are reported
//! as `PS_STATUS_NULL_POINTER` rather than dereferenced.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use proxystream::clustering::mean_medoid_gap;
use proxystream::encoding::fit_row;
use proxystream::event_model::EventStore;
use proxystream::ingestion::{filter_invoice_cases, generate, read_event_log, LogSchema, SyntheticSpec};
use proxystream::metrics::Metric;
use proxystream::pipeline::{run_stream, PipelineConfig, Rho, RunOutput};
use proxystream::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Io = 5,
    Parse = 6,
    Schema = 7,
    Contract = 8,
    DimensionMismatch = 9,
    ColdStart = 10,
    OutOfRange = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsMetric {
    ClusterRmse = 0,
    EntityRmse = 1,
    TopDecileF1 = 2,
    TurnoverApe = 3,
}

impl From<PsMetric> for Metric {
    fn from(m: PsMetric) -> Self {
        match m {
            PsMetric::ClusterRmse => Metric::ClusterRmse,
            PsMetric::EntityRmse => Metric::EntityRmse,
            PsMetric::TopDecileF1 => Metric::TopDecileF1,
            PsMetric::TurnoverApe => Metric::TurnoverApe,
        }
    }
}

/// Opaque event store.
pub struct PsStore(EventStore);

/// Opaque result of one streaming run.
pub struct PsRun(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn status_of(e: &Error) -> PsStatus {
    match e {
        Error::Schema { .. } => PsStatus::Schema,
        Error::Parse { .. } => PsStatus::Parse,
        Error::InvalidArgument(_) | Error::InvalidJourney(_) => PsStatus::InvalidArgument,
        Error::SelectionContract(_) | Error::FilterContract(_) => PsStatus::Contract,
        Error::DimensionMismatch { .. } => PsStatus::DimensionMismatch,
        Error::ColdStart => PsStatus::ColdStart,
        Error::Config(_) => PsStatus::Config,
        Error::Step { source, .. } => status_of(source),
        Error::Io { .. } => PsStatus::Io,
        Error::Csv(_) => PsStatus::Parse,
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|e| {
        let mut b = e.into_vec();
        b.retain(|&x| x != 0);
        CString::new(b).expect("nul bytes removed")
    });
    LAST_ERROR.with(|l| *l.borrow_mut() = Some(c));
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    LAST_ERROR.with(|l| *l.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            PsStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(PsStatus::InvalidUtf8, format!("`{name}`: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|l| l.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Cluster count for `n` entities; `rho == 0` means one cluster.
#[no_mangle]
pub unsafe extern "C" fn ps_cluster_count(n: usize, rho: usize, count: *mut usize) -> PsStatus {
    guard(|| {
        let r = if rho == 0 { Rho::All } else { Rho::Fixed(rho) };
        *out(count, "count")? = r.cluster_count(n)?;
        Ok(())
    })
}

/// Least-squares line through `values[j]` at `j = 0..len`, with the RMS residual.
#[no_mangle]
pub unsafe extern "C" fn ps_linear_fit(
    values: *const f64,
    len: usize,
    slope: *mut f64,
    intercept: *mut f64,
    residual: *mut f64,
) -> PsStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let (a, b, r) = fit_row(std::slice::from_raw_parts(values, len))?;
        *out(slope, "slope")? = a;
        *out(intercept, "intercept")? = b;
        *out(residual, "residual")? = r;
        Ok(())
    })
}

/// Average distance between sample mean and medoid of `n` uniform points in `[0,1]^d`.
#[no_mangle]
pub unsafe extern "C" fn ps_mean_medoid_gap(n: usize, d: usize, samples: usize, seed: u64, gap: *mut f64) -> PsStatus {
    guard(|| {
        *out(gap, "gap")? = mean_medoid_gap(n, d, samples, seed)?;
        Ok(())
    })
}

/// Generate a synthetic store from a TOML spec.
#[no_mangle]
pub unsafe extern "C" fn ps_store_generate(spec_toml: *const c_char, store: *mut *mut PsStore) -> PsStatus {
    guard(|| {
        let spec = SyntheticSpec::from_toml_str(text(spec_toml, "spec_toml")?)?;
        let slot = out(store, "store")?;
        let (s, _) = generate(&spec)?;
        *slot = Box::into_raw(Box::new(PsStore(s)));
        Ok(())
    })
}

/// Read an event CSV. A null `schema_toml` selects the 2019 purchase-order export layout.
#[no_mangle]
pub unsafe extern "C" fn ps_store_read_csv(
    path: *const c_char,
    schema_toml: *const c_char,
    store: *mut *mut PsStore,
) -> PsStatus {
    guard(|| {
        let path = text(path, "path")?;
        let schema = if schema_toml.is_null() {
            LogSchema::bpic2019()
        } else {
            LogSchema::from_toml_str(text(schema_toml, "schema_toml")?)?
        };
        let slot = out(store, "store")?;
        let s = read_event_log(Path::new(path), &schema)?;
        *slot = Box::into_raw(Box::new(PsStore(s)));
        Ok(())
    })
}

/// Keep the invoice cases that pass the milestone and date rules.
#[no_mangle]
pub unsafe extern "C" fn ps_store_filter_invoices(store: *const PsStore, filtered: *mut *mut PsStore) -> PsStatus {
    guard(|| {
        let s = handle(store, "store")?;
        let slot = out(filtered, "filtered")?;
        let (kept, _) = filter_invoice_cases(&s.0)?;
        *slot = Box::into_raw(Box::new(PsStore(kept)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_store_counts(
    store: *const PsStore,
    entities: *mut usize,
    events: *mut usize,
    labels: *mut usize,
) -> PsStatus {
    guard(|| {
        let s = &handle(store, "store")?.0;
        *out(entities, "entities")? = s.num_entities();
        *out(events, "events")? = s.len();
        *out(labels, "labels")? = s.alphabet().len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_store_free(store: *mut PsStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Run the streaming pipeline over `store` with a TOML pipeline config.
#[no_mangle]
pub unsafe extern "C" fn ps_run(store: *const PsStore, config_toml: *const c_char, run: *mut *mut PsRun) -> PsStatus {
    guard(|| {
        let s = handle(store, "store")?;
        let config: PipelineConfig =
            toml_config(text(config_toml, "config_toml")?).map_err(|m| Fail(PsStatus::Config, m))?;
        let slot = out(run, "run")?;
        let r = run_stream(&s.0, &config)?;
        *slot = Box::into_raw(Box::new(PsRun(r)));
        Ok(())
    })
}

fn toml_config(s: &str) -> Result<PipelineConfig, String> {
    let c: PipelineConfig = toml::from_str(s).map_err(|e| e.to_string())?;
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

#[no_mangle]
pub unsafe extern "C" fn ps_run_step_count(run: *const PsRun, steps: *mut usize) -> PsStatus {
    guard(|| {
        *out(steps, "steps")? = handle(run, "run")?.0.report.steps.len();
        Ok(())
    })
}

/// Metric of step `index`; `defined` is 0 when nothing resolved at that step.
#[no_mangle]
pub unsafe extern "C" fn ps_run_step_metric(
    run: *const PsRun,
    index: usize,
    metric: PsMetric,
    step: *mut i64,
    value: *mut f64,
    defined: *mut bool,
) -> PsStatus {
    guard(|| {
        let r = &handle(run, "run")?.0;
        let s = r
            .report
            .steps
            .get(index)
            .ok_or_else(|| Fail(PsStatus::OutOfRange, format!("step index {index} >= {}", r.report.steps.len())))?;
        let v = s.get(metric.into());
        *out(step, "step")? = s.step;
        *out(value, "value")? = v.unwrap_or(f64::NAN);
        *out(defined, "defined")? = v.is_some();
        Ok(())
    })
}

/// Mean of a metric over the steps where it is defined.
#[no_mangle]
pub unsafe extern "C" fn ps_run_metric_mean(
    run: *const PsRun,
    metric: PsMetric,
    value: *mut f64,
    defined: *mut bool,
) -> PsStatus {
    guard(|| {
        let v = handle(run, "run")?.0.report.mean(metric.into());
        *out(value, "value")? = v.unwrap_or(f64::NAN);
        *out(defined, "defined")? = v.is_some();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_run_free(run: *mut PsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
