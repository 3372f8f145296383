//! Event-log readers, the invoice case filter and synthetic generators.

pub mod filter;
pub mod log;
pub mod synth;

pub use filter::{filter_invoice_cases, filter_invoice_cases_with, FilterReport, InvoiceFilter};
pub use log::{read_event_log, read_event_log_from, write_event_log, write_event_log_file, LogSchema};
pub use synth::{generate, generate_invoice_stream, generate_shopper_stream, Flavor, GroundTruth, SyntheticSpec};
