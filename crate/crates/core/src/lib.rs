#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod encoding;
pub mod error;
pub mod event_model;
pub mod experiment;
pub mod ingestion;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
