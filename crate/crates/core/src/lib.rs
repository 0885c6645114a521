//! Fire-station layout evaluation and placement engine.

pub mod analytics;
pub mod criteria;
pub mod error;
pub mod forecast;
pub mod geo;
pub mod ingest;
pub mod mobility;
pub mod model;
pub mod optimizer;
pub mod simulate;
pub mod synthetic;

pub use error::{Error, Result};
