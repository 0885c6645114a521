//! HTTP service and CLI over the coverage engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod jobs;
pub mod ops;
pub mod schema;

pub use api::{router, AppState};
