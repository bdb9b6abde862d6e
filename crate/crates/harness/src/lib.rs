//! The `eegeval` harness: file formats, run configuration, the evaluate and
//! replay pipeline and report tables, shared by the CLI and tests.

pub mod config;
pub mod emb1;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod manifest;
pub mod predictions;
pub mod report;
pub mod results;
pub mod store;

pub use error::{HarnessError, Result};
