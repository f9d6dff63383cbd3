//! Index files, annotation and report formats, the `subsearch` CLI and the
//! HTTP search service, on top of `subsearch-core`.

pub mod annotations;
pub mod cli;
pub mod embed;
pub mod report;
pub mod search;
pub mod server;
pub mod store;

pub use store::{load_index, save_index, StoreError};
