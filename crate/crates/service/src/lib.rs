//! Operational shell for the innotree engine: configuration, the snapshot
//! store, the command-line interface and the HTTP API.
//!
//! The CLI and the HTTP handlers compute their payloads with the same
//! functions in [`api`], so a report fetched either way has the same bytes.

pub mod api;
pub mod cli;
pub mod config;
pub mod http;
pub mod snapshot;

pub use snapshot::{EngineSnapshot, SnapshotStore};
