//! Annotation HTTP service, run manifests and the `a2t` command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod embed;
mod error;
pub mod manifest;
pub mod session;
pub mod store;

pub use error::{Result, ServiceError};
