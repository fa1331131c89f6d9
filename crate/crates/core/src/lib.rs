//! Evaluation and human-judgment analytics for abstract-to-title (A2T) generation.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: ingest, filter, tokenize and split abstract/title records.
//! - [`annotation`]: campaigns, judgments, the append-only judgment log and
//!   inter-annotator agreement.
//! - [`scoring`]: best-worst scaling, relative-ranking conversion, rank tables.
//! - [`metric`]: the trainable reference-free title metric over sentence embeddings.
//! - [`humor`]: ensemble aggregation of humor classifiers, threshold search,
//!   classification and generation-control metrics.
//! - [`pseudo`]: construction of the humor-constrained pseudo training set.
//! - [`stats`]: correlation coefficients and multi-split summaries.
//! - [`analysis`]: lexical overlap, title length and edit-distance overlap.

pub mod analysis;
pub mod annotation;
pub mod corpus;
mod error;
pub mod humor;
pub mod metric;
pub mod pseudo;
pub mod scoring;
pub mod stats;

mod seed;

pub use error::{Error, Result};
