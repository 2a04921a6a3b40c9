//! Limit order book analytics: LOBSTER ingestion, order book replay,
//! mid-quote direction labeling, feature extraction, class rebalancing,
//! classifiers and evaluation.
//!
//! The pipeline mirrors the order of the modules below:
//!
//! ```text
//! lobster_io -> book_engine -> labeling -> features -> resampling -> models -> metrics
//! ```
//!
//! `runner` ties the stages together from a flat key-value configuration.

pub mod book_engine;
pub mod error;
pub mod features;
pub mod labeling;
pub mod lobster_io;
pub mod metrics;
pub mod models;
pub mod resampling;
pub mod rng;
pub mod runner;
pub mod synth;

pub use book_engine::{mid_quote, spread, LiveBook, ReplayMode, ValidationReport};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureSet};
pub use labeling::{Label, LabelParams, LabelSeries};
pub use lobster_io::{
    BookSnapshot, Direction, EventBookSeries, EventKind, Level, OrderEvent, Timestamp,
    ValidationMode,
};
pub use metrics::{evaluate, EvaluationReport};
pub use resampling::{LabeledDataset, Provenance};
