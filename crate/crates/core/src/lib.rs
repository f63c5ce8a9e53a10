//! Combinatorial assortment designs, Nested Logit choice models, and
//! nest identification from boost factors.
//!
//! Items are 0-based throughout the library API; every file format and the
//! CLI use 1-based labels.

pub mod design;
pub mod error;
pub mod harness;
pub mod identify;
pub mod io;
pub mod metrics;
pub mod model;
pub mod recovery;
pub mod sampling;
pub mod stats;

pub use error::{NestError, Result};
