//! Panel difference-in-differences toolkit.
//!
//! Measures regional minimum-wage exposure from wage microdata, builds the
//! baseline, event-study, growth-interaction, raise-interaction,
//! multi-group and staggered designs, fits them with a weighted two-way
//! fixed-effects engine with cluster-robust inference, decomposes staggered
//! TWFE estimates into 2×2 comparisons, and cross-checks them with
//! heterogeneity-robust staggered estimators on synthetic panels with known
//! ground truth.

pub mod bacon;
pub mod bite;
pub mod cli;
pub mod did_spec;
pub mod engine;
pub mod error;
pub mod kv;
pub mod panel;
pub mod rng;
pub mod simulate;
pub mod staggered;

pub use error::{Error, Result};
