//! Clustering of random-walk time series through a nonparametric
//! representation of their increments.
//!
//! Each increment series is mapped to a pair made of its rank vector (the
//! dependence part, one coordinate of the empirical copula) and its binned
//! marginal distribution. Two series are compared with a blended distance
//!
//! ```text
//! d_θ² = θ · d₁² + (1 − θ) · d₀²
//! ```
//!
//! where `d₁` is a Spearman-type distance between rank vectors and `d₀` is
//! the Hellinger distance between histograms. `θ = 1` clusters on joint
//! behaviour only, `θ = 0` on marginal distribution only.
//!
//! The crate is organised bottom-up:
//!
//! - [`ingestion`]: CSV panels of level series and their first differences.
//! - [`representation`]: bijective ranks and shared-grid histograms.
//! - [`distance`]: the empirical estimators and full distance matrices.
//! - [`clustering`]: hierarchical and k-medoids partitioning, adjusted Rand
//!   index, resampling stability selection of `K`, cluster summaries.
//! - [`synthetic`]: block-correlation panels with planted distribution groups.
//! - [`pipeline`]: end-to-end runs writing reproducible artifacts.

pub mod clustering;
pub mod distance;
pub mod error;
pub mod ingestion;
pub mod pipeline;
pub mod representation;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};

/// Library version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
