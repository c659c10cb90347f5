//! Tilted k-means (TKM): individually fair k-means clustering via
//! exponential tilting.
//!
//! The library provides:
//! - dataset ingestion, preprocessing and synthetic blob generation ([`data`]),
//! - k-means++ seeding with D² sampling ([`seeding`]),
//! - the TKM solver with its t→0 baselines (SGD k-means and Lloyd's
//!   heuristic) ([`engine`]),
//! - clustering-utility and fairness metrics ([`metrics`]),
//! - independent semi-analytic solvers used to validate the main solver
//!   in tests ([`oracle`]).

pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod seeding;

pub use data::{Dataset, PreprocessSpec};
pub use engine::{Assignment, Denominator, Method, SolveReport, SolverConfig};
pub use error::{Error, Result};
pub use metrics::MetricsBundle;
pub use seeding::Centroids;
