//! Exact computation and closed-form bounding of the variational distance
//! delta(P^n, Q^n) between n-fold product distributions.
//!
//! The crate provides:
//!
//! - [`dist`]: finite-support distributions, delta(P, Q), and the
//!   difference profile (difference set, minimum differing probability)
//!   that decides which bounds apply;
//! - [`exact`]: three exact engines at increasing scale — brute-force
//!   enumeration, type-class aggregation, and a two-point binomial
//!   decomposition;
//! - [`bounds`]: the linear growth bound, two square-root growth bounds
//!   gated on the minimum differing probability, derivative bounds for
//!   two-point mass transfer, and the Stirling/power-term inequalities
//!   behind them;
//! - [`derivative`]: the exact right derivative of the distance under
//!   two-point transfer, with its per-k decomposition and Jensen check;
//! - [`chain`]: decomposition of any pair into a chain of two-point steps
//!   with additive distances;
//! - [`sampling`]: a seeded Monte Carlo estimator for large n;
//! - [`experiments`]: deterministic sweeps and probes emitting CSV.
//!
//! Everything numeric is generic over [`field::Field`] with an exact
//! rational backend (ground truth) and an f64 backend that assembles
//! products in log domain. All operations are pure functions of immutable
//! values; types are `Send + Sync` and safe to share across threads.

pub mod bounds;
pub mod chain;
pub mod derivative;
pub mod dist;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod field;
pub mod sampling;

#[doc(hidden)]
pub mod testutil;

pub use bounds::BoundReport;
pub use chain::{two_point_chain, ChainDecomposition};
pub use derivative::TwoPointFamily;
pub use dist::{diff_profile, triangle_check, variational_distance, DiffProfile, Distribution};
pub use error::{Error, Result};
pub use exact::{
    brute_force_distance, exact_distance, two_point_distance, type_class_distance, EngineKind,
    ProductQuery,
};
pub use field::Field;
pub use sampling::{mc_distance, McEstimate};
