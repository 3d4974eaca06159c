//! Least-cost structuring of 24/7 carbon-free energy procurements.
//!
//! Given joint hourly scenarios of generation for a fixed universe of CFE
//! assets and of one or more load profiles, the crate finds procurement
//! fractions `w` that minimize expected cost while the annual hourly-matched
//! CFE score reaches a target `p_C` in at least a fraction `alpha` of the
//! scenarios.
//!
//! * [`scenario`]: scenario sets, manifests/CSV and the correlated generator.
//! * [`metrics`]: CFE scores, quantiles, costs, shortfall and VaR.
//! * [`sqp`]: a general SLSQP engine (active-set QP, Wolfe line search, BFGS).
//! * [`structurer`]: single-load chance-constrained solves and the
//!   multi-load strategies.
//! * [`analysis`]: cost grids, diversification frontiers, report emission.
//! * [`oracle`]: brute-force verifiers for small instances.

pub mod analysis;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod scenario;
pub mod sqp;
pub mod structurer;

pub use error::{CfeError, Result};
pub use metrics::{Bounds, CfeTarget, PortfolioWeights, ScoreDistribution};
pub use scenario::{AssetKind, AssetSpec, ScenarioSet};
