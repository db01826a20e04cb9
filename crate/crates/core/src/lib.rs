//! Entropic Gromov-Wasserstein and Fused GW solvers on uniform grids.
//!
//! On a uniform grid the power-distance matrix `D = h^k [|i-j|^k]` is never
//! materialized: a binomial recursion multiplies by it in O(k^2 N) per
//! vector, so the gradient step `D_X plan D_Y` of the entropic GW mirror
//! descent costs O(N^2) instead of the O(N^3) of dense matrix products. The
//! solvers here are exact accelerations, not approximations: fast and dense
//! gradient modes produce the same transport plans to machine precision.
//!
//! Modules:
//!
//! - [`grid`], [`measure`], [`plan`], [`cost`], [`config`]: the domain types.
//! - [`multiply`]: the fast kernels (1D recursion, 2D Kronecker expansion,
//!   triple products).
//! - [`dense`]: materialized oracles and the cubic baseline.
//! - [`gradient`]: GW/FGW gradient assembly and objectives.
//! - [`sinkhorn`]: log-stabilized entropic OT inner solver.
//! - [`solver`]: the mirror-descent outer loops.
//! - [`experiments`]: seeded generators, image ingestion, timing harness and
//!   log-log slope fitting.

pub mod config;
pub mod cost;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod gradient;
pub mod grid;
pub mod measure;
pub mod multiply;
pub mod plan;
pub mod scalar;
pub mod sinkhorn;
pub mod solver;

pub use config::{SolveResult, SolverConfig};
pub use cost::FeatureCost;
pub use error::{Error, Result};
pub use grid::{Grid, UniformGrid1D, UniformGrid2D};
pub use measure::{validate_measure, DiscreteMeasure};
pub use plan::{entropy, TransportPlan};
pub use scalar::Scalar;
pub use solver::{entropic_fgw, entropic_gw, GradientMode, MirrorDescentTrace};

/// Scalar precision used by the solvers, the CLI and the experiment harness.
pub type Real = f64;

/// Double-precision aliases for the domain types.
pub type Grid1d = UniformGrid1D<Real>;
pub type Grid2d = UniformGrid2D<Real>;
pub type Measure = DiscreteMeasure<Real>;
pub type Plan = TransportPlan<Real>;
pub type Costs = FeatureCost<Real>;
pub type Config = SolverConfig<Real>;
