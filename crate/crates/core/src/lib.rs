//! Constant-mean-curvature foliations of collapsing torus spacetimes.
//!
//! The ambient metric is conformally Gaussian, `e^{2 psi} (-dt^2 + sigma)`,
//! with flat spatial part `sigma` on a torus of one or two dimensions.
//! Hypersurfaces are graphs `t = u(x)` over the torus; [`solver`] finds the
//! graph with prescribed mean curvature `tau` by a damped Newton iteration,
//! and [`foliation`] marches a family of such slices across a schedule of
//! curvatures, refusing to start below the spectral gate `sqrt(n * lambda)`
//! where `lambda` bounds the Ricci contraction with unit timelike vectors.
//!
//! [`verify`] bundles the battery of cross-checks (closed forms, convergence
//! orders, ordering and volume monotonicity, identity residuals) behind a
//! single report; the `cmc` binary exposes all of it on the command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod families;
pub mod foliation;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod metric;
pub mod solver;
pub mod tensor;
pub mod verify;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use foliation::{foliate, FoliateOptions, FoliationResult};
pub use geometry::{compute_geometry, GraphFunction, HypersurfaceGeometry};
pub use grid::{PeriodicGrid, ScalarField, SymTensorField};
pub use metric::{LambdaEstimate, MetricSpec, SliceGeometry};
pub use solver::{newton_solve, NewtonConfig, NewtonTrace, StabilityOperator};
pub use verify::{run_suite, CheckReport, CheckStatus, SuiteMode, SuiteReport};
