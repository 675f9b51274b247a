//! Differentiable 2D incompressible flow with immersed-boundary bodies.
//!
//! `difflow` solves the incompressible Navier-Stokes equations on a staggered
//! (MAC) finite-volume grid with fully implicit Crank-Nicolson time stepping.
//! Moving parametric bodies are coupled to the fluid through the immersed
//! boundary method: the no-slip condition is posed as an equality constraint
//! and each time step is solved as one Newton iteration on a sparse KKT
//! system. Because every step ends with a factorized KKT matrix, trajectory
//! derivatives with respect to body shape and gait parameters come almost for
//! free via the implicit function theorem, and can be fed straight into
//! gradient-based optimizers.
//!
//! The main pieces:
//!
//! - [`grid`]: staggered-grid geometry, boundary conditions, velocity layout.
//! - [`operators`]: sparse Laplacian / gradient / divergence operators and the
//!   nonlinear convection term with its analytic Jacobian.
//! - [`navier_stokes`]: implicit Crank-Nicolson stepping of the fluid alone.
//! - [`ib`]: regularized-delta interpolation between grid and body boundary.
//! - [`bodies`]: parametric geometries (cylinder, multi-link tail) and gaits.
//! - [`fsi`]: the coupled fluid-structure step and rollout driver.
//! - [`sensitivity`]: implicit-function-theorem trajectory gradients.
//! - [`workbench`]: experiment configuration, diagnostics, BFGS, file output.
//!
//! See the `examples/` directory for runnable entry points covering each
//! capability (cylinder benchmarks, convergence study, tail replication,
//! shape/gait optimization, gradient verification).

pub mod bodies;
pub mod error;
pub mod fsi;
pub mod grid;
pub mod ib;
pub mod navier_stokes;
pub mod operators;
pub mod sensitivity;
pub mod workbench;

mod linsolve;

pub use error::{Error, Result};
pub use fsi::{fsi_step, simulate, FsiStepResult, KktFactorization, Schedule, Trajectory};
pub use grid::{DomainBoundaryConditions, EdgeCondition, FluidState, GridSpec};
pub use ib::{BoundaryMesh, DeltaKernel};
pub use navier_stokes::{ns_step, FluidConfig, StepDiagnostics};
pub use operators::{build_operators, FluidOperators};
pub use sensitivity::{ObjectiveSpec, SensitivityState};
