//! Projected shrinkage solvers for box-constrained l1-minimization.
//!
//! The central fact used throughout: for a box `X` and `tau > 0`,
//!
//! ```text
//! prox_{tau ||.||_1 + indicator_X}(v) = [tau * shrink(v / tau)]_X
//! ```
//!
//! so the proximal step of the boxed l1 norm is a soft threshold followed by
//! a clamp. The solvers in [`solvers`] are dual-ascent and splitting schemes
//! that only ever evaluate the right-hand side.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxset;
pub mod dual;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod selfcheck;
pub mod solvers;

pub use boxset::{BoxSet, Interval, IntervalClass, Sign};
pub use dual::Problem;
pub use error::{Error, Result};
pub use experiments::{
    generate_instance, recovered, sweep, Execution, Instance, InstanceSpec, SweepConfig,
    SweepReport, SweepRow,
};
pub use linalg::{norms, spectral_norm, DenseMatrix, Norms, SpectralEstimate, SpectralOptions};
pub use operators::{
    optimality_residual, projected_shrink, prox_oracle_1d, shifted_projection, shrink, shrink_vec,
    ProxSpec,
};
pub use solvers::{
    fbs_box_bpdn, proshrink, proshrink_accelerated, proximal_point_bp, residual_trace, FbsConfig,
    LambdaSchedule, MomentumRule, OuterConfig, SolverConfig, SolverResult, StepSize, Termination,
};
