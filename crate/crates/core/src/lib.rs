//! Periodic solutions of delay differential equations with state-dependent
//! delays by piecewise polynomial collocation.

pub mod builtin;
pub mod collocation;
pub mod constraints;
pub mod error;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod newton;
pub mod operator;
pub mod ppoly;
pub mod problem;

pub use builtin::{builtin, ConstraintFamily, SdProto};
pub use collocation::{residual_on_grid, CollocationResidual, CollocationSystem, UnknownLayout};
pub use constraints::{AffineConstraints, ConstraintTerm};
pub use error::{Error, Result};
pub use mesh::{Mesh, NodeFamily};
pub use newton::{Damping, NewtonConfig, NewtonReport, NonlinearSystem};
pub use operator::{ConsistencyError, OperatorMatrix, StabilityProbe};
pub use ppoly::{DifferentiablePeriodic, DiscontinuousPP, ExtendedVector, PeriodicFunction, PeriodicPP};
pub use problem::{rhs_g, DelayProblem};
