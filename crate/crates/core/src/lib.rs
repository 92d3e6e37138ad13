//! Numerical laboratory for calculus on configuration spaces over finite
//! reversible Markov chains.
//!
//! A base space is a finite reversible chain with rate matrix `Q`, reference
//! measure `m` and optionally a metric. Configurations are finite multisets of
//! base points, stored as occupation vectors and enumerated up to a particle
//! cap. The independent-particle dynamics, Poisson measures, transport
//! distances and curvature inequalities are computed exactly on that
//! enumeration, with explicit tail bounds where the cap truncates an infinite
//! sum.

// `!(x > 0)` is how NaN gets rejected; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod base_space;
pub mod config_space;
pub mod error;
pub mod lift;
pub mod linalg;
pub mod report;
pub mod scalar;
pub mod transport;
pub mod verify;

pub use base_space::{BaseFunction, FiniteBaseSpace};
pub use config_space::{ConfigMeasure, ConfigSpace, Configuration, LevyMixture};
pub use error::{Error, Result};
pub use lift::{ConfigFunction, CylinderFunction, ExpCylinder, Expr, LiftedGenerator, LiftedKernel};
pub use report::{DefectReport, Expectation, Outcome, Tier};
pub use scalar::Real;
pub use verify::{run_suites, Fixture, Suite, SuiteOptions, SuiteReport};

/// Double-precision base space.
pub type BaseSpace = FiniteBaseSpace<f64>;
/// Double-precision configuration enumeration.
pub type Configs = ConfigSpace<f64>;
/// Double-precision configuration measure.
pub type Measure = ConfigMeasure<f64>;
/// Double-precision configuration function.
pub type ConfigFn = ConfigFunction<f64>;
