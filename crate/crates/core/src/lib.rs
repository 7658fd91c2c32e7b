//! Battery state-of-power laboratory on a one-RC Thevenin model.
//!
//! - [`ecm`]: model dynamics, OCV table, closed-form constant-current prediction
//! - [`soa`]: safe operation area and compliance checks
//! - [`analytic`]: closed-form multi-constraint CC state of power
//! - [`pom`]: stepwise CV, CC-CV and CP peak operation modes
//! - [`error_lab`]: analytic and empirical propagation of five error sources
//! - [`oracle`]: brute-force bisection over forward simulations
//! - [`validation`]: analytic-versus-oracle grid runs
//! - [`exec`]: sequential or rayon-parallel grid evaluation

// Negated comparisons are deliberate: NaN must fail every bound check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod ecm;
pub mod error;
pub mod error_lab;
pub mod exec;
pub mod oracle;
pub mod pom;
pub mod soa;
pub mod validation;

pub use analytic::{sop_cc, Constraint, Evaluation, SopResult};
pub use ecm::{BatteryParams, BatteryState, OcvCurve, Window};
pub use error::{Result, SopError};
pub use exec::Exec;
pub use soa::{Direction, Soa};
