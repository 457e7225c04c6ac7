//! Open-system simulation of driven quantum batteries: a charger coupled
//! to a battery, with the charger subject to dephasing.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod blocks;
pub mod error;
pub mod expm;
pub mod lindblad;
pub mod metrics;
pub mod models;
pub mod moments;
pub mod ode;
pub mod opalg;
pub mod scenarios;
pub mod series;
pub mod stochastic;

pub use error::{Error, Result};
pub use models::{ModelKind, ModelSpec, Params};
pub use opalg::{ComplexMatrix, C64};
pub use series::TimeSeries;
