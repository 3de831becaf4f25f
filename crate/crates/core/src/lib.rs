//! Planning, evaluation and Monte Carlo verification of multi-metric A/B test
//! decision rules.
//!
//! The numerical kernel and the correction formulas are generic over the
//! scalar type ([`num_core::Real`], implemented for `f32` and `f64`); the
//! aliases below fix it to `f64`, which the rest of the crate uses.

pub mod decision_engine;
pub mod design_corrections;
pub mod error;
pub mod mc_harness;
pub mod num_core;
pub mod sequential_gst;

pub use error::{Error, Result};

pub type CorrelationMatrix = num_core::CorrelationMatrix<f64>;
pub type Matrix = num_core::Matrix<f64>;
pub type LowerTriangular = num_core::LowerTriangular<f64>;
pub type RiskBudget = design_corrections::RiskBudget<f64>;
pub type Corrections = design_corrections::Corrections<f64>;
