//! Euclidean heat content `H_Ω(t) = ∫_Ω ∫_Ω p_t(x, y) dx dy` of bounded open
//! sets: four independent engines, finite-difference time derivatives, and
//! numerical verification of the refined monotonicity, convexity and lower
//! bounds together with the earlier baseline constants.
//!
//! The numerics are generic over [`scalar::Real`] (`f32`, `f64`); the aliases
//! below fix the working precision `f64` used by the CLI.

// `!(x > 0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod derivatives;
pub mod engines;
pub mod error;
pub mod geometry;
pub mod inequalities;
pub mod kernel;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Rational, Real};

pub type Domain = geometry::Domain<f64>;
pub type Point = geometry::Point<f64>;
pub type Estimate = engines::Estimate<f64>;
pub type Engine = engines::Engine<f64>;
pub type GridConfig = engines::GridConfig<f64>;
pub type Field = engines::Field<f64>;
pub type DerivativeEstimate = derivatives::DerivativeEstimate<f64>;
pub type InequalityCase = inequalities::InequalityCase<f64>;
pub type VerificationReport = inequalities::VerificationReport<f64>;
