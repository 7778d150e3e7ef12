//! Density computations for stochastic-volatility price models with
//! double-exponential jumps: Monte Carlo, semi-analytic mixing integrals,
//! tail asymptotics and verification of tail bounds.
//!
//! Everything numeric is generic over [`real::Real`] (`f32` or `f64`); the
//! aliases below fix the common `f64` and `f32` instantiations.

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod error;
pub mod jumplaw;
pub mod mc;
pub mod models;
pub mod oracle;
pub mod quadrature;
pub mod real;
pub mod rng;
pub mod semianalytic;
pub mod verify;

pub use error::{Error, Result};

pub type JumpParamsF64 = jumplaw::JumpParams<f64>;
pub type JumpParamsF32 = jumplaw::JumpParams<f32>;
pub type CompoundPoissonLawF64 = jumplaw::CompoundPoissonLaw<f64>;
pub type CompoundPoissonLawF32 = jumplaw::CompoundPoissonLaw<f32>;
pub type ModelSpecF64 = models::ModelSpec<f64>;
pub type ModelSpecF32 = models::ModelSpec<f32>;
pub type SimConfigF64 = mc::SimConfig<f64>;
pub type SimConfigF32 = mc::SimConfig<f32>;
pub type MixingDensityTableF64 = mc::MixingDensityTable<f64>;
pub type MixingDensityTableF32 = mc::MixingDensityTable<f32>;
pub type DensityCurveF64 = mc::DensityCurve<f64>;
pub type DensityCurveF32 = mc::DensityCurve<f32>;
pub type TailConstantsF64 = asymptotics::TailConstants<f64>;
pub type TailConstantsF32 = asymptotics::TailConstants<f32>;
pub type AsymptoticTemplateF64 = asymptotics::AsymptoticTemplate<f64>;
pub type SandwichReportF64 = verify::SandwichReport<f64>;
