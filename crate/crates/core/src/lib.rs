//! Single-dither extremum seeking control for mechanical systems.
//!
//! The closed loop drives a second-order plant `q̈ = f(q, q̇) + u` towards the
//! minimizer of a measured objective `J(q)` using one high-frequency dither
//! `ω cos(ωt)`. The crate provides the closed-loop vector field, a
//! fixed-step RK4 integrator, the averaged system with its Lie-bracket
//! checks, the benchmark plants and two literature baselines, plus
//! diagnostics and a scenario-driven front end.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar for common use.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analysis;
pub mod averaging;
pub mod baselines;
pub mod benchmarks;
pub mod config;
pub mod error;
pub mod esc;
pub mod gains;
pub mod integrator;
pub mod objective;
pub mod output;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod state;
pub mod system;

pub use error::{EscError, Result};
pub use scalar::Real;

pub type StateVector = state::StateVector<f64>;
pub type MechanicalSystem = system::MechanicalSystem<f64>;
pub type Objective = objective::Objective<f64>;
pub type EscGains = gains::EscGains<f64>;
pub type EscClosedLoop = esc::EscClosedLoop<f64>;
pub type AveragedLoop = averaging::AveragedLoop<f64>;
pub type Trajectory = integrator::Trajectory<f64>;

pub type StateVectorF32 = state::StateVector<f32>;
pub type MechanicalSystemF32 = system::MechanicalSystem<f32>;
pub type ObjectiveF32 = objective::Objective<f32>;
pub type EscGainsF32 = gains::EscGains<f32>;
pub type EscClosedLoopF32 = esc::EscClosedLoop<f32>;
pub type AveragedLoopF32 = averaging::AveragedLoop<f32>;
pub type TrajectoryF32 = integrator::Trajectory<f32>;
