//! Gait-learning toolkit: Bezier gait kernels, a policy-driven action
//! decoder, heuristic regulators, a reduced-order biped surrogate and an
//! evolution-strategies trainer.

pub mod baseline;
pub mod bridge;
pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod env;
pub mod error;
pub mod es;
pub mod gait;
pub mod joints;
pub mod plant;
pub mod policy;
pub mod regulators;
pub mod reward;
pub mod trace;
pub mod training;

pub use error::{GaitError, Result};
