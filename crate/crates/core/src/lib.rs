//! Numerics for semilinear heat equations with memory on the Heisenberg group.

pub mod axisym;
pub mod config;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod grid;
pub mod group;
pub mod mc;
pub mod memory;
pub mod output;
pub mod semigroup;
pub mod solver;
pub mod stats;
pub mod stencil;

pub use error::{Error, Result};
