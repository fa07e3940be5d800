//! Numerical laboratory for solitons of the semiclassical nonlinear
//! Schrödinger equation
//!
//! ```text
//! i h dψ/dt = -(h²/2) Δψ + W'(|ψ|) ψ / (2 h^α |ψ|) + V(x) ψ
//! ```
//!
//! on periodic boxes in one to three dimensions.

pub mod dynamics;
pub mod error;
pub mod field;
pub mod ground_state;
pub mod observables;
pub mod physics;

pub use error::{Error, Result};
