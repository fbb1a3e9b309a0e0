//! Finite-horizon linear-quadratic tracking for the fixed-wing landing flare.
//!
//! The pipeline: build the linearized longitudinal model ([`model`]), design
//! the exponential flare reference ([`trajectory`]), integrate the Riccati and
//! feedforward equations backward ([`lqt`], on top of [`ode`]), simulate the
//! closed loop ([`sim`]) and check the landing constraints ([`constraints`]).
//! [`cli`] ties it together behind the `flare-lqt` binary.

pub mod cli;
pub mod constraints;
pub mod error;
pub mod io;
pub mod lqt;
pub mod model;
pub mod ode;
pub mod pipeline;
pub mod plot;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
