//! Time-optimal control of one-dimensional Bose-Einstein condensates.
//!
//! The crate is layered bottom-up:
//!
//! * [`gpe`] propagates the Gross-Pitaevskii equation with a Strang split-step
//!   Fourier scheme and prepares eigenstates by imaginary-time relaxation.
//! * [`control`] expands controls in a chopped random basis and models the
//!   finite bandwidth of the control electronics.
//! * [`cost`] evaluates the state-transfer cost and its exact gradient with
//!   respect to the expansion coefficients via a backward adjoint sweep.
//! * [`local`] is the gradient-based quasi-Newton optimizer over coefficients.
//! * [`de`] holds the differential evolution primitives and [`hybrid`] the
//!   combined global-local loop built on top of them.
//! * [`problems`] defines the condensate driving and condensate splitting
//!   benchmarks.

pub mod control;
pub mod cost;
pub mod de;
mod error;
pub mod gpe;
pub mod hybrid;
pub mod local;
pub mod objective;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
