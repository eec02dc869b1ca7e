//! Classical kicked angular-momentum dynamics and quantum entanglement between
//! a Rydberg electron and a rotating molecular core.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] – angular-momentum coupling, rotations, the Numerov radial
//!   integrator, quadrature and bracketed root finding.
//! * [`classical`] – the kicked map for the electron angular momentum and
//!   Poincaré surfaces of section in the molecular frame.
//! * [`channels`] – core rotational channels, phase shifts, frame
//!   transformation and the reaction matrix.
//! * [`mqdt`] – bound eigenstates from the multichannel quantization condition.
//! * [`entangle`] – linear entropy of the reduced electron state, stationary and
//!   time dependent.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod classical;
pub mod entangle;
mod error;
pub mod mqdt;
pub mod numerics;

pub use error::{Error, Result};
