//! Plug-and-play image restoration with flow-matching priors, plus the
//! tooling to analyze it through its continuous-time SDE limit.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: tensors, seeded random streams, circular convolution.
//! - [`degrade`]: linear degradation operators and the quadratic data-fidelity term.
//! - [`flowfield`]: vector fields (trainable MLP, analytic Gaussian oracle) and the
//!   flow-matching denoiser.
//! - [`fmtrain`]: conditional flow-matching training with an optional Hutchinson
//!   Jacobian penalty.
//! - [`schedule`]: interpolation-time schedules and analytic bound certificates.
//! - [`solver`]: the PnP-Flow iteration and its extrapolated variant.
//! - [`sdelab`]: Euler-Maruyama simulation of the continuous surrogate and
//!   empirical bound checks.
//! - [`harness`]: metrics, image and config I/O, experiment and ablation drivers.

pub mod degrade;
pub mod error;
pub mod flowfield;
pub mod fmtrain;
pub mod harness;
pub mod numerics;
pub mod schedule;
pub mod sdelab;
pub mod solver;

pub use error::{Error, Result};
pub use numerics::{RngStream, Tensor};
