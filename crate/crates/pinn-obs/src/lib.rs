//! Adaptive neural observer for nonlinear dynamical systems.
//!
//! A small fully connected network maps time `t` to a state estimate
//! `xhat(t)` together with a time-varying injection gain `L(t)`. Training
//! fits the estimate to output measurements `y = C x` alone while penalizing
//! the observer equation residual
//!
//! ```text
//! g(t) = dxhat/dt - f(xhat, t) - B u(t) - L(t) (y(t) - C xhat(t))
//! ```
//!
//! so the learned gain shapes how measurement innovation corrects the
//! estimate. After training, the gain can be replayed inside a classical
//! state observer integrated by Runge-Kutta, or the network can predict
//! states directly.

// Index loops in the numeric kernels mirror the matrix equations they
// implement; iterator rewrites hide that correspondence.
#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod integrator;
pub mod network;
pub mod runner;
pub mod systems;
pub mod trainer;

pub use error::{Error, Result};
