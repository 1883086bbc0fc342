//! Differentiation engine.
//!
//! Two mechanisms, composable: forward-mode [`DualScalar`]s carry exact time
//! derivatives through any computation, and the reverse-mode [`Tape`] yields
//! exact gradients of a recorded scalar with respect to every recorded leaf.
//! Training uses both at once — the network's time-derivative stream is
//! recorded on the tape, so the loss gradient sees through it.

mod dual;
mod scalar;
mod tape;

pub use dual::DualScalar;
pub use scalar::{ActScalar, Scalar};
pub use tape::{check_gradient, Gradients, Tape, Var, DIV_GUARD};
