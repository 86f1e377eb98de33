//! Quadratic optimal control of bilinear evolution systems with an endpoint
//! constraint.
//!
//! The library solves `min J(u)` over controls steering `ẏ = Ay + B(u, y)`
//! into a prescribed terminal state `y(T) = y_d`, where
//! `J(u) = ∫‖y‖² dt + (r/2)∫‖u‖² dt`. Three solver layers build on each
//! other:
//!
//! * [`penalty`] — minimizes the penalized cost
//!   `J_ε(u) = ‖y(T) − y_d‖² + ε J(u)` by forward–backward sweeps over the
//!   Pontryagin optimality system;
//! * [`continuation`] — drives `ε → 0` over a geometric schedule with warm
//!   starts, recovering the endpoint-constrained minimizer in the limit;
//! * [`feedback`] — for scalar controls of commutative systems, evaluates
//!   the time-varying feedback representation of the optimal control and
//!   solves its fixed point.
//!
//! Two concrete systems ship with the crate: right-shift transport on a
//! truncated half-line and the Dirichlet heat equation on `(0, 1)`, both
//! with the multiplication control operator `B(u, y) = u·y`, scalar or
//! distributed. [`scenario`] bundles them into configured benchmark runs
//! with CSV/JSON output; the `bilinear-oc` binary exposes those runs on the
//! command line.

// Validation guards are written as `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod feedback;
pub mod penalty;
pub mod rng;
pub mod scenario;
pub mod space;

pub use error::{Error, Result};

// Keep the book's code blocks compiling: every fenced Rust snippet in the
// guide runs as a doctest of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/penalty.md")]
    mod penalty {}
    #[doc = include_str!("../../../book/src/continuation.md")]
    mod continuation {}
    #[doc = include_str!("../../../book/src/feedback.md")]
    mod feedback {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
