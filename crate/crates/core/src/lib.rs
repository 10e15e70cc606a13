//! Convexification of a coefficient inverse problem with restricted
//! Dirichlet-to-Neumann data.
//!
//! The crate covers the whole numerical chain for the 2-D elliptic problem
//! `Δu + a₀(x)u = −f(x₁ − x₀)χ(x₂ + 1)`:
//!
//! * [`basis`]: the orthonormal family `ψ_k = P_k(x₀)e^{x₀}` on `(0, 1)`, the
//!   derivative matrix `M_N` and the triple-product tensor.
//! * [`cwf`]: grid geometry, level-set masks and Carleman weight functions.
//! * [`forward`]: finite-difference forward solver and synthetic boundary data.
//! * [`system`]: log transform, projection onto the basis and the coupled
//!   quasilinear residual operator.
//! * [`objective`] and [`optimize`]: the weighted Tikhonov-like functional,
//!   its exact discrete gradient and gradient projection on a Sobolev ball.
//! * [`reconstruct`]: coefficient and conductivity recovery, parameter schedule
//!   and stability fits.
//!
//! Everything here is pure computation on immutable inputs. IO, configuration
//! and the command line live in the `convexify` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod basis;
pub mod cwf;
mod dd;
pub mod error;
pub mod forward;
pub mod grid;
pub mod linalg;
mod math;
pub mod objective;
pub mod optimize;
pub mod probes;
pub mod reconstruct;
pub mod sobolev;
pub mod stats;
pub mod system;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use error::{Error, Result};
