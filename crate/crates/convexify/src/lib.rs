//! Configuration, file formats and orchestration around `convexify-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod pipeline;

pub use convexify_core as core;
