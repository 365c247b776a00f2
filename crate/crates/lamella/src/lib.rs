//! Finite element toolkit for reaction-diffusion-drift transport across a
//! perforated thin layer.
//!
//! The crate solves the eps-dependent micro problem on a strip whose middle
//! layer carries a periodic array of rectangular obstacles, together with the
//! four upscaled limit models reachable by scaling the layer coefficients
//! (choices S1-S4), and runs eps- and delta-convergence studies comparing
//! them.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each major capability has one, from meshing the perforated strip through
//! the micro solver, the limit models, and the sweep studies. The `lamella`
//! binary wraps the same entry points behind `run-micro`, `run-macro`,
//! `study-eps`, `study-delta`, `validate-config` and `plot` subcommands.

// negated comparisons double as NaN-rejection guards on user data
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod drift;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod micro;
pub mod plot;
pub mod problem;
pub mod study;
pub mod upscaled;

pub use error::{Error, Result};
