//! Two-phase incompressible porous-media flow with a sequential Picard solver
//! whose initial saturation relaxation is chosen by a learned controller.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: sparse storage and the Krylov / relaxation linear solvers.
//! - [`model`] and [`rockfluid`]: reservoir description and Brooks–Corey closures.
//! - [`solver`]: pressure assembly, phase velocities, implicit transport, the
//!   relaxed inner loop and the outer time-step driver.
//! - [`features`]: the 17 dimensionless inputs extracted every outer iteration.
//! - [`mlcore`] and [`online`]: regression-tree ensembles and their
//!   batch-incremental updates.
//! - [`controller`]: relaxation selection strategies.
//! - [`datagen`]: offline scenario sampling and dataset generation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod datagen;
pub mod error;
pub mod features;
pub mod linalg;
pub mod mlcore;
pub mod model;
pub mod online;
pub mod rockfluid;
pub mod solver;

pub use error::{Error, Result};
