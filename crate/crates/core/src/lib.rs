//! Environment-aware radio channel simulation on box-scatterer urban scenes.
//!
//! The crate is organised along the sensing-to-decision loop:
//!
//! - [`scene`]: cube-simplified urban scenes, generation and time evolution.
//! - [`wei`]: environmental information items, quantity accounting and
//!   per-link geometric features.
//! - [`channel`]: line-of-sight tests, image-method reflections, CIR to CFR
//!   synthesis and the statistical path-loss baseline.
//! - [`predict`]: path-loss predictor tiers, pilot-based CFR reconstruction
//!   and error metrics.
//! - [`beam`]: steering codebook, ground-truth and predicted beam selection.
//! - [`alloc`]: max-min fair resource-block allocation.
//! - [`pipeline`]: end-to-end orchestration and CSV outputs.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod alloc;
pub mod beam;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod pipeline;
pub mod predict;
pub mod scene;
pub mod seed;
pub mod wei;

pub use error::{Error, Result};
pub use geometry::{Aabb, Vec3};
