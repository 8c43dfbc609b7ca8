//! Parisian ruin for refracted spectrally negative Lévy processes.

// `!(v > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod identities;
pub mod lawx;
pub mod mc;
pub mod model;
pub mod par;
pub mod poly;
pub mod quad;
pub mod ruin;
pub mod scale;
pub mod special;
pub mod tables;
pub mod verify;

pub use error::{Error, Result};
pub use model::{LevyModel, RefractedModel};
