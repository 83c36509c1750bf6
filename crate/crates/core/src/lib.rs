//! Curvature of relative Kähler fibrations on local charts.
//!
//! The crate evaluates closed-form weights as exact Wirtinger jets, builds
//! Chern curvature of the metric family `Ω(k) = k·ψ + φ` in the adapted
//! frame, and checks negativity of holomorphic sectional and bisectional
//! curvature empirically by seeded sampling.

#![allow(clippy::needless_range_loop)]

pub mod certifier;
pub mod cli;
pub mod error;
pub mod fibration;
pub mod hermitian;
pub mod jets;
pub mod ke;
pub mod models;

pub use error::{KurvError, Result};
