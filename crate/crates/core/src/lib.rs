//! Differentiable rigid-body contact built on soft signed distance functions.

pub mod cli;
pub mod collision;
pub mod config;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod real;
pub mod smooth;
pub mod ssdf;
pub mod verify;

pub use error::{Error, Result};
pub use real::{Dual, HyperDual, Real};
pub use smooth::Temperature;
