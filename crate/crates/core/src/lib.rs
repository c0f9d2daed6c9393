//! Numerical verification toolkit for contact jets of vector-valued maps.
//!
//! The crate is organised bottom-up: dense tensors and their symmetrised
//! products, the positivity orderings on fourth-order forms, jet membership
//! tests, contact maps, ellipticity certificates and stability experiments.

pub mod contact;
pub mod eigen;
pub mod ellipticity;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod jets;
pub mod maps;
pub mod orderings;
pub mod sampling;
pub mod spectrum;
pub mod stability;
pub mod tensor;
pub mod vecops;

pub use error::{Error, Result};

/// Version of this crate, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
