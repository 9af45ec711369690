//! Quantum and classical resolution limits for three-dimensional point
//! sources imaged through a Gaussian point-spread function.

// `!(a < b)` is the NaN-rejecting comparison used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chernoff;
pub mod crack;
pub mod direct_imaging;
pub mod error;
pub mod hypothesis;
pub mod linalg;
pub mod modesort;
pub mod oracle;
pub mod output;
pub mod psf;
pub mod qfim;
pub mod quadrature;
pub mod selftest;
pub mod sweep;

pub use error::{Error, Result};
