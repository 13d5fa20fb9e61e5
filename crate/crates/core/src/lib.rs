//! Channel estimation and discrete-phase passive beamforming for
//! IRS-assisted single-user uplinks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod hadamard;
pub mod linalg;
pub mod sdp;
pub mod training;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, C64};
