//! Pseudospectral simulator and verification harness for the inviscid HVBK two-fluid
//! system on the periodic cube `T³ = [0, 2π)³`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
mod fft;
pub mod gevrey;
pub mod harness;
pub mod integrator;
pub mod random;
pub mod verifier;
pub mod spectral;
pub mod vector;

pub use error::{HvbkError, Result};
