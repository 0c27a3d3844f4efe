//! Spectrum, momentum-space transforms and information measures for the
//! quasi-exactly solvable sextic double well `V(x) = (x^6 + 2x^4 - 2(2λ+1)x^2) / 2`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod infotheory;
pub mod lagrange_mesh;
pub mod momentum;
pub mod output;
pub mod potential;
pub mod qes_exact;
pub mod quadrature;
pub mod scans;
pub mod variational;
pub mod wkb;

pub use error::{Error, Result};
pub use potential::ModelParams;
