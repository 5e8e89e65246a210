//! Quantum simulation of the viscous Burgers equation through the
//! Cole-Hopf transform, with zero-noise extrapolation and a graph-attention
//! error corrector.

pub mod circuit;
pub mod circuit_graph;
pub mod classical;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod krylov;
pub mod mitigation;
pub mod pde;
pub mod qagt;
pub mod qsim;

pub use error::{Error, Result};
