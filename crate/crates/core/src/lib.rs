//! Spectral analysis of perturbed operator families `H(ε) = H₀ + εH₁`
//! intertwined by a unitary involution `J` (`JH = H*J`), with PT-symmetric
//! Schrödinger operators as the main example.

pub mod basis;
pub mod criteria;
pub mod error;
pub mod expr;
pub mod grushin;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod sweep;
pub mod tasks;

pub use error::{Error, Result};
