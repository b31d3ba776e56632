//! Numerics for the almost Mathieu operator: SL(2,R) cocycle geometry,
//! periodic band spectra, the integrated density of states, Lyapunov
//! exponents and the Diophantine sets used in its spectral analysis.

pub mod cocycle;
pub mod diophantine;
pub mod error;
pub mod export;
pub mod interval;
pub mod periodic;
pub mod quad;
pub mod renorm;
pub mod sl2;
pub mod symeig;
pub mod thouless;
pub mod verify;

pub use error::{AmoError, Result};
