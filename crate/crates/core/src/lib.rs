//! Numerical laboratory for data re-uploading circuits viewed as truncated
//! Fourier models.
//!
//! The crate is organized bottom-up: [`linalg`] supplies the small dense
//! kernels, [`circuit`] simulates the circuit family, [`gradients`] and
//! [`fourier`] differentiate it in parameter and frequency space,
//! [`diagnostics`] turns those into rank/spectrum/phase reports and
//! [`training`] fits circuits to Fourier targets.

pub mod circuit;
pub mod diagnostics;
pub mod error;
pub mod fourier;
pub mod gradients;
pub mod linalg;
pub mod training;

pub use circuit::{forward, ArchitectureSpec, ParamSlot, Statevector};
pub use error::{Error, Result};
pub use linalg::{RealMatrix, Spectrum};
