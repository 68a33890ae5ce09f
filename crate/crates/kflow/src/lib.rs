//! Scale-banded flow matching over K-amplitude decompositions.
//!
//! A signal is mapped into a real coefficient vector by an invertible
//! transform (radial-shell Fourier, multilevel wavelet, or data-fitted PCA),
//! the coefficients are grouped into ordered scale bands, and a generative
//! flow reveals one band after another as its time variable sweeps the
//! normalized scale axis. The crate provides:
//!
//! - [`numeric`]: tensors, unitary FFT, Jacobi eigendecomposition, seeded RNG;
//! - [`kamp`]: the transform family and scale-band bookkeeping;
//! - [`interpolant`]: the banded stochastic interpolant and its analytic
//!   conditional velocity;
//! - [`model`]: a scale-embedded MLP velocity model with exact reverse-mode
//!   gradients and an Adam optimizer;
//! - [`training`]: the conditional flow matching training loop and
//!   checkpointing;
//! - [`sampling`]: ODE integration (Euler/Heun), classifier-free guidance
//!   with condition dropping, and band-wise noise editing;
//! - [`metrics`]: FID, class-conditional FID, CDR, recall, band spectra,
//!   energy distance, and trajectory projection ratios;
//! - [`data`]: toy datasets, spectral textures, and tensor file I/O;
//! - [`io`]: the `KFT1` tensor and `KFC1` container file formats.

pub mod data;
pub mod error;
pub mod interpolant;
pub mod io;
pub mod kamp;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
