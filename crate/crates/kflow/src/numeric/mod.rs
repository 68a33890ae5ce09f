//! Numeric substrate: dense tensors, unitary FFT, Jacobi eigendecomposition,
//! and seedable randomness.
//!
//! Everything here is a pure function of its inputs; values are freely
//! shareable across threads and RNG state is always explicit.

mod eigh;
mod fft;
mod rng;
mod tensor;

pub use eigh::eigh_symmetric;
pub use fft::{dft_forward, dft_inverse};
pub(crate) use fft::dft_inverse_complex;
pub use rng::SeededRng;
pub use tensor::{ComplexTensor, Tensor};
