//! Quantum, hybrid and classical denoising diffusion for sparse jet images.
//!
//! The crate is layered bottom-up:
//!
//! - [`qlinalg`]: dense complex linear algebra (QR, Hermitian eigensolver,
//!   PSD square roots).
//! - [`qsim`]: statevector simulator and Haar-random unitaries.
//! - [`encoding`]: pixel normalization, four-channel split and 4-qubit angle
//!   encoding.
//! - [`diffusion`]: Gaussian noise schedule and Haar scrambling of encoded
//!   channels.
//! - [`denoiser`]: classical, hybrid and fully quantum denoisers with exact
//!   gradients.
//! - [`train`]: MSE/Adam training, sample generation, FID and prominence
//!   filtering.
//! - [`jetio`]: dataset files, synthetic jets, cropping and image/plot output.

pub mod denoiser;
pub mod diffusion;
pub mod encoding;
pub mod error;
pub mod jetio;
pub mod par;
pub mod qlinalg;
pub mod qsim;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::Tensor3;
