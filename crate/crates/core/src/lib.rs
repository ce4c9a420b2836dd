//! Sigma-delta quantization of compressed-sensing measurements with one-stage
//! convex recovery.
//!
//! The crate is organized bottom-up:
//!
//! * [`operators`]: difference operators `D^r`, `D^{-r}`, the noise-shaping matrix
//!   `H` and its orthogonal SVD factor `U` (with a DST-III fast path for `r = 1`).
//! * [`matrices`]: measurement ensembles (sub-Gaussian, partial DFT/DCT/DST, chirp
//!   and its submatrix, `U`-modified) and coherence / RIP probes.
//! * [`quantize`]: MSQ, greedy `r`-th order sigma-delta and the digital-buffer pipeline.
//! * [`recover`]: the one-stage programs, the encoded program and the two-stage baseline,
//!   all backed by one conic solver.
//! * [`encode`]: Bernoulli further-encoding, bit accounting and distortion-rate sweeps.
//! * [`io`]: binary containers for matrices, quantized vectors, problems and solutions.

pub mod encode;
pub mod error;
pub mod io;
pub mod linalg;
pub mod matrices;
pub mod operators;
pub mod quantize;
pub mod recover;
pub mod seed;
pub mod signal;

pub use error::{Error, Result};
