//! Dense state-vector simulation of an atom interferometer coupled to
//! which-path detectors.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: labeled tensor-product state vectors, partial traces and
//!   seeded Haar-random states.
//! * [`optics`]: Gaussian single-path fields on a mid-field screen and the
//!   screen patterns built from them.
//! * [`detectors`]: qubit, single-molecule and bolometer couplings, plus the
//!   bolometer's external environment.
//! * [`branches`]: record-based branch decomposition, observer chains, Born
//!   weights and seeded outcome sampling.
//! * [`bell`]: singlet pairs measured by two recording observers.
//! * [`scenario`]: runnable scenario files and the artifacts they emit.
//!
//! Data-parallel loops (grid evaluation, sampling, property sweeps) run on
//! rayon when the `parallel` feature is enabled and fall back to sequential
//! iteration otherwise. Both paths produce bit-identical results.

pub mod bell;
pub mod branches;
pub mod detectors;
mod error;
pub mod exec;
pub mod hilbert;
pub mod optics;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use exec::Execution;
pub use hilbert::{DensityMatrix, Factor, StateVector, C64};

/// Name of the two-path (or three-mode, with back-action) atom factor.
pub const ATOM: &str = "atom-path";
