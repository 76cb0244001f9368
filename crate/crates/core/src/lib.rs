//! Best unitary approximations of coarse-grained discrete-time dynamics.
//!
//! A unitary `U` on `ℋ_IR ⊗ ℋ_UV` together with a fixed UV state induces a
//! (generally non-unitary) channel on the IR factor. This crate finds the
//! IR unitary closest to that channel in channel fidelity: exactly by direct
//! optimization for small instances, and perturbatively through a
//! mean-field generator when IR and UV are weakly coupled. The Dirac quantum
//! walk on a ring is worked out in full, including a Gaussian wave-packet
//! experiment comparing the exact and effective dynamics.

pub mod error;
pub mod channel;
pub mod checks;
pub mod diracqw;
pub mod io;
pub mod linalg;
pub mod meanfield;
pub mod optimizer;
pub mod wavepacket;

pub use error::{Error, Result};
pub use linalg::{
    BipartiteOperator, ComplexMatrix, DensityMatrix, HaarKind, HermitianBasis, Side, C64,
};
