//! Asymptotic structure of finite-dimensional quantum channels.
//!
//! The crate computes peripheral spectra and attractor subspaces of CPTP
//! maps, decomposes the attractor into blocks `B(H_k1) ⊗ ρ_k` permuted by
//! the channel, brings that decomposition to cyclic normal form, builds
//! channels with a prescribed asymptotic map, and checks the Petz recovery
//! identities on the attractor.

pub mod channel;
pub mod divisibility;
pub mod error;
pub mod linalg;
pub mod random;
pub mod recovery;
pub mod spectral;
pub mod structure;
pub mod unfold;

pub use channel::{Channel, GklsGenerator};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Subspace, Tolerances, C64};
