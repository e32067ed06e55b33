//! Exact simulator for quantum computation in a hidden orthogonal-subspace
//! basis: lifting of phase-invariant logical operations to physical space,
//! consumption-aware phase references, a hidden-key identification protocol,
//! and copy-complexity bounds for squashing high-dimensional fingerprints.

pub mod error;
pub mod harness;
pub mod hidden_basis;
pub mod linalg;
pub mod phase_invariant;
pub mod phase_reference;
pub mod protocol;
pub mod rng;
pub mod squashing;

pub use error::{Error, Result};
