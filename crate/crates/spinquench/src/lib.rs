//! Quench dynamics of a single spin in an XY chain with a three-site cluster
//! term, its description by an open two-level model, and the geometric phase
//! accumulated on the Bloch sphere.
//!
//! Modules:
//! - [`lindblad`]: the two-level generator, its closed-form solution and an RK4 path.
//! - [`chain`]: chain parameters shared by both many-body backends.
//! - [`ed`]: exact diagonalization for short chains.
//! - [`freefermion`]: Jordan-Wigner / Majorana covariance backend for long chains.
//! - [`pfaffian`]: Pfaffians of real and complex antisymmetric matrices.
//! - [`geometry`]: Bloch angles and total, dynamic and geometric phases.
//! - [`fit`]: long-time fits, periodicity detection and phase classification.

pub mod chain;
pub mod ed;
pub mod error;
pub mod fit;
pub mod freefermion;
pub mod geometry;
pub mod lindblad;
pub mod pfaffian;

pub use error::{Error, Result};
pub use lindblad::{BlochTrajectory, BlochVector, DissipatorParams};
pub use chain::{Boundary, ChainParams, QuenchSpec};
