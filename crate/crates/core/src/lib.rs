//! Multi-user angle-of-arrival estimation for arrays of Rydberg-atom vapor
//! cells.
//!
//! An atomic receiver only observes the magnitude of the Rabi frequency at
//! each cell. The pipeline here recovers the complex channel from those
//! magnitudes (spectral initialization followed by biased Gerchberg–Saxton
//! iterations), then runs MUSIC on the recovered channel covariance. A
//! conventional RF receiver with full complex snapshots and thermal noise is
//! simulated alongside as the baseline, and the [`harness`] module runs the
//! Monte-Carlo comparisons.

pub mod error;
pub mod harness;
pub mod measurement;
pub mod music;
pub mod numerics;
pub mod phase_retrieval;
pub mod scene;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
