//! Phase-space simulation and Bayesian inference for a single trapped atom used as
//! the recoiling slit of a two-path interferometer.
//!
//! Everything internal is dimensionless: `q = a + a†`, `p = -i(a - a†)`, `[q, p] = 2i`,
//! so the vacuum covariance is the identity. Physical units (kHz, μs, nm, mK) only
//! appear at API boundaries, and [`units`] holds the conversions.
//!
//! Representations of the motional state:
//!
//! * [`GaussianState`]: closed-form moments, exact for harmonic evolution.
//! * [`FockDensityMatrix`]: truncated number basis, the full-quantum reference.
//! * [`TrajectoryEnsemble`]: truncated Wigner trajectories.
//!
//! [`protocol`] drives any of them through quench sequences, [`inference`] fits
//! visibility data and [`tomography`] reconstructs Wigner functions from simulated
//! characteristic-function measurements.

pub mod error;
pub mod fock;
pub mod inference;
pub mod numeric;
pub mod phase_space;
pub mod protocol;
pub mod tomography;
pub mod twa;
pub mod units;

pub use error::{Error, Result};
pub use fock::{FockDensityMatrix, WignerGrid};
pub use phase_space::{GaussianState, LambDicke, PhaseSpaceConventions, TrapParams, Visibility};
pub use protocol::{KerrScaling, MotionalState, ProtocolSequence, QuenchSegment, VisibilityTrace};
pub use twa::{ClassicalFlow, EnsembleVisibility, TrajectoryEnsemble};
