//! Geometric machinery of Arnold diffusion for the a priori unstable
//! Hamiltonian
//!
//! `H = p²/2 + cos q − 1 + I²/2 + ε cos q (a00 + a10 cos φ + a01 cos s)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: Hamiltonian, separatrix, Melnikov potential, `α`, `β`.
//! * [`crests`]: crest parameterizations, tangencies, critical actions, regimes.
//! * [`scattering`]: `τ*`, reduced Poincaré functions, the truncated scattering map.
//! * [`highways`]: highway level sets and their domain.
//! * [`diffusion`]: pseudo-orbits, ergodization times, diffusion-time estimates.
//! * [`verify`]: independent oracles (quadrature, full-flow integration, `ε*`).
//!
//! Every operation is a pure function of its arguments.

pub mod contour;
pub mod crests;
pub mod diffusion;
mod error;
pub use error::{Error, Result};
pub mod highways;
pub mod model;
pub mod num;
pub mod scattering;
pub mod verify;

pub use crests::{CrestKind, CrestType, Orientation, Regime, RegimeReport, TangencyInfo};
pub use diffusion::{DiffusionTimeEstimate, Leg, Mechanism, PseudoOrbit};
pub use highways::{HighwayDomain, HighwaySample, Side};
pub use model::{FullState, MelnikovCoeffs, ModelParams};
pub use scattering::{Branch, BranchSet, ReducedPoint, TauStar};
pub use verify::Trajectory;
