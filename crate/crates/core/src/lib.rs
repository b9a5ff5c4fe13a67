//! Spectral solver for the damped Klein-Gordon equation
//! `u_tt - L u + b u_t + m^2 u = |u|^p` on the tori `T^1`, `T^2`, `T^3` and
//! on `SU(2)` restricted to central functions.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the experiment harness uses.

pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod fourier;
pub mod gn;
pub mod groups;
pub mod linear;
pub mod propagator;
pub mod scalar;
pub mod semilinear;

pub use error::{Error, Result};
pub use groups::{GroupKind, GroupSpec, ModeIndex};
pub use propagator::{ModeRegime, Regime};
pub use scalar::Scalar;

pub type ModeSet = groups::ModeSet<f64>;
pub type QuadratureGrid = groups::QuadratureGrid<f64>;
pub type SpectralField = fourier::SpectralField<f64>;
pub type Transform = fourier::Transform<f64>;
pub type EvolutionParams = propagator::EvolutionParams<f64>;
pub type EvolutionState = linear::EvolutionState<f64>;
pub type SemilinearConfig = semilinear::SemilinearConfig<f64>;
pub type SemilinearProblem = semilinear::SemilinearProblem<f64>;
pub type Trajectory = semilinear::Trajectory<f64>;
