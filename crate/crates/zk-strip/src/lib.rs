//! Pseudospectral simulator for a generalized Zakharov-Kuznetsov equation
//! on the strip `R x (0, L)` with homogeneous Dirichlet walls.
//!
//! The unbounded `x` direction is truncated to a periodic box and discretized
//! with a Fourier basis; the bounded `y` direction uses the orthonormal sine
//! basis `psi_l(y) = sqrt(2/L) sin(pi l y / L)`, which encodes the wall
//! conditions (including the extra `u_yy = 0` wall conditions of the
//! fourth-order regularization) for free.
//!
//! The crate is organized as follows:
//!
//! * [`grid`] / [`spectral`] - strip discretization, lossless transforms,
//!   spectral derivatives and 2/3-rule dealiasing,
//! * [`weights`] - the weight-function families, weighted Sobolev norms and
//!   the functionals built from them (Steklov ratio, localized space-time
//!   energy, interpolation-inequality probes),
//! * [`propagator`] - the exact solution operator of the constant-coefficient
//!   regularized linear equation, diagonal in the Fourier x sine basis,
//! * [`evolution`] - Strang splitting of the full equation: exact linear
//!   half-steps plus an explicit RK4 substep for the cutoff nonlinearity,
//!   variable damping, absorption and forcing,
//! * [`diagnostics`] - conserved quantities and energy-identity residuals,
//! * [`decay`] - scenario builder and rate fitting for the long-time decay
//!   experiments,
//! * [`config`] / [`output`] / [`selftest`] - the configuration-file driven
//!   command-line layer.

pub mod config;
pub mod decay;
pub mod diagnostics;
pub mod evolution;
pub mod grid;
pub mod output;
pub mod propagator;
pub mod selftest;
pub mod spectral;
pub mod weights;

pub use grid::{Field, GridError, StripGrid};
pub use spectral::{dealias, forward_transform, inverse_transform, SpectralField};
