//! Spectral fluctuations of quantum systems as time series.
//!
//! The crate connects three views of the same information:
//!
//! * the `delta_q` statistic of unfolded levels and its averaged power
//!   spectrum, whose low-frequency exponent `alpha` is 1 for chaotic and 2 for
//!   integrable spectra ([`stats`], [`rmt`]);
//! * the spectral form factor `K(tau)` and the quantum return probability
//!   `D_H K(tau) = |Tr U^l|^2` ([`stats`], [`floquet`]);
//! * the diagonal of the Wigner propagator, which resolves the return
//!   probability over phase space, and its classical Liouville counterpart
//!   ([`phase_space`]).
//!
//! The worked example is a harmonically driven quartic double well
//! ([`model`]), whose Floquet quasienergies move from Poisson-like to
//! chaotic statistics as the drive grows.

pub mod error;
pub mod floquet;
pub mod io;
pub mod model;
pub mod phase_space;
pub mod pipeline;
pub mod rmt;
pub mod stats;

pub use error::{Error, Result};
pub use floquet::{Grid, QuasiSpectrum, UnitaryPropagator};
pub use model::{Hamiltonian, HarmonicOscillator, ModelParams};
pub use phase_space::PhaseSpaceField;
pub use stats::{AlphaFit, DeltaSeries, FormFactor, PowerSpectrum, UnfoldedSpectrum};

pub use faer::c64;
