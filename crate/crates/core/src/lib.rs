//! Forward models and a damped least-squares engine for microwave and optical
//! spectroscopy of rare-earth spin ensembles.
//!
//! The crate is organised by physical subsystem:
//!
//! * [`anisotropy`]: effective g-factors, resonance fields and angle maps for
//!   anisotropic Kramers doublets in a thin film.
//! * [`resonator`]: superconducting resonator transmission, spin-induced
//!   linewidth/frequency shifts, TLS loss and spin-density bookkeeping.
//! * [`coherence`]: spin echo decays, spectral diffusion, thermal models,
//!   instantaneous diffusion and magnetic-noise budgets.
//! * [`optical`]: Purcell enhancement, mode volume, single-ion coupling and
//!   optical linewidth models.
//! * [`fit`]: Levenberg-Marquardt fitting with bounds, finite-difference
//!   Jacobians and covariance estimation, plus ready-made models.
//! * [`signal`]: quadrature echo traces and FFT band integration.
//!
//! All quantities are SI unless a function name or field says otherwise
//! (angles at the API boundary are in degrees).

pub mod anisotropy;
pub mod coherence;
pub mod constants;
mod error;
pub mod fit;
pub mod optical;
pub mod quadrature;
pub mod resonator;
pub mod signal;

pub use error::{Error, Result};
