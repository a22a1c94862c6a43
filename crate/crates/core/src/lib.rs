//! Interferometric error filtration for bosonic dephasing channels.
//!
//! A photon (or a coherent pulse) is spread over `N` optical lines by an
//! `N`-port interferometer, each line suffers independent random phase
//! noise, and the inverse interferometer recombines them. The surviving
//! signal sees the *average* of `N` phase factors, so its effective
//! dephasing is suppressed.
//!
//! The crate provides:
//!
//! * [`phase_noise`]: phase-noise laws, the dephasing parameter κ and
//!   reproducible sampling.
//! * [`fock1`]: density matrices on the ≤1-photon sector of `M` modes and the
//!   channels acting on them.
//! * [`interferometers`]: Fourier, even-splitter cascade and perturbed cascade
//!   unitaries.
//! * [`filtration`]: single-rail and symmetric filtration protocols, closed
//!   forms and simulations.
//! * [`coherent`]: coherent-state fidelity by quadrature or Monte Carlo.
//! * [`qfi`]: quantum Fisher information, SLDs and the closed-form QFIs.
//! * [`stellar`]: the two-telescope pipeline feeding [`qfi`].
//! * [`cli`]: the batch front end behind the `errfilt` binary.

pub mod cli;
pub mod coherent;
mod error;
pub mod filtration;
pub mod fock1;
pub mod interferometers;
pub mod phase_noise;
pub mod qfi;
mod quad;
pub mod stellar;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix used for states, unitaries and derivatives.
pub type CMatrix = nalgebra::DMatrix<C64>;
