//! Numerical laboratory for NV-center-detected carbon-13 NMR.
//!
//! The crate covers the full chain from microscopic spin dynamics to
//! sensitivity estimates:
//!
//! - [`spinpair`]: the rotating-frame Hamiltonian of a driven NV electron
//!   spin coupled to a single 13C nucleus, its dressed-state spectrum, and
//!   avoided-crossing gaps.
//! - [`sweepsim`]: stepped-unitary propagation through microwave frequency
//!   sweeps, diabatic hopping probabilities, and 1D/2D parameter maps.
//! - [`ensemble`]: Monte-Carlo sampling of the 13C bath around an NV center
//!   and the analytic hyperfine shell distribution.
//! - [`signal`]: synthesis and Fourier processing of optically detected
//!   readout traces, Ramsey interferograms, and NMR spectra.
//! - [`fitkit`]: damped Gauss-Newton least squares with the model family
//!   used for readout envelopes, interferograms, lineshapes, and
//!   polarization buildup.
//! - [`budget`]: frequency-precision, readout-fidelity, duty-cycle, and
//!   inductive-detection (Johnson-noise) sensitivity calculators.
//!
//! All frequencies are plain cyclic frequencies in hertz; the factor of
//! 2*pi enters only in propagator phases and in formulas that carry it
//! explicitly. Magnetic fields are tesla, times are seconds, lengths are
//! nanometers where noted.

pub mod analysis;
pub mod budget;
pub mod constants;
pub mod ensemble;
pub mod error;
pub mod fitkit;
pub mod presets;
pub mod signal;
pub mod spinpair;
pub mod sweepsim;

pub use error::{CoreError, Result};
pub use spinpair::{
    build_hamiltonian, dressed_states, BareState, DressedLabel, DressedSpectrum,
    ExperimentConditions, HyperfineCoupling, RotatingFrameHamiltonian,
};
pub use sweepsim::{
    analytic_hop_probability, hop_probability, propagate_sweep, HopPair, QuantumState,
    SweepDirection, SweepProtocol, SweepTrajectory,
};
