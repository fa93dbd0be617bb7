//! Physical constants shared across the crate.
//!
//! Domain constants are quoted in the mixed units conventional for this
//! system (hertz, tesla, nanometers); fundamental constants are SI.

use std::f64::consts::PI;

/// NV axial zero-field splitting D (Hz).
pub const D_ZFS_HZ: f64 = 2.87e9;

/// NV electron gyromagnetic ratio (Hz/T).
pub const GAMMA_NV_HZ_PER_T: f64 = 28.03e9;

/// 13C nuclear gyromagnetic ratio (Hz/T).
pub const GAMMA_NUC_HZ_PER_T: f64 = 10.7e6;

/// Dipolar coupling coefficient k0 (Hz nm^3): A0 = k0 / r^3.
pub const K0_HZ_NM3: f64 = 19.9e3;

/// 13C number density in natural-abundance diamond (nm^-3).
pub const C13_DENSITY_PER_NM3: f64 = 1.9;

/// Vacuum permeability (T^2 m^3 / J).
pub const MU_0: f64 = 4.0e-7 * PI;

/// Planck constant (J/Hz).
pub const PLANCK_H: f64 = 6.62607015e-34;

/// Boltzmann constant (J/K).
pub const BOLTZMANN_KB: f64 = 1.380649e-23;
