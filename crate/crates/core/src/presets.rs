//! Named parameter sets used by the command-line front end and the
//! regression suite: the simulation baseline and the published operating
//! points the toolkit reproduces.

use crate::budget::{CoilBudgetInputs, OdnmrBudgetInputs};
use crate::constants::{C13_DENSITY_PER_NM3, GAMMA_NUC_HZ_PER_T};
use crate::signal::{EnvelopeModel, RamseyModel};
use crate::spinpair::{ExperimentConditions, HyperfineCoupling};
use crate::sweepsim::{MapBaseline, SweepProtocol};

/// Simulation baseline: B0 = 10 mT, Rabi 100 kHz.
pub fn baseline_conditions() -> ExperimentConditions {
    ExperimentConditions::new(10e-3, 100e3).expect("baseline is valid")
}

/// Baseline secular couplings Azz = Azx = 30 kHz.
pub fn baseline_coupling() -> HyperfineCoupling {
    HyperfineCoupling::new(30e3, 30e3)
}

/// Baseline sweep: 9 MHz span in 1 ms (|rate| = 9 MHz/ms), 1 kHz steps,
/// centered on the NV transition.
pub fn baseline_sweep(cond: &ExperimentConditions) -> SweepProtocol {
    SweepProtocol::baseline(cond)
}

/// Baseline bundle for parameter maps.
pub fn baseline_map() -> MapBaseline {
    let cond = baseline_conditions();
    MapBaseline {
        sweep: baseline_sweep(&cond),
        hf: baseline_coupling(),
        cond,
    }
}

/// Interferogram operating point of the readout-validation dataset:
/// |A| = 0.21%, delta = 863 Hz, T2* = 1.74 ms, offset c = 0.02%.
pub fn ramsey_reference() -> RamseyModel {
    RamseyModel::new(0.21e-2, 863.0, 1.74e-3, 0.02e-2).expect("valid model")
}

/// Readout envelope of the nuclear spin-up branch under the pinned-stretch
/// fit: a = 1.08, T_e2 = 51.4 ms (gamma = 0.3).
pub fn envelope_up_reference() -> EnvelopeModel {
    let t = 51.4e-3 / 2f64.powf(1.0 / 0.3);
    EnvelopeModel::new(1.08, t, 0.3).expect("valid envelope")
}

/// Spin-down branch: a = 0.63, T_e2 = 72 ms (gamma = 0.3).
pub fn envelope_down_reference() -> EnvelopeModel {
    let t = 72e-3 / 2f64.powf(1.0 / 0.3);
    EnvelopeModel::new(0.63, t, 0.3).expect("valid envelope")
}

/// Polarization-buildup operating point: A_sat = 0.237%,
/// T_pol = 229 ms, beta = 0.5 (so T_p = T_pol / 4).
pub fn buildup_reference() -> (f64, f64, f64) {
    (0.237e-2, 229e-3 / 4.0, 0.5)
}

/// Buildup fit row at 12 mT with beta left free: A_sat = 0.237%,
/// T_pol = 226 ms, beta = 0.50.
pub fn buildup_12mt_row() -> (f64, f64, f64) {
    (0.237e-2, 226e-3 / 2f64.powf(1.0 / 0.50), 0.50)
}

/// Order-of-magnitude optical budget quoted in the outlook
/// ("paper-discussion-2025"): |A| = 3e-3, eta = 7e-3, N_nv = 1e14,
/// N_rep = 1e2, T2* = 2 ms, T_pol = T_read = 0.2 s, t = 1 s.
pub fn discussion_budget() -> OdnmrBudgetInputs {
    OdnmrBudgetInputs {
        visibility: 3e-3,
        photons_per_spin: 7e-3,
        n_nv: 1e14,
        n_rep: 1e2,
        t2_star_s: 2e-3,
        t_pol_s: 0.2,
        t_read_s: 0.2,
        total_time_s: 1.0,
    }
}

/// Name under which [`discussion_budget`] is exposed on the CLI.
pub const DISCUSSION_BUDGET_NAME: &str = "paper-discussion-2025";

/// Johnson-noise coil chain reference point: Q = 100, Tc = 300 K,
/// df = 1 Hz, B0 = 10 mT, 5% polarization of natural-abundance 13C.
pub fn coil_reference() -> CoilBudgetInputs {
    CoilBudgetInputs {
        geometry_factor: 1.0,
        fill_factor: 1.0,
        quality: 100.0,
        coil_temp_k: 300.0,
        bandwidth_hz: 1.0,
        b0_t: 10e-3,
        rho_nuc_per_m3: 0.05 * C13_DENSITY_PER_NM3 * 1e27,
        gamma_nuc_hz_per_t: GAMMA_NUC_HZ_PER_T,
        coil_volume_m3: 1e-8, // 10 mm^3; cancels out of the fidelity
    }
}
