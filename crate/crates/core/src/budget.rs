//! Sensitivity and readout-fidelity calculators: frequency precision with
//! duty cycle, fidelity chain, angle random walk, combined dephasing, and
//! the Johnson-noise-limited inductive detection chain.
//!
//! All quantities are SI internally (hertz, seconds, tesla, kelvin, m^-3).

use std::f64::consts::PI;

use serde::Serialize;

use crate::constants::{BOLTZMANN_KB, MU_0, PLANCK_H};
use crate::error::{CoreError, Result};

fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CoreError::InvalidParameter {
            name,
            message: format!("must be positive and finite, got {value}"),
        })
    }
}

/// Minimum detectable change in spin precession frequency (Hz):
/// `1 / (2 pi F sqrt(N_p T2* xi t))`.
pub fn frequency_precision(
    fidelity: f64,
    n_polarized: f64,
    t2_star_s: f64,
    duty: f64,
    total_time_s: f64,
) -> Result<f64> {
    require_positive("fidelity", fidelity)?;
    require_positive("n_polarized", n_polarized)?;
    require_positive("t2_star_s", t2_star_s)?;
    require_positive("duty", duty)?;
    require_positive("total_time_s", total_time_s)?;
    Ok(1.0 / (2.0 * PI * fidelity * (n_polarized * t2_star_s * duty * total_time_s).sqrt()))
}

/// Photon-shot-noise readout fidelity `|A| sqrt(eta)`.
pub fn odnmr_fidelity(visibility: f64, photons_per_spin: f64) -> f64 {
    visibility.abs() * photons_per_spin.max(0.0).sqrt()
}

/// Sensing duty cycle `T2* / (T_pol + T_read)`.
pub fn duty_cycle(t2_star_s: f64, t_pol_s: f64, t_read_s: f64) -> Result<f64> {
    require_positive("t2_star_s", t2_star_s)?;
    if !(t_pol_s + t_read_s > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "t_pol_s + t_read_s",
            message: "polarization plus readout time must be positive".into(),
        });
    }
    Ok(t2_star_s / (t_pol_s + t_read_s))
}

/// Number of polarized nuclear spins interrogated, `N_rep * N_nv`.
pub fn polarized_spin_count(n_nv: f64, n_rep: f64) -> f64 {
    n_nv * n_rep
}

/// Gyroscope angle random walk (degrees per sqrt-second):
/// `360 * delta_f * sqrt(t)`.
pub fn angle_random_walk(delta_f_hz: f64, total_time_s: f64) -> f64 {
    360.0 * delta_f_hz * total_time_s.max(0.0).sqrt()
}

/// Harmonic combination of dephasing times, `(sum 1/T_i)^-1`.
/// Infinite entries drop out.
pub fn combined_dephasing(times_s: &[f64]) -> Result<f64> {
    if times_s.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "times_s",
            message: "need at least one dephasing time".into(),
        });
    }
    let mut rate = 0.0;
    for &t in times_s {
        if !(t > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "times_s",
                message: format!("dephasing times must be positive, got {t}"),
            });
        }
        if t.is_finite() {
            rate += 1.0 / t;
        }
    }
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / rate)
}

/// Inputs for the Johnson-noise-limited inductive detection chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoilBudgetInputs {
    /// Coil geometry factor K.
    pub geometry_factor: f64,
    /// Fill factor epsilon.
    pub fill_factor: f64,
    /// Resonator quality factor Q.
    pub quality: f64,
    /// Coil temperature (K).
    pub coil_temp_k: f64,
    /// Acquisition bandwidth (Hz).
    pub bandwidth_hz: f64,
    /// Static field (T).
    pub b0_t: f64,
    /// Polarized nuclear spin density (m^-3).
    pub rho_nuc_per_m3: f64,
    /// Nuclear gyromagnetic ratio (Hz/T).
    pub gamma_nuc_hz_per_t: f64,
    /// Coil volume (m^3); enters the SNR but cancels in the fidelity.
    pub coil_volume_m3: f64,
}

impl CoilBudgetInputs {
    fn validate(&self) -> Result<()> {
        require_positive("quality", self.quality)?;
        require_positive("coil_temp_k", self.coil_temp_k)?;
        require_positive("bandwidth_hz", self.bandwidth_hz)?;
        require_positive("b0_t", self.b0_t)?;
        require_positive("rho_nuc_per_m3", self.rho_nuc_per_m3)?;
        require_positive("gamma_nuc_hz_per_t", self.gamma_nuc_hz_per_t)?;
        require_positive("coil_volume_m3", self.coil_volume_m3)?;
        require_positive("geometry_factor", self.geometry_factor)?;
        require_positive("fill_factor", self.fill_factor)?;
        Ok(())
    }
}

/// Sample magnetization `M0 = rho gamma h / 2` (A/m for rho in m^-3).
pub fn coil_magnetization(rho_nuc_per_m3: f64, gamma_nuc_hz_per_t: f64) -> f64 {
    rho_nuc_per_m3 * gamma_nuc_hz_per_t * PLANCK_H / 2.0
}

/// Johnson-noise-limited SNR of inductive NMR detection:
/// `K e M0 sqrt(pi mu0 Q gamma B0 Vc / (2 kB Tc df))`.
pub fn coil_snr(inputs: &CoilBudgetInputs) -> Result<f64> {
    inputs.validate()?;
    let m0 = coil_magnetization(inputs.rho_nuc_per_m3, inputs.gamma_nuc_hz_per_t);
    let arg = PI * MU_0 * inputs.quality * inputs.gamma_nuc_hz_per_t * inputs.b0_t
        * inputs.coil_volume_m3
        / (2.0 * BOLTZMANN_KB * inputs.coil_temp_k * inputs.bandwidth_hz);
    Ok(inputs.geometry_factor * inputs.fill_factor * m0 * arg.sqrt())
}

/// Frequency precision of coil detection, `1 / (2 pi T2* SNR)`.
pub fn coil_precision(snr: f64, t2_star_s: f64) -> Result<f64> {
    require_positive("snr", snr)?;
    require_positive("t2_star_s", t2_star_s)?;
    Ok(1.0 / (2.0 * PI * t2_star_s * snr))
}

/// Johnson-noise-limited readout fidelity,
/// `sqrt(pi mu0 Q rho gamma^3 B0 h^2 / (8 kB Tc df))`; the coil volume
/// cancels out of this expression.
pub fn coil_fidelity(inputs: &CoilBudgetInputs) -> Result<f64> {
    inputs.validate()?;
    let g = inputs.gamma_nuc_hz_per_t;
    let arg = PI * MU_0 * inputs.quality * inputs.rho_nuc_per_m3 * g * g * g * inputs.b0_t
        * PLANCK_H
        * PLANCK_H
        / (8.0 * BOLTZMANN_KB * inputs.coil_temp_k * inputs.bandwidth_hz);
    Ok(arg.sqrt())
}

/// Inputs for the optical-readout sensitivity budget.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OdnmrBudgetInputs {
    /// Readout visibility |A| (fractional).
    pub visibility: f64,
    /// Photons detected per nuclear spin per readout.
    pub photons_per_spin: f64,
    /// Number of interrogated NV centers.
    pub n_nv: f64,
    /// Number of repetitive readouts per detection phase.
    pub n_rep: f64,
    /// Nuclear dephasing time (s).
    pub t2_star_s: f64,
    /// Polarization time (s).
    pub t_pol_s: f64,
    /// Readout time (s).
    pub t_read_s: f64,
    /// Total measurement time (s).
    pub total_time_s: f64,
}

/// Full budget report: inputs echoed, intermediates, and outputs.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    pub inputs: OdnmrBudgetInputs,
    /// Sensing duty cycle xi.
    pub duty_cycle: f64,
    /// Polarized spin count N_p.
    pub n_polarized: f64,
    /// Readout fidelity F = |A| sqrt(eta).
    pub fidelity: f64,
    /// Minimum detectable frequency change (Hz).
    pub delta_f_hz: f64,
    /// Angle random walk (deg / sqrt(s)).
    pub arw_deg_per_sqrt_s: f64,
}

impl BudgetReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("budget report serializes")
    }
}

/// Evaluate the optical-readout budget chain.
pub fn odnmr_budget(inputs: &OdnmrBudgetInputs) -> Result<BudgetReport> {
    let duty = duty_cycle(inputs.t2_star_s, inputs.t_pol_s, inputs.t_read_s)?;
    let n_p = polarized_spin_count(inputs.n_nv, inputs.n_rep);
    let fidelity = odnmr_fidelity(inputs.visibility, inputs.photons_per_spin);
    let delta_f = frequency_precision(fidelity, n_p, inputs.t2_star_s, duty, inputs.total_time_s)?;
    Ok(BudgetReport {
        inputs: *inputs,
        duty_cycle: duty,
        n_polarized: n_p,
        fidelity,
        delta_f_hz: delta_f,
        arw_deg_per_sqrt_s: angle_random_walk(delta_f, inputs.total_time_s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn frequency_precision_reference_point() {
        let df = frequency_precision(2.5e-4, 1e16, 2e-3, 5e-3, 1.0).unwrap();
        assert_relative_eq!(df, 2.013e-3, max_relative = 2e-3);
        // sqrt(t) law: quadrupling t halves the precision
        let df4 = frequency_precision(2.5e-4, 1e16, 2e-3, 5e-3, 4.0).unwrap();
        assert_relative_eq!(df4, df / 2.0, max_relative = 1e-12);
        // with xi = 1 and t = T2* the duty-cycle form reduces to the
        // spin-projection expression
        let reduced = frequency_precision(2.5e-4, 1e16, 2e-3, 1.0, 2e-3).unwrap();
        assert_relative_eq!(
            reduced,
            1.0 / (2.0 * PI * 2.5e-4 * (1e16_f64 * 2e-3 * 2e-3).sqrt()),
            max_relative = 1e-12
        );
        assert!(frequency_precision(0.0, 1e16, 2e-3, 1.0, 1.0).is_err());
    }

    #[test]
    fn fidelity_chain_values() {
        let f = odnmr_fidelity(3e-3, 7e-3);
        assert_relative_eq!(f, 2.51e-4, max_relative = 2e-3);
        assert_eq!(odnmr_fidelity(3e-3, 1.0), 3e-3);
        assert_eq!(odnmr_fidelity(3e-3, 0.0), 0.0);

        assert_relative_eq!(duty_cycle(2e-3, 0.2, 0.2).unwrap(), 5e-3, max_relative = 1e-12);
        assert_relative_eq!(duty_cycle(1e-3, 1e-3, 0.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(polarized_spin_count(1e14, 1e2), 1e16);
    }

    #[test]
    fn angle_random_walk_values() {
        assert_relative_eq!(angle_random_walk(2.0e-3, 1.0), 0.72, max_relative = 1e-12);
        assert_eq!(angle_random_walk(0.0, 1.0), 0.0);
        assert_relative_eq!(
            angle_random_walk(3.0 * 2.0e-3, 1.0),
            3.0 * angle_random_walk(2.0e-3, 1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn combined_dephasing_values() {
        let t = combined_dephasing(&[3e-3, 2.5e-3]).unwrap();
        assert_relative_eq!(t, 1.3636e-3, max_relative = 1e-3);
        assert_relative_eq!(combined_dephasing(&[7e-3]).unwrap(), 7e-3, max_relative = 1e-12);
        assert_relative_eq!(
            combined_dephasing(&[3e-3, f64::INFINITY]).unwrap(),
            3e-3,
            max_relative = 1e-12
        );
        assert!(combined_dephasing(&[]).is_err());
        assert!(combined_dephasing(&[1e-3, -2e-3]).is_err());
    }

    #[test]
    fn coil_chain_reference_points() {
        let coil = presets::coil_reference();
        let f = coil_fidelity(&coil).unwrap();
        assert_relative_eq!(f, 2.47e-3, max_relative = 1e-2);

        // thermal polarization of natural-abundance 13C at 10 mT, 300 K
        let f_n = coil.gamma_nuc_hz_per_t * coil.b0_t;
        let thermal = (PLANCK_H * f_n / (2.0 * BOLTZMANN_KB * coil.coil_temp_k)).tanh();
        let mut low = coil;
        low.rho_nuc_per_m3 = 1.9e27 * thermal;
        let f_thermal = coil_fidelity(&low).unwrap();
        assert!(f_thermal > 0.5e-6 && f_thermal < 2e-6, "{f_thermal}");

        // fully polarized, isotopically pure 13C
        let mut high = coil;
        high.rho_nuc_per_m3 = 1.9e27 / 0.011;
        let f_max = coil_fidelity(&high).unwrap();
        assert!(f_max > 0.05 && f_max < 0.2, "{f_max}");

        // fidelity scales as sqrt(rho) and sqrt(B0)
        let mut q = coil;
        q.rho_nuc_per_m3 *= 4.0;
        assert_relative_eq!(coil_fidelity(&q).unwrap(), 2.0 * f, max_relative = 1e-12);
        let mut b = coil;
        b.b0_t *= 4.0;
        assert_relative_eq!(coil_fidelity(&b).unwrap(), 2.0 * f, max_relative = 1e-12);
    }

    #[test]
    fn coil_fidelity_is_snr_per_sqrt_spin() {
        // F = SNR / sqrt(N_p) with N_p the polarized spins in the coil
        // volume, and the duty-free precision matches Appendix-style
        // 1/(2 pi T2* SNR) exactly.
        let coil = presets::coil_reference();
        let snr = coil_snr(&coil).unwrap();
        let n_p = coil.rho_nuc_per_m3 * coil.coil_volume_m3;
        assert_relative_eq!(
            coil_fidelity(&coil).unwrap(),
            snr / n_p.sqrt(),
            max_relative = 1e-12
        );
        let t2 = 3e-3;
        assert_relative_eq!(
            frequency_precision(snr / n_p.sqrt(), n_p, t2, 1.0, t2).unwrap(),
            coil_precision(snr, t2).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn budget_report_reproduces_the_discussion_chain() {
        let report = odnmr_budget(&presets::discussion_budget()).unwrap();
        assert_relative_eq!(report.duty_cycle, 5e-3, max_relative = 1e-12);
        assert_eq!(report.n_polarized, 1e16);
        assert_relative_eq!(report.fidelity, 2.51e-4, max_relative = 2e-3);
        assert_relative_eq!(report.delta_f_hz, 2.0e-3, max_relative = 1e-2);
        assert_relative_eq!(report.arw_deg_per_sqrt_s, 0.72, max_relative = 1e-2);

        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(json["inputs"]["visibility"].is_number());
        assert!(json["delta_f_hz"].is_number());
    }

    #[test]
    fn precision_is_monotone_in_every_input() {
        let base = (2.5e-4, 1e16, 2e-3, 5e-3, 1.0);
        let df = |f: f64, n: f64, t2: f64, xi: f64, t: f64| {
            frequency_precision(f, n, t2, xi, t).unwrap()
        };
        let reference = df(base.0, base.1, base.2, base.3, base.4);
        for scale in [1.5, 3.0, 10.0] {
            assert!(df(base.0 * scale, base.1, base.2, base.3, base.4) < reference);
            assert!(df(base.0, base.1 * scale, base.2, base.3, base.4) < reference);
            assert!(df(base.0, base.1, base.2 * scale, base.3, base.4) < reference);
            assert!(df(base.0, base.1, base.2, base.3 * scale, base.4) < reference);
            assert!(df(base.0, base.1, base.2, base.3, base.4 * scale) < reference);
        }
    }

    /// Minimal dimensional bookkeeping: SI base exponents (m, kg, s, A, K).
    #[derive(Debug, Clone, Copy, PartialEq)]
    struct Quantity {
        value: f64,
        dim: [i32; 5],
    }

    impl Quantity {
        fn new(value: f64, dim: [i32; 5]) -> Self {
            Self { value, dim }
        }

        fn scalar(value: f64) -> Self {
            Self::new(value, [0; 5])
        }

        fn mul(self, other: Self) -> Self {
            let mut dim = self.dim;
            for (d, o) in dim.iter_mut().zip(other.dim) {
                *d += o;
            }
            Self::new(self.value * other.value, dim)
        }

        fn div(self, other: Self) -> Self {
            let mut dim = self.dim;
            for (d, o) in dim.iter_mut().zip(other.dim) {
                *d -= o;
            }
            Self::new(self.value / other.value, dim)
        }

        fn sqrt(self) -> Self {
            let mut dim = self.dim;
            for d in dim.iter_mut() {
                assert!(*d % 2 == 0, "odd exponent under sqrt: {:?}", self.dim);
                *d /= 2;
            }
            Self::new(self.value.sqrt(), dim)
        }
    }

    const HZ: [i32; 5] = [0, 0, -1, 0, 0];
    const S: [i32; 5] = [0, 0, 1, 0, 0];
    const T: [i32; 5] = [0, 1, -2, -1, 0]; // kg s^-2 A^-1
    const K: [i32; 5] = [0, 0, 0, 0, 1];
    const M3: [i32; 5] = [3, 0, 0, 0, 0];
    const J: [i32; 5] = [2, 1, -2, 0, 0];

    #[test]
    fn formulas_are_dimensionally_consistent() {
        // delta_f = 1 / (2 pi F sqrt(N T2* xi t)) -> the sqrt argument is
        // seconds^2 only through T2* * t; xi, N, F dimensionless.
        let fidelity = Quantity::scalar(2.5e-4);
        let n = Quantity::scalar(1e16);
        let t2 = Quantity::new(2e-3, S);
        let xi = Quantity::scalar(5e-3);
        let t = Quantity::new(1.0, S);
        let arg = n.mul(t2).mul(xi).mul(t);
        assert_eq!(arg.dim, [0, 0, 2, 0, 0]);
        let df = Quantity::scalar(1.0 / (2.0 * PI)).div(fidelity.mul(arg.sqrt()));
        assert_eq!(df.dim, HZ);
        assert_relative_eq!(
            df.value,
            frequency_precision(2.5e-4, 1e16, 2e-3, 5e-3, 1.0).unwrap(),
            max_relative = 1e-12
        );

        // coil SNR: K e M0 sqrt(pi mu0 Q gamma B0 Vc / (2 kB Tc df))
        let coil = presets::coil_reference();
        let gamma = Quantity::new(coil.gamma_nuc_hz_per_t, sub(HZ, T)); // Hz/T
        let h = Quantity::new(PLANCK_H, add(J, S));
        let m0 = Quantity::new(coil.rho_nuc_per_m3, neg(M3))
            .mul(gamma)
            .mul(h)
            .mul(Quantity::scalar(0.5));
        // A/m
        assert_eq!(m0.dim, [-1, 0, 0, 1, 0]);
        let mu0 = Quantity::new(crate::constants::MU_0, sub(sub(add(T, T), neg(M3)), J)); // T^2 m^3 / J
        let num = Quantity::scalar(PI)
            .mul(mu0)
            .mul(Quantity::scalar(coil.quality))
            .mul(gamma)
            .mul(Quantity::new(coil.b0_t, T))
            .mul(Quantity::new(coil.coil_volume_m3, M3));
        let den = Quantity::scalar(2.0)
            .mul(Quantity::new(BOLTZMANN_KB, sub(J, K)))
            .mul(Quantity::new(coil.coil_temp_k, K))
            .mul(Quantity::new(coil.bandwidth_hz, HZ));
        let snr = m0.mul(num.div(den).sqrt());
        assert_eq!(snr.dim, [0; 5], "SNR must be dimensionless");
        assert_relative_eq!(snr.value, coil_snr(&coil).unwrap(), max_relative = 1e-12);
    }

    fn add(a: [i32; 5], b: [i32; 5]) -> [i32; 5] {
        let mut out = a;
        for (o, bv) in out.iter_mut().zip(b) {
            *o += bv;
        }
        out
    }

    fn sub(a: [i32; 5], b: [i32; 5]) -> [i32; 5] {
        let mut out = a;
        for (o, bv) in out.iter_mut().zip(b) {
            *o -= bv;
        }
        out
    }

    fn neg(a: [i32; 5]) -> [i32; 5] {
        let mut out = a;
        for o in out.iter_mut() {
            *o = -*o;
        }
        out
    }
}
