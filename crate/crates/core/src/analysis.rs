//! Composed interferogram analysis: damped-cosine fit, offset removal,
//! phased spectrum, and Lorentzian lineshape fit.
//!
//! The constant interferogram offset (the persistent readout oscillation)
//! would otherwise place a window lobe at zero frequency; it is fitted
//! first and subtracted before the transform.

use crate::error::Result;
use crate::fitkit::{fit_damped_cosine, fit_lorentzian, FitResult};
use crate::signal::{nmr_spectrum, Interferogram, NmrSpectrum};

/// Results of the full interferogram -> spectrum chain.
#[derive(Debug, Clone)]
pub struct InterferogramAnalysis {
    /// Damped-cosine fit of the interferogram (with offset term).
    pub ramsey: FitResult,
    /// Phased spectrum of the offset-subtracted interferogram.
    pub spectrum: NmrSpectrum,
    /// Lorentzian fit over the spectral peak region.
    pub lorentzian: FitResult,
}

/// Default Lorentzian fit region, in peak half-widths.
pub const DEFAULT_PEAK_REGION: f64 = 4.0;

/// Fit, de-offset, transform, and fit the lineshape.
pub fn analyze_interferogram(
    interferogram: &Interferogram,
    region_halfwidths: f64,
) -> Result<InterferogramAnalysis> {
    let ramsey = fit_damped_cosine(&interferogram.tau_s, &interferogram.amplitude, true)?;
    let offset = ramsey.value("offset").unwrap_or(0.0);
    let centered = Interferogram {
        tau_s: interferogram.tau_s.clone(),
        amplitude: interferogram
            .amplitude
            .iter()
            .map(|&a| a - offset)
            .collect(),
    };
    let spectrum = nmr_spectrum(&centered)?;
    let region = spectrum.peak_region(region_halfwidths);
    let lorentzian = fit_lorentzian(
        &spectrum.frequencies_hz[region.clone()],
        &spectrum.real[region],
    )?;
    Ok(InterferogramAnalysis {
        ramsey,
        spectrum,
        lorentzian,
    })
}
