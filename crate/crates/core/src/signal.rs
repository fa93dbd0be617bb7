//! Synthetic optically detected readout traces and the Fourier processing
//! chain that turns them into Ramsey interferograms and NMR spectra.
//!
//! A readout trace alternates sign every sample (one microwave sweep per
//! laser pulse, alternating sweep direction), so the nuclear-polarization
//! signal lives at the Nyquist frequency of the pulse train. Amplitude
//! extraction takes the real part of the DFT at that bin over a fixed
//! window, retaining sign.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::ensemble::split_seed;
use crate::error::{CoreError, Result};

/// Fluorescence contrast samples, one per laser pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutTrace {
    /// Sample spacing (s); one sweep segment per sample.
    pub dt_s: f64,
    /// Fractional fluorescence change per pulse.
    pub values: Vec<f64>,
}

impl ReadoutTrace {
    pub fn duration(&self) -> f64 {
        self.dt_s * self.values.len() as f64
    }
}

/// Stretched-exponential envelope of the readout oscillation:
/// `a exp(-(t/T)^gamma)` plus a persistent alternating oscillation `c` and
/// an optional fit-only baseline `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeModel {
    /// Initial amplitude a.
    pub amplitude: f64,
    /// Characteristic decay time T (s).
    pub decay_time_s: f64,
    /// Stretch exponent gamma in (0, 2].
    pub stretch: f64,
    /// Persistent-oscillation amplitude c.
    pub offset_oscillation: f64,
    /// Vertical offset d; used only by the three-parameter fit variant.
    pub baseline: f64,
}

impl EnvelopeModel {
    pub fn new(amplitude: f64, decay_time_s: f64, stretch: f64) -> Result<Self> {
        if !(decay_time_s > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "decay_time_s",
                message: format!("decay time must be positive, got {decay_time_s}"),
            });
        }
        if !(stretch > 0.0 && stretch <= 2.0) {
            return Err(CoreError::InvalidParameter {
                name: "stretch",
                message: format!("stretch must lie in (0, 2], got {stretch}"),
            });
        }
        Ok(Self {
            amplitude,
            decay_time_s,
            stretch,
            offset_oscillation: 0.0,
            baseline: 0.0,
        })
    }

    pub fn with_offset_oscillation(mut self, c: f64) -> Self {
        self.offset_oscillation = c;
        self
    }

    /// 1/e^2 decay time, `2^(1/gamma) T`.
    pub fn t_e2(&self) -> f64 {
        2f64.powf(1.0 / self.stretch) * self.decay_time_s
    }

    /// Envelope value at time t (without oscillation terms).
    pub fn evaluate(&self, t_s: f64) -> f64 {
        self.amplitude * (-(t_s / self.decay_time_s).powf(self.stretch)).exp() + self.baseline
    }
}

/// Sampling and noise configuration for trace synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    /// Sample spacing (s).
    pub dt_s: f64,
    /// Number of laser pulses in the trace.
    pub n_samples: usize,
    /// Additive white Gaussian noise per sample.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for TraceConfig {
    /// 0.4 s detection phase sampled every 1 ms, noiseless.
    fn default() -> Self {
        Self {
            dt_s: 1e-3,
            n_samples: 400,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Forward-model a detection-phase trace for nuclear polarization `iz`:
///
/// `value[n] = (-1)^n (iz a exp(-(n dt / T)^gamma) + c) + noise`.
pub fn synthesize_readout_trace(
    iz: f64,
    env: &EnvelopeModel,
    config: &TraceConfig,
) -> Result<ReadoutTrace> {
    if !(-1.0..=1.0).contains(&iz) {
        return Err(CoreError::InvalidParameter {
            name: "iz",
            message: format!("nuclear polarization must lie in [-1, 1], got {iz}"),
        });
    }
    if config.n_samples == 0 || !(config.dt_s > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "config",
            message: "need n_samples > 0 and dt_s > 0".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).map_err(|e| CoreError::InvalidParameter {
            name: "noise_sigma",
            message: e.to_string(),
        })?)
    } else {
        None
    };

    let mut values = Vec::with_capacity(config.n_samples);
    for n in 0..config.n_samples {
        let t = n as f64 * config.dt_s;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let decay = (-(t / env.decay_time_s).powf(env.stretch)).exp();
        let mut v = sign * (iz * env.amplitude * decay + env.offset_oscillation);
        if let Some(dist) = &noise {
            v += dist.sample(&mut rng);
        }
        values.push(v);
    }
    Ok(ReadoutTrace {
        dt_s: config.dt_s,
        values,
    })
}

/// Add seeded white Gaussian noise to a sample vector in place.
pub fn add_gaussian_noise(values: &mut [f64], sigma: f64, seed: u64) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| CoreError::InvalidParameter {
        name: "sigma",
        message: e.to_string(),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in values.iter_mut() {
        *v += dist.sample(&mut rng);
    }
    Ok(())
}

/// Remove the persistent alternating oscillation of amplitude `c`.
pub fn subtract_offset_oscillation(trace: &ReadoutTrace, c: f64) -> ReadoutTrace {
    let values = trace
        .values
        .iter()
        .enumerate()
        .map(|(n, &v)| if n % 2 == 0 { v - c } else { v + c })
        .collect();
    ReadoutTrace {
        dt_s: trace.dt_s,
        values,
    }
}

/// Envelope of the readout oscillation: every other sample (the even
/// ones), absolute value. Returns (times, magnitudes).
pub fn extract_envelope(trace: &ReadoutTrace) -> Result<(Vec<f64>, Vec<f64>)> {
    if trace.values.len() < 4 {
        return Err(CoreError::InvalidParameter {
            name: "trace",
            message: format!("need at least 4 samples, got {}", trace.values.len()),
        });
    }
    let times = (0..trace.values.len())
        .step_by(2)
        .map(|n| n as f64 * trace.dt_s)
        .collect();
    let magnitudes = trace.values.iter().step_by(2).map(|v| v.abs()).collect();
    Ok((times, magnitudes))
}

/// Signed oscillation amplitude of the first `window_s` of the trace: the
/// real part of the DFT at the alternation (Nyquist) bin, normalized so a
/// pure tone `(-1)^n a` maps to `a`.
pub fn extract_amplitude(trace: &ReadoutTrace, window_s: f64) -> Result<f64> {
    let mut w = (window_s / trace.dt_s + 1e-9).floor() as usize;
    w -= w % 2; // the Nyquist bin only exists for an even sample count
    if w < 4 {
        return Err(CoreError::InvalidParameter {
            name: "window_s",
            message: format!("window holds fewer than 4 samples ({w})"),
        });
    }
    if w > trace.values.len() {
        return Err(CoreError::InvalidParameter {
            name: "window_s",
            message: format!(
                "window of {w} samples exceeds trace length {}",
                trace.values.len()
            ),
        });
    }
    let sum: f64 = trace.values[..w]
        .iter()
        .enumerate()
        .map(|(n, &v)| if n % 2 == 0 { v } else { -v })
        .sum();
    Ok(sum / w as f64)
}

/// Default amplitude-extraction window (s).
pub const DEFAULT_WINDOW_S: f64 = 0.060;

/// Damped-cosine interferogram model `A cos(2 pi delta tau) exp(-tau/T2*) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyModel {
    /// Visibility A (signed; |A| is the readout visibility).
    pub visibility: f64,
    /// RF detuning delta (Hz).
    pub detuning_hz: f64,
    /// Nuclear dephasing time T2* (s).
    pub t2_star_s: f64,
    /// Vertical offset from the persistent oscillation.
    pub offset: f64,
}

impl RamseyModel {
    pub fn new(visibility: f64, detuning_hz: f64, t2_star_s: f64, offset: f64) -> Result<Self> {
        if !(t2_star_s > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "t2_star_s",
                message: format!("T2* must be positive, got {t2_star_s}"),
            });
        }
        Ok(Self {
            visibility,
            detuning_hz,
            t2_star_s,
            offset,
        })
    }

    pub fn evaluate(&self, tau_s: f64) -> f64 {
        self.visibility * (2.0 * PI * self.detuning_hz * tau_s).cos() * (-tau_s / self.t2_star_s).exp()
            + self.offset
    }
}

/// Amplitude `a` that makes a synthesized trace extract to exactly
/// `target_visibility` through the given window: the window-averaged
/// envelope is divided out.
pub fn calibrate_trace_amplitude(
    shape: &EnvelopeModel,
    config: &TraceConfig,
    window_s: f64,
    target_visibility: f64,
) -> Result<f64> {
    let mut w = (window_s / config.dt_s + 1e-9).floor() as usize;
    w -= w % 2;
    if w < 4 || w > config.n_samples {
        return Err(CoreError::InvalidParameter {
            name: "window_s",
            message: "window must hold 4..=n_samples samples".into(),
        });
    }
    let mean: f64 = (0..w)
        .map(|n| {
            let t = n as f64 * config.dt_s;
            (-(t / shape.decay_time_s).powf(shape.stretch)).exp()
        })
        .sum::<f64>()
        / w as f64;
    Ok(target_visibility / mean)
}

/// Per-point trace synthesis settings for interferogram assembly.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisConfig {
    /// Envelope shape (T, gamma); the amplitude is recalibrated so that
    /// extraction reproduces the model visibility.
    pub shape: EnvelopeModel,
    pub trace: TraceConfig,
    /// Extraction window (s).
    pub window_s: f64,
}

/// How interferogram points are produced.
#[derive(Debug, Clone, Copy)]
pub enum InterferogramMode {
    /// Evaluate the damped cosine directly.
    Analytic,
    /// Synthesize a full readout trace per point and extract its amplitude.
    Synthesis(SynthesisConfig),
}

/// A Ramsey interferogram: extracted amplitude versus free-precession time.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    pub tau_s: Vec<f64>,
    pub amplitude: Vec<f64>,
}

/// Assemble an interferogram over `tau_grid`.
///
/// In synthesis mode each point gets its own trace with nuclear
/// polarization `cos(2 pi delta tau) exp(-tau/T2*)` and a per-point seed
/// split from the config seed; the persistent oscillation is carried as a
/// constant-amplitude alternating tone and surfaces as the vertical offset.
pub fn ramsey_interferogram(
    tau_grid: &[f64],
    model: &RamseyModel,
    mode: &InterferogramMode,
) -> Result<Interferogram> {
    if tau_grid.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "tau_grid",
            message: "tau grid must be non-empty".into(),
        });
    }
    let amplitude = match mode {
        InterferogramMode::Analytic => tau_grid.iter().map(|&t| model.evaluate(t)).collect(),
        InterferogramMode::Synthesis(cfg) => {
            let a_cal =
                calibrate_trace_amplitude(&cfg.shape, &cfg.trace, cfg.window_s, model.visibility)?;
            let points: Result<Vec<f64>> = tau_grid
                .par_iter()
                .enumerate()
                .map(|(i, &tau)| {
                    let iz = (2.0 * PI * model.detuning_hz * tau).cos()
                        * (-tau / model.t2_star_s).exp();
                    let env = EnvelopeModel {
                        amplitude: a_cal,
                        offset_oscillation: model.offset,
                        ..cfg.shape
                    };
                    let mut trace_cfg = cfg.trace;
                    trace_cfg.seed = split_seed(cfg.trace.seed, i as u64);
                    let trace = synthesize_readout_trace(iz, &env, &trace_cfg)?;
                    extract_amplitude(&trace, cfg.window_s)
                })
                .collect();
            points?
        }
    };
    Ok(Interferogram {
        tau_s: tau_grid.to_vec(),
        amplitude,
    })
}

/// Plain DFT, `X[k] = sum_n x[n] exp(-2 pi i k n / N)`.
pub(crate) fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, &v) in x.iter().enumerate() {
                let phase = -2.0 * PI * (k * idx) as f64 / n as f64;
                acc += v * Complex64::new(phase.cos(), phase.sin());
            }
            acc
        })
        .collect()
}

/// Zero-padding factor applied before the spectrum DFT.
const SPECTRUM_PAD: usize = 4;

/// Phased one-sided NMR spectrum of a Ramsey interferogram.
#[derive(Debug, Clone)]
pub struct NmrSpectrum {
    /// Frequency axis (Hz), relative to the RF carrier.
    pub frequencies_hz: Vec<f64>,
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
    /// Zeroth-order phase applied (rad).
    pub phase_rad: f64,
    /// Frequency of the peak bin (Hz).
    pub peak_frequency_hz: f64,
}

impl NmrSpectrum {
    /// Indices of the peak region: bins within `factor` half-widths of the
    /// peak, where the half-width is read off the half-maximum crossings.
    pub fn peak_region(&self, factor: f64) -> std::ops::Range<usize> {
        let peak_idx = self
            .real
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let peak = self.real[peak_idx];
        let half = peak / 2.0;
        let mut lo = peak_idx;
        while lo > 0 && self.real[lo] > half {
            lo -= 1;
        }
        let mut hi = peak_idx;
        while hi + 1 < self.real.len() && self.real[hi] > half {
            hi += 1;
        }
        let halfwidth = ((hi - lo) as f64 / 2.0).max(2.0);
        let span = (halfwidth * factor).ceil() as usize;
        peak_idx.saturating_sub(span)..(peak_idx + span + 1).min(self.real.len())
    }
}

/// Phased Fourier transform of an interferogram.
///
/// Requires a uniform tau grid. The spectrum is zero-padded 4x for peak
/// interpolation; the zeroth-order phase is chosen to maximize the
/// integrated real part over the peak region.
pub fn nmr_spectrum(interferogram: &Interferogram) -> Result<NmrSpectrum> {
    let tau = &interferogram.tau_s;
    let n = tau.len();
    if n < 4 {
        return Err(CoreError::InvalidParameter {
            name: "interferogram",
            message: format!("need at least 4 points, got {n}"),
        });
    }
    let dtau = (tau[n - 1] - tau[0]) / (n - 1) as f64;
    if !(dtau > 0.0) {
        return Err(CoreError::NonUniformGrid {
            message: "tau grid must be increasing".into(),
        });
    }
    for w in tau.windows(2) {
        if ((w[1] - w[0]) - dtau).abs() > 1e-9 * dtau.max(1e-12) {
            return Err(CoreError::NonUniformGrid {
                message: format!(
                    "tau spacing varies: found {} vs mean {}",
                    w[1] - w[0],
                    dtau
                ),
            });
        }
    }

    let n_fft = n * SPECTRUM_PAD;
    let mut padded = vec![Complex64::new(0.0, 0.0); n_fft];
    for (i, &a) in interferogram.amplitude.iter().enumerate() {
        padded[i] = Complex64::new(a, 0.0);
    }
    let spectrum = dft(&padded);

    // One-sided axis up to Nyquist.
    let n_half = n_fft / 2;
    let freq_step = 1.0 / (n_fft as f64 * dtau);
    let one_sided = &spectrum[..=n_half];

    // Locate the peak away from the DC lobe of the padded window.
    let k_min = (SPECTRUM_PAD * 2).min(n_half);
    let peak_idx = (k_min..=n_half)
        .max_by(|&a, &b| one_sided[a].norm().partial_cmp(&one_sided[b].norm()).unwrap())
        .unwrap_or(k_min);

    // Peak window: contiguous bins above half the peak magnitude.
    let peak_mag = one_sided[peak_idx].norm();
    let mut lo = peak_idx;
    while lo > k_min && one_sided[lo - 1].norm() > peak_mag / 2.0 {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi < n_half && one_sided[hi + 1].norm() > peak_mag / 2.0 {
        hi += 1;
    }
    let window_sum: Complex64 = one_sided[lo..=hi].iter().sum();
    let phase = -window_sum.arg();

    let rotation = Complex64::new(phase.cos(), phase.sin());
    let real: Vec<f64> = one_sided.iter().map(|s| (s * rotation).re).collect();
    let imag: Vec<f64> = one_sided.iter().map(|s| (s * rotation).im).collect();
    let frequencies: Vec<f64> = (0..=n_half).map(|k| k as f64 * freq_step).collect();

    Ok(NmrSpectrum {
        peak_frequency_hz: peak_idx as f64 * freq_step,
        frequencies_hz: frequencies,
        real,
        imag,
        phase_rad: phase,
    })
}
