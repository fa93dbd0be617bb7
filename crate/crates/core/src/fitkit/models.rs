//! The fit-model family and per-model initialization heuristics.

use std::f64::consts::PI;

use super::lm::Bounds;
use super::{least_squares, FitParameter, FitResult};
use crate::error::Result;

/// Mean spacing of a (possibly slightly non-uniform) grid.
fn mean_spacing(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 1.0;
    }
    (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64
}

/// Dominant oscillation frequency from the DFT of mean-subtracted data,
/// assuming roughly uniform sampling.
fn dominant_frequency(x: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    let dx = mean_spacing(x);
    if n < 4 || !(dx > 0.0) {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut best = (1usize, 0.0f64);
    for k in 1..=n / 2 {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (idx, &v) in y.iter().enumerate() {
            let phase = -2.0 * PI * (k * idx) as f64 / n as f64;
            re += (v - mean) * phase.cos();
            im += (v - mean) * phase.sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (k, power);
        }
    }
    best.0 as f64 / (n as f64 * dx)
}

/// Decay time from the log-slope of the local maxima of |y - offset|.
fn envelope_decay_time(x: &[f64], y: &[f64], offset: f64) -> Option<f64> {
    let mag: Vec<f64> = y.iter().map(|&v| (v - offset).abs()).collect();
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..mag.len().saturating_sub(1) {
        if mag[i] >= mag[i - 1] && mag[i] >= mag[i + 1] && mag[i] > 0.0 {
            peaks.push((x[i], mag[i].ln()));
        }
    }
    if peaks.len() < 3 {
        return None;
    }
    let n = peaks.len() as f64;
    let sx: f64 = peaks.iter().map(|p| p.0).sum();
    let sy: f64 = peaks.iter().map(|p| p.1).sum();
    let sxx: f64 = peaks.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = peaks.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Ordinary least squares for `ln y = intercept + slope * s`.
fn log_linear(s: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = s
        .iter()
        .zip(y.iter())
        .filter(|(_, &yi)| yi > 0.0)
        .map(|(&si, &yi)| (si, yi.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Some((intercept, slope))
}

/// Delta-method error of `g(params)` given the gradient and covariance.
fn propagate_error(gradient: &[f64], covariance: &[Vec<f64>]) -> f64 {
    let mut var = 0.0;
    for (i, gi) in gradient.iter().enumerate() {
        for (j, gj) in gradient.iter().enumerate() {
            let c = covariance[i][j];
            if c.is_finite() {
                var += gi * gj * c;
            } else if gi * gj != 0.0 {
                return f64::INFINITY;
            }
        }
    }
    var.max(0.0).sqrt()
}

/// Ramsey interferogram fit: `A cos(2 pi delta tau) exp(-tau/T2*) [+ c]`.
pub fn fit_damped_cosine(x: &[f64], y: &[f64], with_offset: bool) -> Result<FitResult> {
    let offset0 = if with_offset {
        y.iter().sum::<f64>() / y.len().max(1) as f64
    } else {
        0.0
    };
    let delta0 = dominant_frequency(x, y);
    let amp0 = {
        let peak = y
            .iter()
            .map(|&v| (v - offset0).abs())
            .fold(0.0f64, f64::max);
        let sign = if y.first().copied().unwrap_or(1.0) >= offset0 {
            1.0
        } else {
            -1.0
        };
        sign * peak.max(1e-12)
    };
    let span = x.last().copied().unwrap_or(1.0) - x.first().copied().unwrap_or(0.0);
    let t20 = envelope_decay_time(x, y, offset0)
        .unwrap_or(span / 2.0)
        .clamp(mean_spacing(x), span.max(1e-12) * 100.0);

    let mut result = if with_offset {
        let f = |t: f64, p: &[f64]| p[0] * (2.0 * PI * p[1] * t).cos() * (-t / p[2]).exp() + p[3];
        least_squares(
            "damped_cosine_offset",
            &["visibility", "detuning_hz", "t2_star_s", "offset"],
            f,
            x,
            y,
            &[amp0, delta0, t20, offset0],
            Some(Bounds::positive(4, &[2])),
        )?
    } else {
        let f = |t: f64, p: &[f64]| p[0] * (2.0 * PI * p[1] * t).cos() * (-t / p[2]).exp();
        least_squares(
            "damped_cosine",
            &["visibility", "detuning_hz", "t2_star_s"],
            f,
            x,
            y,
            &[amp0, delta0, t20],
            Some(Bounds::positive(3, &[2])),
        )?
    };

    // With less than ~3 degrees of accumulated phase the cosine factor is
    // indistinguishable from 1 and the sign of the detuning is undetermined.
    let phase = 2.0 * PI * result.value("detuning_hz").unwrap_or(0.0).abs() * span;
    if phase < 0.05 {
        if !result.message.is_empty() {
            result.message.push_str("; ");
        }
        result
            .message
            .push_str("detuning consistent with zero; its sign is not identifiable");
    }
    Ok(result)
}

/// Envelope fit family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeVariant {
    /// `a exp(-(t/T)^0.3)` (stretch pinned).
    F1,
    /// `a exp(-(t/T)^gamma)`.
    F2,
    /// `a exp(-(t/T)^gamma) + d`.
    F3,
}

impl EnvelopeVariant {
    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeVariant::F1 => "f1",
            EnvelopeVariant::F2 => "f2",
            EnvelopeVariant::F3 => "f3",
        }
    }
}

/// Stretch exponent pinned by the two-parameter envelope fit.
pub const F1_STRETCH: f64 = 0.3;

/// Readout-envelope fit; reports the 1/e^2 time `T_e2 = 2^(1/gamma) T` as
/// a derived parameter with a propagated error.
pub fn fit_stretched_exponential(x: &[f64], y: &[f64], variant: EnvelopeVariant) -> Result<FitResult> {
    // Linearize ln y against t^0.3 for starting values.
    let s: Vec<f64> = x.iter().map(|&t| t.max(0.0).powf(F1_STRETCH)).collect();
    let (a0, t0) = match log_linear(&s, y) {
        Some((intercept, slope)) if slope < 0.0 => {
            (intercept.exp(), (-1.0 / slope).powf(1.0 / F1_STRETCH))
        }
        _ => (
            y.iter().cloned().fold(f64::MIN, f64::max).max(1e-12),
            (x.last().unwrap_or(&1.0) - x.first().unwrap_or(&0.0)).max(1e-6),
        ),
    };

    let mut result = match variant {
        EnvelopeVariant::F1 => {
            let f = |t: f64, p: &[f64]| p[0] * (-(t.max(0.0) / p[1]).powf(F1_STRETCH)).exp();
            least_squares(
                "envelope_f1",
                &["amplitude", "decay_time_s"],
                f,
                x,
                y,
                &[a0, t0],
                Some(Bounds::positive(2, &[1])),
            )?
        }
        EnvelopeVariant::F2 => {
            let f = |t: f64, p: &[f64]| p[0] * (-(t.max(0.0) / p[1]).powf(p[2])).exp();
            least_squares(
                "envelope_f2",
                &["amplitude", "decay_time_s", "stretch"],
                f,
                x,
                y,
                &[a0, t0, F1_STRETCH],
                Some(Bounds::positive(3, &[1]).with_interval(2, 1e-3, 2.0)),
            )?
        }
        EnvelopeVariant::F3 => {
            let f = |t: f64, p: &[f64]| p[0] * (-(t.max(0.0) / p[1]).powf(p[2])).exp() + p[3];
            let d0 = y.iter().cloned().fold(f64::MAX, f64::min).min(0.0);
            least_squares(
                "envelope_f3",
                &["amplitude", "decay_time_s", "stretch", "baseline"],
                f,
                x,
                y,
                &[a0, t0, F1_STRETCH, d0],
                Some(Bounds::positive(4, &[1]).with_interval(2, 1e-3, 2.0)),
            )?
        }
    };

    // T_e2 = 2^(1/gamma) T, with gamma pinned for f1.
    let t = result.value("decay_time_s").unwrap();
    let gamma = result.value("stretch").unwrap_or(F1_STRETCH);
    let factor = 2f64.powf(1.0 / gamma);
    let t_e2 = factor * t;
    let gradient: Vec<f64> = result
        .parameters
        .iter()
        .map(|p| match p.name.as_str() {
            "decay_time_s" => factor,
            "stretch" => -t * factor * std::f64::consts::LN_2 / (gamma * gamma),
            _ => 0.0,
        })
        .collect();
    let err = propagate_error(&gradient, &result.covariance);
    result.derived.push(FitParameter {
        name: "t_e2_s".into(),
        value: t_e2,
        std_error: err,
    });
    Ok(result)
}

/// Lorentzian lineshape `baseline + amplitude / (1 + (2(x-center)/fwhm)^2)`.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let baseline0 = sorted[sorted.len() / 2];
    let (peak_idx, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty data");
    let amp0 = (peak - baseline0).max(1e-12);
    let center0 = x[peak_idx];
    let half = baseline0 + amp0 / 2.0;
    let mut lo = peak_idx;
    while lo > 0 && y[lo] > half {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < y.len() && y[hi] > half {
        hi += 1;
    }
    let fwhm0 = ((x[hi] - x[lo]).abs()).max(2.0 * mean_spacing(x).abs());

    let f = |xv: f64, p: &[f64]| {
        let u = 2.0 * (xv - p[0]) / p[1];
        p[3] + p[2] / (1.0 + u * u)
    };
    least_squares(
        "lorentzian",
        &["center_hz", "fwhm_hz", "amplitude", "baseline"],
        f,
        x,
        y,
        &[center0, fwhm0, amp0, baseline0],
        Some(Bounds::positive(4, &[1])),
    )
}

/// Mono-exponential decay `amplitude exp(-t/T)`.
pub fn fit_exponential_decay(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let (amp0, t0) = match log_linear(x, y) {
        Some((intercept, slope)) if slope < 0.0 => (intercept.exp(), -1.0 / slope),
        _ => (
            y.first().copied().unwrap_or(1.0).max(1e-12),
            (x.last().unwrap_or(&1.0) - x.first().unwrap_or(&0.0)).max(1e-6) / 2.0,
        ),
    };
    let f = |t: f64, p: &[f64]| p[0] * (-t / p[1]).exp();
    least_squares(
        "exponential_decay",
        &["amplitude", "decay_time_s"],
        f,
        x,
        y,
        &[amp0, t0],
        Some(Bounds::positive(2, &[1])),
    )
}

/// Polarization-buildup fit `A_sat (1 - exp(-(t/T_p)^beta))`.
///
/// `fix_beta` pins the stretch (0.5 in the baseline protocol); otherwise
/// beta is free. The derived `T_pol = 2^(1/beta) T_p` carries a
/// propagated error.
pub fn fit_polarization_buildup(x: &[f64], y: &[f64], fix_beta: Option<f64>) -> Result<FitResult> {
    let a0 = 1.05 * y.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    // t at which the curve passes 1 - 1/e of saturation equals T_p for
    // any stretch exponent.
    let target = (1.0 - (-1.0f64).exp()) * a0 / 1.05;
    let tp0 = x
        .iter()
        .zip(y.iter())
        .find(|(_, &yi)| yi >= target)
        .map(|(&xi, _)| xi)
        .filter(|&v| v > 0.0)
        .unwrap_or_else(|| {
            let span = x.last().unwrap_or(&1.0) - x.first().unwrap_or(&0.0);
            (span / 4.0).max(1e-6)
        });

    let mut result = match fix_beta {
        Some(beta) => {
            let f = move |t: f64, p: &[f64]| p[0] * (1.0 - (-(t.max(0.0) / p[1]).powf(beta)).exp());
            let mut r = least_squares(
                "polarization_buildup_fixed_beta",
                &["a_sat", "t_p_s"],
                f,
                x,
                y,
                &[a0, tp0],
                Some(Bounds::positive(2, &[0, 1])),
            )?;
            r.derived.push(FitParameter {
                name: "beta_fixed".into(),
                value: beta,
                std_error: 0.0,
            });
            r
        }
        None => {
            let f = |t: f64, p: &[f64]| p[0] * (1.0 - (-(t.max(0.0) / p[1]).powf(p[2])).exp());
            least_squares(
                "polarization_buildup",
                &["a_sat", "t_p_s", "beta"],
                f,
                x,
                y,
                &[a0, tp0, 0.5],
                Some(Bounds::positive(3, &[0, 1]).with_interval(2, 0.02, 2.0)),
            )?
        }
    };

    let t_p = result.value("t_p_s").unwrap();
    let beta = fix_beta.or_else(|| result.value("beta")).unwrap();
    let factor = 2f64.powf(1.0 / beta);
    let gradient: Vec<f64> = result
        .parameters
        .iter()
        .map(|p| match p.name.as_str() {
            "t_p_s" => factor,
            "beta" => -t_p * factor * std::f64::consts::LN_2 / (beta * beta),
            _ => 0.0,
        })
        .collect();
    let err = propagate_error(&gradient, &result.covariance);
    result.derived.push(FitParameter {
        name: "t_pol_s".into(),
        value: factor * t_p,
        std_error: err,
    });
    Ok(result)
}
