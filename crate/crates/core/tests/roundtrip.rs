//! Cross-module roundtrips: trace synthesis through Fourier extraction,
//! interferogram assembly, fitting, and lineshape analysis.

use odnmr_core::analysis::{analyze_interferogram, DEFAULT_PEAK_REGION};
use odnmr_core::fitkit::fit_damped_cosine;
use odnmr_core::signal::{
    ramsey_interferogram, EnvelopeModel, InterferogramMode, RamseyModel, SynthesisConfig,
    TraceConfig, DEFAULT_WINDOW_S,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn standard_shape() -> EnvelopeModel {
    EnvelopeModel::new(1.0, 90e-3 / 2f64.powf(1.0 / 0.3), 0.3).unwrap()
}

fn tau_grid(n: usize, span: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * span / (n - 1) as f64).collect()
}

/// 100 random operating points, zero noise: the full synthesize ->
/// extract -> interferogram -> fit chain recovers (A, delta, T2*) to 1%.
#[test]
fn synthesis_chain_recovers_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(20250809);
    for draw in 0..100 {
        let visibility = 0.05e-2 + rng.random::<f64>() * (0.5e-2 - 0.05e-2);
        let detuning = 200.0 + rng.random::<f64>() * 1800.0;
        let t2_star = 0.5e-3 + rng.random::<f64>() * 2.5e-3;
        let model = RamseyModel::new(visibility, detuning, t2_star, 0.0).unwrap();

        let span = (3.5 * t2_star).max(2.5 / detuning);
        let tau = tau_grid(96, span);
        let cfg = SynthesisConfig {
            shape: standard_shape(),
            trace: TraceConfig {
                seed: 1000 + draw,
                ..Default::default()
            },
            window_s: DEFAULT_WINDOW_S,
        };
        let ifg = ramsey_interferogram(&tau, &model, &InterferogramMode::Synthesis(cfg)).unwrap();
        let fit = fit_damped_cosine(&ifg.tau_s, &ifg.amplitude, false).unwrap();
        assert!(fit.converged, "draw {draw} did not converge");

        for (name, want) in [
            ("visibility", visibility),
            ("detuning_hz", detuning),
            ("t2_star_s", t2_star),
        ] {
            let got = fit.value(name).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-2,
                "draw {draw}: {name} = {got} vs {want}"
            );
        }
    }
}

/// Fitted Lorentzian width times pi T2* stays within 5% of unity for
/// damped cosines sampled with at least 40 points over at least 3 T2*.
#[test]
fn lorentzian_width_tracks_the_dephasing_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for draw in 0..25 {
        let visibility = 0.1e-2 + rng.random::<f64>() * 0.3e-2;
        let t2_star = 0.8e-3 + rng.random::<f64>() * 2.2e-3;
        let detuning = 400.0 + rng.random::<f64>() * 1600.0;
        let offset = rng.random::<f64>() * 0.05e-2;
        let span = (4.0 + 2.0 * rng.random::<f64>()) * t2_star;
        let span = span.max(2.5 / detuning);
        let n = 48 + (rng.random::<f64>() * 48.0) as usize;

        let model = RamseyModel::new(visibility, detuning, t2_star, offset).unwrap();
        let tau = tau_grid(n, span);
        let ifg = ramsey_interferogram(&tau, &model, &InterferogramMode::Analytic).unwrap();
        let analysis = analyze_interferogram(&ifg, DEFAULT_PEAK_REGION).unwrap();

        let fwhm = analysis.lorentzian.value("fwhm_hz").unwrap();
        let product = fwhm * std::f64::consts::PI * t2_star;
        assert!(
            (product - 1.0).abs() < 0.05,
            "draw {draw}: FWHM * pi * T2* = {product} (n = {n}, span = {span})"
        );

        // the spectral peak sits within a few padded bins of the detuning
        let bin = analysis.spectrum.frequencies_hz[1] - analysis.spectrum.frequencies_hz[0];
        assert!(
            (analysis.spectrum.peak_frequency_hz - detuning).abs() < 4.0 * bin,
            "draw {draw}: peak at {} vs {detuning}",
            analysis.spectrum.peak_frequency_hz
        );
    }
}

/// The interferogram offset term rides through the chain: fitted offset
/// equals the injected persistent-oscillation amplitude.
#[test]
fn persistent_oscillation_surfaces_as_interferogram_offset() {
    let model = RamseyModel::new(0.21e-2, 863.0, 1.74e-3, 0.02e-2).unwrap();
    let cfg = SynthesisConfig {
        shape: standard_shape(),
        trace: TraceConfig::default(),
        window_s: DEFAULT_WINDOW_S,
    };
    let tau = tau_grid(48, 7e-3);
    let ifg = ramsey_interferogram(&tau, &model, &InterferogramMode::Synthesis(cfg)).unwrap();
    let fit = fit_damped_cosine(&ifg.tau_s, &ifg.amplitude, true).unwrap();
    let offset = fit.value("offset").unwrap();
    assert!(
        ((offset - 0.02e-2) / 0.02e-2).abs() < 1e-6,
        "offset {offset}"
    );
}
