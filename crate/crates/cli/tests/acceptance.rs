//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with --nocapture). Tolerances are pinned in
//! code; a red test here is a red criterion.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use odnmr_core::analysis::{analyze_interferogram, DEFAULT_PEAK_REGION};
use odnmr_core::budget;
use odnmr_core::ensemble::{
    hyperfine_histogram, sample_sphere, shell_count_bin, split_seed,
};
use odnmr_core::fitkit::{
    fit_damped_cosine, fit_exponential_decay, fit_lorentzian, fit_polarization_buildup,
    fit_stretched_exponential, EnvelopeVariant,
};
use odnmr_core::presets;
use odnmr_core::signal::{
    add_gaussian_noise, ramsey_interferogram, synthesize_readout_trace, extract_envelope,
    EnvelopeModel, InterferogramMode, SynthesisConfig, TraceConfig, DEFAULT_WINDOW_S,
};
use odnmr_core::spinpair::{ExperimentConditions, HyperfineCoupling};
use odnmr_core::sweepsim::{
    hop_probability, propagate_sweep, sweep_map_2d, HopPair, MapBaseline, MapSecondAxis,
    QuantumState, SweepDirection, SweepProtocol,
};

fn report(criterion: &str, pass: bool, details: &str) {
    println!(
        "criterion {criterion}: {} - {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {details}");
}

/// 1. Hopping benchmark: P23 = 0.31 +- 0.02 and P12, P13, P14 < 1e-3 at
///    the baseline operating point.
#[test]
fn criterion_01_hopping_benchmark() {
    let cond = presets::baseline_conditions();
    let hf = presets::baseline_coupling();
    let sweep = presets::baseline_sweep(&cond);

    let p23 = hop_probability(HopPair::new(2, 3).unwrap(), &sweep, &cond, &hf).unwrap();
    let mut forbidden = Vec::new();
    for to in [2usize, 3, 4] {
        forbidden.push(
            hop_probability(HopPair::new(1, to).unwrap(), &sweep, &cond, &hf).unwrap(),
        );
    }
    let max_forbidden = forbidden.iter().cloned().fold(0.0f64, f64::max);
    let pass = (p23 - 0.31).abs() <= 0.02 && max_forbidden < 1e-3;
    report(
        "01 hopping benchmark",
        pass,
        &format!("P23 = {p23:.4} (target 0.31 +- 0.02), max P1k = {max_forbidden:.2e} (< 1e-3)"),
    );
}

/// 2. Unitarity and simplex over 1e4 random sweeps.
#[test]
fn criterion_02_unitarity_and_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let mut max_drift = 0.0f64;
    let mut max_sum_dev = 0.0f64;
    let mut min_pop = f64::INFINITY;

    for _ in 0..10_000 {
        let b0 = 1e-3 + rng.random::<f64>() * 29e-3;
        let rabi = rng.random::<f64>() * 300e3;
        let azz = -100e3 + rng.random::<f64>() * 200e3;
        let azx = -100e3 + rng.random::<f64>() * 200e3;
        let cond = ExperimentConditions::new(b0, rabi).unwrap();
        let hf = HyperfineCoupling::new(azz, azx);

        let span = 1e6 + rng.random::<f64>() * 8e6;
        let duration = 0.3e-3 + rng.random::<f64>() * 1.7e-3;
        let n_steps = 300.0 + rng.random::<f64>() * 1200.0;
        let direction = if rng.random::<f64>() < 0.5 {
            SweepDirection::Up
        } else {
            SweepDirection::Down
        };
        let sweep = SweepProtocol::new(cond.f_plus(), span, duration)
            .unwrap()
            .with_step(span / n_steps.round())
            .unwrap()
            .with_direction(direction);

        // random normalized pure state
        let mut amps = nalgebra::Vector4::from_fn(|_, _| {
            num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        amps /= num_complex::Complex64::new(amps.norm(), 0.0);
        let initial = QuantumState::new(amps).unwrap();

        let traj = propagate_sweep(&initial, &sweep, &cond, &hf, true).unwrap();
        max_drift = max_drift.max((traj.final_state.norm() - 1.0).abs());
        for row in &traj.dressed_populations {
            let sum: f64 = row.iter().sum();
            max_sum_dev = max_sum_dev.max((sum - 1.0).abs());
            for &p in row {
                min_pop = min_pop.min(p);
            }
        }
    }

    let pass = max_drift <= 1e-9 && max_sum_dev <= 1e-9 && min_pop >= -1e-12;
    report(
        "02 unitarity & simplex",
        pass,
        &format!(
            "max norm drift = {max_drift:.2e} (<= 1e-9), max population-sum deviation = {max_sum_dev:.2e}, min population = {min_pop:.2e}"
        ),
    );
}

/// 3. Selection rule: P23 < 1e-9 at theta = 0, pi/2, pi.
#[test]
fn criterion_03_selection_rule() {
    let cond = presets::baseline_conditions();
    let sweep = presets::baseline_sweep(&cond);
    let mut worst = 0.0f64;
    for theta in [0.0, FRAC_PI_2, PI] {
        let hf = HyperfineCoupling::from_magnitude(30e3, theta).unwrap();
        let p = hop_probability(HopPair::new(2, 3).unwrap(), &sweep, &cond, &hf).unwrap();
        worst = worst.max(p);
    }
    report(
        "03 selection rule",
        worst < 1e-9,
        &format!("max P23 over the transverse nodes = {worst:.2e} (< 1e-9)"),
    );
}

/// 4. Low-field shutoff: for A0 in {10, 20, 40, 80} kHz, max over theta of
///    P23 at 3 mT < 0.1 and at 12 mT > 0.3.
#[test]
fn criterion_04_low_field_shutoff() {
    let pair = HopPair::new(2, 3).unwrap();
    let theta: Vec<f64> = (0..25).map(|i| FRAC_PI_2 * i as f64 / 24.0).collect();
    let mut failures = Vec::new();
    for a0 in [10e3, 20e3, 40e3, 80e3] {
        let mut maxima = [0.0f64; 2];
        for (i, b0) in [3e-3, 12e-3].into_iter().enumerate() {
            let cond = ExperimentConditions::new(b0, 100e3).unwrap();
            let base = MapBaseline {
                sweep: SweepProtocol::baseline(&cond),
                hf: presets::baseline_coupling(),
                cond,
            };
            let map = sweep_map_2d(a0, &theta, MapSecondAxis::B0, &[b0], &base, pair).unwrap();
            maxima[i] = map.max_over_theta(0);
        }
        let low_ok = maxima[0] < 0.1;
        let high_ok = maxima[1] > 0.3;
        println!(
            "  A0 = {:>2.0} kHz: max_theta P23 = {:.4} at 3 mT ({}), {:.4} at 12 mT ({})",
            a0 / 1e3,
            maxima[0],
            if low_ok { "ok" } else { "VIOLATION" },
            maxima[1],
            if high_ok { "ok" } else { "VIOLATION" },
        );
        if !low_ok {
            failures.push(format!("A0 = {} kHz: {:.4} at 3 mT >= 0.1", a0 / 1e3, maxima[0]));
        }
        if !high_ok {
            failures.push(format!("A0 = {} kHz: {:.4} at 12 mT <= 0.3", a0 / 1e3, maxima[1]));
        }
    }
    report(
        "04 low-field shutoff",
        failures.is_empty(),
        &if failures.is_empty() {
            "all eight sub-conditions hold".to_string()
        } else {
            format!(
                "{} of 8 sub-conditions violated: {}",
                failures.len(),
                failures.join("; ")
            )
        },
    );
}

/// 5. Ensemble statistics: spin counts, histogram vs. the shell formula,
///    and the inverse-square slope.
#[test]
fn criterion_05_ensemble_statistics() {
    let sample = sample_sphere(split_seed(0, 0), 3.0, 1.9).unwrap();
    let n_tot_ok = sample.spins.len() == 215;

    // single-run count within 1.5 nm lands inside the Poisson band, and
    // the 100-run average near the 215/8 expectation
    let single = sample.spins.iter().filter(|s| s.r_nm <= 1.5).count();
    let expectation = 215.0 / 8.0;
    let single_ok = (single as f64 - expectation).abs() <= 3.0 * expectation.sqrt();
    let mut total = 0usize;
    for run in 0..100u64 {
        let s = sample_sphere(split_seed(0, run), 3.0, 1.9).unwrap();
        total += s.spins.iter().filter(|sp| sp.r_nm <= 1.5).count();
    }
    let mean = total as f64 / 100.0;
    let mean_ok = (mean - expectation).abs() <= 3.0 * expectation.sqrt() / 10.0;

    // run-averaged histogram against the exact shell integral
    let hist = hyperfine_histogram(10_000, 0, 3.0, 1.9, 6e3, 300e3).unwrap();
    let mut worst_dev = 0.0f64;
    let mut checked = 0;
    for k in 1..hist.n_bins() {
        let expected = shell_count_bin(hist.edges_hz[k], hist.edges_hz[k + 1], 1.9, 3.0);
        if expected > 1.0 && hist.std_errors[k] > 0.0 {
            checked += 1;
            worst_dev =
                worst_dev.max((hist.mean_counts[k] - expected).abs() / hist.std_errors[k]);
        }
    }
    let bins_ok = checked > 0 && worst_dev <= 3.0;
    let slope = hist.log_log_slope(1.0).unwrap_or(f64::NAN);
    let slope_ok = (slope + 2.0).abs() <= 0.1;

    let pass = n_tot_ok && single_ok && mean_ok && bins_ok && slope_ok;
    report(
        "05 ensemble statistics",
        pass,
        &format!(
            "N_tot = {} (= 215), count(r <= 1.5 nm) = {single} (expect ~{expectation:.1}), 100-run mean = {mean:.2}, worst bin deviation = {worst_dev:.2} SE over {checked} bins (<= 3), log-log slope = {slope:.3} (-2 +- 0.1)",
            sample.spins.len()
        ),
    );
}

/// 6. Fit roundtrips: noiseless recovery at 1e-6 for every model, the
///    full readout pipeline at the reference point within 1%, and the
///    linewidth-dephasing product within 5%.
#[test]
fn criterion_06_fit_roundtrips() {
    let grid = |n: usize, span: f64| -> Vec<f64> {
        (0..n).map(|i| i as f64 * span / (n - 1) as f64).collect()
    };
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, got: f64, want: f64, tol: f64| {
        let rel = ((got - want) / want).abs();
        if rel > tol {
            failures.push(format!("{name}: {got:.6e} vs {want:.6e} (rel {rel:.2e})"));
        }
    };

    // noiseless recovery for the whole model family
    let x = grid(60, 6e-3);
    let y: Vec<f64> = x
        .iter()
        .map(|&t| 0.21e-2 * (2.0 * PI * 863.0 * t).cos() * (-t / 1.74e-3).exp())
        .collect();
    let fit = fit_damped_cosine(&x, &y, false).unwrap();
    check("damped cosine A", fit.value("visibility").unwrap(), 0.21e-2, 1e-6);
    check("damped cosine delta", fit.value("detuning_hz").unwrap(), 863.0, 1e-6);
    check("damped cosine T2*", fit.value("t2_star_s").unwrap(), 1.74e-3, 1e-6);

    let x = grid(80, 0.4);
    let y: Vec<f64> = x.iter().map(|&t| 1.08 * (-(t / 5.1e-3f64).powf(0.3)).exp()).collect();
    let fit = fit_stretched_exponential(&x, &y, EnvelopeVariant::F1).unwrap();
    check("stretched a", fit.value("amplitude").unwrap(), 1.08, 1e-6);
    check("stretched T", fit.value("decay_time_s").unwrap(), 5.1e-3, 1e-6);

    let x = grid(100, 2000.0);
    let y: Vec<f64> = x
        .iter()
        .map(|&f| {
            let u = 2.0 * (f - 870.0) / 190.0;
            0.001 + 0.02 / (1.0 + u * u)
        })
        .collect();
    let fit = fit_lorentzian(&x, &y).unwrap();
    check("lorentzian center", fit.value("center_hz").unwrap(), 870.0, 1e-6);
    check("lorentzian fwhm", fit.value("fwhm_hz").unwrap(), 190.0, 1e-6);

    let x = grid(40, 8e-3);
    let y: Vec<f64> = x.iter().map(|&t| 0.8 * (-t / 1.5e-3).exp()).collect();
    let fit = fit_exponential_decay(&x, &y).unwrap();
    check("exp decay T", fit.value("decay_time_s").unwrap(), 1.5e-3, 1e-6);

    let x: Vec<f64> = (0..30).map(|i| 0.02 + i as f64 * 1.98 / 29.0).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&t| 0.237e-2 * (1.0 - (-(t / 57.25e-3f64).sqrt()).exp()))
        .collect();
    let fit = fit_polarization_buildup(&x, &y, Some(0.5)).unwrap();
    check("buildup A_sat", fit.value("a_sat").unwrap(), 0.237e-2, 1e-6);
    check("buildup T_pol", fit.value("t_pol_s").unwrap(), 229e-3, 1e-6);

    // full pipeline at the readout-validation point
    let model = presets::ramsey_reference();
    let cfg = SynthesisConfig {
        shape: EnvelopeModel::new(1.0, 90e-3 / 2f64.powf(1.0 / 0.3), 0.3).unwrap(),
        trace: TraceConfig::default(),
        window_s: DEFAULT_WINDOW_S,
    };
    let tau: Vec<f64> = (0..48).map(|i| i as f64 * 4.5 * 1.74e-3 / 47.0).collect();
    let ifg = ramsey_interferogram(&tau, &model, &InterferogramMode::Synthesis(cfg)).unwrap();
    let analysis = analyze_interferogram(&ifg, DEFAULT_PEAK_REGION).unwrap();
    check(
        "pipeline |A|",
        analysis.ramsey.value("visibility").unwrap(),
        0.21e-2,
        1e-2,
    );
    check(
        "pipeline delta",
        analysis.ramsey.value("detuning_hz").unwrap(),
        863.0,
        1e-2,
    );
    check(
        "pipeline T2*",
        analysis.ramsey.value("t2_star_s").unwrap(),
        1.74e-3,
        1e-2,
    );

    // linewidth-dephasing product on the same spectrum
    let product =
        analysis.lorentzian.value("fwhm_hz").unwrap() * PI * analysis.ramsey.value("t2_star_s").unwrap();
    if (product - 1.0).abs() > 0.05 {
        failures.push(format!("FWHM * pi * T2* = {product:.4}"));
    }

    report(
        "06 fit roundtrips",
        failures.is_empty(),
        &if failures.is_empty() {
            format!("all noiseless recoveries at 1e-6, pipeline within 1%, FWHM*pi*T2* = {product:.4}")
        } else {
            failures.join("; ")
        },
    );
}

/// 7. Envelope table: regenerate both pinned-stretch rows, refit within
///    2%; the 1/e^2 identity is exact.
#[test]
fn criterion_07_envelope_table() {
    let mut failures: Vec<String> = Vec::new();
    for (env, a_want, te2_want, label) in [
        (presets::envelope_up_reference(), 1.08, 51.4e-3, "up"),
        (presets::envelope_down_reference(), 0.63, 72e-3, "down"),
    ] {
        let trace = synthesize_readout_trace(1.0, &env, &TraceConfig::default()).unwrap();
        let (t, m) = extract_envelope(&trace).unwrap();
        let fit = fit_stretched_exponential(&t, &m, EnvelopeVariant::F1).unwrap();
        let a = fit.value("amplitude").unwrap();
        let te2 = fit.value("t_e2_s").unwrap();
        if ((a - a_want) / a_want).abs() > 0.02 {
            failures.push(format!("{label}: a = {a:.4} vs {a_want}"));
        }
        if ((te2 - te2_want) / te2_want).abs() > 0.02 {
            failures.push(format!("{label}: T_e2 = {te2:.4e} vs {te2_want:.4e}"));
        }
        // derived identity T_e2 = 2^(1/0.3) T, exact
        let identity = 2f64.powf(1.0 / 0.3) * fit.value("decay_time_s").unwrap();
        if ((te2 - identity) / identity).abs() > 1e-12 {
            failures.push(format!("{label}: identity violated ({te2} vs {identity})"));
        }
    }
    let factor = 2f64.powf(1.0 / 0.3);
    let pass = failures.is_empty() && (factor - 10.079).abs() < 0.01;
    report(
        "07 envelope table",
        pass,
        &if failures.is_empty() {
            format!("both rows recovered within 2%; 2^(1/0.3) = {factor:.4}")
        } else {
            failures.join("; ")
        },
    );
}

/// 8. Buildup: reference-point recovery within 1% and the free-stretch
///    refit of the 12 mT row at beta = 0.50 +- 0.05.
#[test]
fn criterion_08_polarization_buildup() {
    let (a_sat, t_p, beta) = presets::buildup_reference();
    let t: Vec<f64> = (0..30).map(|i| 0.02 + i as f64 * 1.98 / 29.0).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&ti| a_sat * (1.0 - (-(ti / t_p).powf(beta)).exp()))
        .collect();
    let fit = fit_polarization_buildup(&t, &y, Some(0.5)).unwrap();
    let a_got = fit.value("a_sat").unwrap();
    let tpol_got = fit.value("t_pol_s").unwrap();
    let point_ok =
        ((a_got - a_sat) / a_sat).abs() < 1e-2 && ((tpol_got - 229e-3) / 229e-3).abs() < 1e-2;

    // 12 mT row with realistic noise, stretch left free
    let (a12, tp12, b12) = presets::buildup_12mt_row();
    let mut y12: Vec<f64> = t
        .iter()
        .map(|&ti| a12 * (1.0 - (-(ti / tp12).powf(b12)).exp()))
        .collect();
    add_gaussian_noise(&mut y12, 0.002e-2, 8).unwrap();
    let free = fit_polarization_buildup(&t, &y12, None).unwrap();
    let beta_got = free.value("beta").unwrap();
    let beta_ok = (beta_got - 0.50).abs() <= 0.05;

    report(
        "08 polarization buildup",
        point_ok && beta_ok,
        &format!(
            "A_sat = {a_got:.4e} (0.237e-2), T_pol = {tpol_got:.4e} (229 ms); free-stretch refit beta = {beta_got:.3} (0.50 +- 0.05)"
        ),
    );
}

/// 9. Budget chain: duty cycle, fidelity, frequency precision, angle
///    random walk, coil fidelity, combined dephasing.
#[test]
fn criterion_09_budget_chain() {
    let report_data = budget::odnmr_budget(&presets::discussion_budget()).unwrap();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, got: f64, want: f64, tol: f64| {
        if ((got - want) / want).abs() > tol {
            failures.push(format!("{name}: {got:.4e} vs {want:.4e}"));
        }
    };
    check("duty cycle", report_data.duty_cycle, 5e-3, 1e-9);
    check("N_p", report_data.n_polarized, 1e16, 1e-12);
    check("fidelity", report_data.fidelity, 2.5e-4, 5e-3);
    check("delta_f", report_data.delta_f_hz, 2.01e-3, 1e-2);
    check("ARW", report_data.arw_deg_per_sqrt_s, 0.72, 1e-2);
    check(
        "coil fidelity",
        budget::coil_fidelity(&presets::coil_reference()).unwrap(),
        2.47e-3,
        1e-2,
    );
    check(
        "combined dephasing",
        budget::combined_dephasing(&[3e-3, 2.5e-3]).unwrap(),
        1.36e-3,
        1e-2,
    );
    report(
        "09 budget chain",
        failures.is_empty(),
        &if failures.is_empty() {
            format!(
                "delta_f = {:.3e} Hz, ARW = {:.3}, coil F = 2.47e-3, dephasing = 1.36 ms",
                report_data.delta_f_hz, report_data.arw_deg_per_sqrt_s
            )
        } else {
            failures.join("; ")
        },
    );
}

/// 10. Determinism: two same-seed `reproduce figA5` runs are byte-identical.
#[test]
fn criterion_10_determinism() {
    let bin = env!("CARGO_BIN_EXE_odnmr");
    let base = std::env::temp_dir().join("odnmr_acceptance_determinism");
    let _ = std::fs::remove_dir_all(&base);
    let dirs = [base.join("run1"), base.join("run2")];
    for dir in &dirs {
        let status = Command::new(bin)
            .args([
                "reproduce",
                "figA5",
                "--seed",
                "7",
                "--out",
                dir.to_str().unwrap(),
            ])
            .status()
            .expect("binary runs");
        assert!(status.success(), "reproduce figA5 failed");
    }

    let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty(), "no artifacts produced");
    let mut compared = 0;
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between runs");
        compared += 1;
    }
    report(
        "10 determinism",
        compared > 0,
        &format!("{compared} artifacts byte-identical across two seeded runs"),
    );
}
