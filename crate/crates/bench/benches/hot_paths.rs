//! Hot-path benchmarks: per-step eigendecomposition, full sweeps, hopping
//! probabilities, bath sampling, and a representative fit.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use odnmr_core::ensemble::sample_sphere;
use odnmr_core::fitkit::fit_damped_cosine;
use odnmr_core::presets;
use odnmr_core::signal::{ramsey_interferogram, InterferogramMode};
use odnmr_core::spinpair::{build_hamiltonian, dressed_states};
use odnmr_core::sweepsim::{hop_probability, propagate_sweep, HopPair, QuantumState};

fn bench_eigendecomposition(c: &mut Criterion) {
    let cond = presets::baseline_conditions();
    let hf = presets::baseline_coupling();
    c.bench_function("dressed_states_single", |b| {
        let mut f = cond.f_plus() - 1e6;
        b.iter(|| {
            f += 1e3;
            let h = build_hamiltonian(black_box(f), &cond, &hf);
            black_box(dressed_states(&h, None).unwrap())
        })
    });
}

fn bench_sweep(c: &mut Criterion) {
    let cond = presets::baseline_conditions();
    let hf = presets::baseline_coupling();
    let sweep = presets::baseline_sweep(&cond);
    let initial = QuantumState::bare(odnmr_core::spinpair::BareState::ZeroUp);
    let mut group = c.benchmark_group("sweep");
    group.sample_size(20);
    group.bench_function("propagate_9000_steps", |b| {
        b.iter(|| black_box(propagate_sweep(&initial, &sweep, &cond, &hf, false).unwrap()))
    });
    group.bench_function("hop_probability_baseline", |b| {
        b.iter(|| {
            black_box(
                hop_probability(HopPair::new(2, 3).unwrap(), &sweep, &cond, &hf).unwrap(),
            )
        })
    });
    group.finish();
}

fn bench_ensemble(c: &mut Criterion) {
    c.bench_function("sample_sphere_215_spins", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            black_box(sample_sphere(black_box(seed), 3.0, 1.9).unwrap())
        })
    });
}

fn bench_fit(c: &mut Criterion) {
    let model = presets::ramsey_reference();
    let tau: Vec<f64> = (0..48).map(|i| i as f64 * 7.8e-3 / 47.0).collect();
    let ifg = ramsey_interferogram(&tau, &model, &InterferogramMode::Analytic).unwrap();
    c.bench_function("fit_damped_cosine_48_points", |b| {
        b.iter(|| black_box(fit_damped_cosine(&ifg.tau_s, &ifg.amplitude, true).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_eigendecomposition,
    bench_sweep,
    bench_ensemble,
    bench_fit
);
criterion_main!(benches);
