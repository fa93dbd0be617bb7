//! Stepped-unitary propagation through microwave frequency sweeps and
//! diabatic hopping probabilities.
//!
//! The drive frequency is incremented in discrete steps across the sweep
//! span; at each step the exact unitary `exp(-2*pi*i H dt)` is applied,
//! with the matrix exponential evaluated through the eigendecomposition of
//! the 4x4 Hermitian Hamiltonian. Dressed-state labels are carried along
//! the sweep by overlap continuity, anchored in descending eigenfrequency
//! order at the sweep start.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::spinpair::{
    build_hamiltonian, continuity_assignment, sorted_eigensystem, BareState, DressedLabel,
    DressedSpectrum, ExperimentConditions, HyperfineCoupling,
};

/// Norm tolerance accepted for state vectors.
const NORM_TOL: f64 = 1e-9;

/// Minimum squared overlap for identifying a dressed state with a bare
/// state at a far-detuned sweep endpoint.
const FAR_DETUNED_OVERLAP: f64 = 0.99;

/// Sweep direction in frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Up,
    Down,
}

/// A linear microwave frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepProtocol {
    center_hz: f64,
    span_hz: f64,
    duration_s: f64,
    step_hz: f64,
    direction: SweepDirection,
}

impl SweepProtocol {
    /// Default step size (Hz).
    pub const DEFAULT_STEP_HZ: f64 = 1e3;

    /// Sweep of full width `span_hz` centered on `center_hz`, lasting
    /// `duration_s`, with the default 1 kHz frequency step, upward.
    pub fn new(center_hz: f64, span_hz: f64, duration_s: f64) -> Result<Self> {
        if !(span_hz > 0.0) || !span_hz.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "span_hz",
                message: format!("span must be positive, got {span_hz}"),
            });
        }
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "duration_s",
                message: format!("duration must be positive, got {duration_s}"),
            });
        }
        if !center_hz.is_finite() || center_hz <= span_hz / 2.0 {
            return Err(CoreError::InvalidParameter {
                name: "center_hz",
                message: format!("center must exceed half the span, got {center_hz}"),
            });
        }
        Ok(Self {
            center_hz,
            span_hz,
            duration_s,
            step_hz: Self::DEFAULT_STEP_HZ,
            direction: SweepDirection::Up,
        })
    }

    /// Baseline detection-phase sweep: 9 MHz span in 1 ms, centered on the
    /// NV transition.
    pub fn baseline(cond: &ExperimentConditions) -> Self {
        Self::new(cond.f_plus(), 9e6, 1e-3).expect("baseline parameters are valid")
    }

    pub fn with_step(mut self, step_hz: f64) -> Result<Self> {
        if !(step_hz > 0.0) || step_hz > self.span_hz {
            return Err(CoreError::InvalidParameter {
                name: "step_hz",
                message: format!(
                    "step must be positive and not exceed the span, got {step_hz}"
                ),
            });
        }
        self.step_hz = step_hz;
        Ok(self)
    }

    pub fn with_direction(mut self, direction: SweepDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_duration(self, duration_s: f64) -> Result<Self> {
        Self::new(self.center_hz, self.span_hz, duration_s)
            .map(|s| s.with_direction(self.direction))
            .and_then(|s| s.with_step(self.step_hz))
    }

    /// Recenter on a different frequency.
    pub fn with_center(mut self, center_hz: f64) -> Result<Self> {
        if !center_hz.is_finite() || center_hz <= self.span_hz / 2.0 {
            return Err(CoreError::InvalidParameter {
                name: "center_hz",
                message: format!("center must exceed half the span, got {center_hz}"),
            });
        }
        self.center_hz = center_hz;
        Ok(self)
    }

    pub fn center(&self) -> f64 {
        self.center_hz
    }

    pub fn span(&self) -> f64 {
        self.span_hz
    }

    pub fn duration(&self) -> f64 {
        self.duration_s
    }

    pub fn step(&self) -> f64 {
        self.step_hz
    }

    pub fn direction(&self) -> SweepDirection {
        self.direction
    }

    /// Signed sweep rate (Hz/s).
    pub fn rate(&self) -> f64 {
        let magnitude = self.span_hz / self.duration_s;
        match self.direction {
            SweepDirection::Up => magnitude,
            SweepDirection::Down => -magnitude,
        }
    }

    /// Number of discrete frequency steps.
    pub fn n_steps(&self) -> usize {
        (self.span_hz / self.step_hz).round().max(1.0) as usize
    }

    /// Time per step (s).
    pub fn dt(&self) -> f64 {
        self.duration_s / self.n_steps() as f64
    }

    /// First frequency of the sweep (Hz).
    pub fn start_frequency(&self) -> f64 {
        match self.direction {
            SweepDirection::Up => self.center_hz - self.span_hz / 2.0,
            SweepDirection::Down => self.center_hz + self.span_hz / 2.0,
        }
    }

    /// Last frequency of the sweep (Hz).
    pub fn end_frequency(&self) -> f64 {
        match self.direction {
            SweepDirection::Up => self.center_hz + self.span_hz / 2.0,
            SweepDirection::Down => self.center_hz - self.span_hz / 2.0,
        }
    }

    /// Drive frequency the i-th step's unitary is evaluated at (midpoint
    /// of the step's frequency interval).
    pub fn frequency_at_step(&self, i: usize) -> f64 {
        let signed_step = match self.direction {
            SweepDirection::Up => self.step_effective(),
            SweepDirection::Down => -self.step_effective(),
        };
        self.start_frequency() + (i as f64 + 0.5) * signed_step
    }

    /// Actual step size after rounding the span to a whole step count.
    fn step_effective(&self) -> f64 {
        self.span_hz / self.n_steps() as f64
    }
}

/// Pure state of the NV-13C pair in the fixed bare basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState(Vector4<Complex64>);

impl QuantumState {
    /// Wrap normalized amplitudes; rejects vectors whose norm deviates
    /// from 1 by more than 1e-9.
    pub fn new(amplitudes: Vector4<Complex64>) -> Result<Self> {
        let deviation = (amplitudes.norm() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(CoreError::NotNormalized { deviation });
        }
        Ok(Self(amplitudes))
    }

    /// Basis state.
    pub fn bare(state: BareState) -> Self {
        let mut v = Vector4::zeros();
        v[state.index()] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub fn amplitudes(&self) -> &Vector4<Complex64> {
        &self.0
    }

    /// Bare-basis populations.
    pub fn populations(&self) -> [f64; 4] {
        [
            self.0[0].norm_sqr(),
            self.0[1].norm_sqr(),
            self.0[2].norm_sqr(),
            self.0[3].norm_sqr(),
        ]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// State and population history over one sweep.
#[derive(Debug, Clone)]
pub struct SweepTrajectory {
    /// Sample times (s), starting at 0.
    pub times_s: Vec<f64>,
    /// Nominal swept frequency at each sample time (Hz).
    pub frequencies_hz: Vec<f64>,
    /// Populations in the continuity-labeled dressed basis, psi_1..psi_4.
    pub dressed_populations: Vec<[f64; 4]>,
    /// Populations in the bare basis, same sampling.
    pub bare_populations: Vec<[f64; 4]>,
    /// State at the end of the sweep.
    pub final_state: QuantumState,
    /// Dressed spectrum at the end frequency with continuity labels
    /// chained from the sweep start.
    pub final_spectrum: DressedSpectrum,
}

/// Propagate `initial` through `sweep` by stepped unitary evolution.
///
/// When `record` is set, populations are stored at every step (n_steps + 1
/// samples including t = 0); otherwise only the final state and spectrum
/// are kept.
pub fn propagate_sweep(
    initial: &QuantumState,
    sweep: &SweepProtocol,
    cond: &ExperimentConditions,
    hf: &HyperfineCoupling,
    record: bool,
) -> Result<SweepTrajectory> {
    let deviation = (initial.norm() - 1.0).abs();
    if deviation > NORM_TOL {
        return Err(CoreError::NotNormalized { deviation });
    }

    let n = sweep.n_steps();
    let dt = sweep.dt();
    let mut state = initial.amplitudes().clone_owned();

    // Labels are anchored in sorted order at the start frequency and
    // chained through the sweep by maximal-overlap assignment.
    let start_h = build_hamiltonian(sweep.start_frequency(), cond, hf);
    let (_, mut chain_vectors) = sorted_eigensystem(&start_h);
    let mut perm = [0usize, 1, 2, 3];

    let mut times = Vec::new();
    let mut freqs = Vec::new();
    let mut dressed = Vec::new();
    let mut bare = Vec::new();
    if record {
        times.reserve(n + 1);
        freqs.reserve(n + 1);
        dressed.reserve(n + 1);
        bare.reserve(n + 1);
        times.push(0.0);
        freqs.push(sweep.start_frequency());
        dressed.push(labeled_populations(&chain_vectors, &perm, &state));
        bare.push(bare_populations(&state));
    }

    for i in 0..n {
        let h = build_hamiltonian(sweep.frequency_at_step(i), cond, hf);
        let (values, vectors) = sorted_eigensystem(&h);

        // Chain labels before evolving; the step's propagator does not
        // change populations in its own eigenbasis.
        let (_, step_perm, _) = continuity_assignment(&chain_vectors, &vectors);
        let mut new_perm = [0usize; 4];
        for k in 0..4 {
            new_perm[k] = step_perm[perm[k]];
        }
        perm = new_perm;
        chain_vectors = vectors;

        // state <- V exp(-2 pi i D dt) V^H state
        let mut coeffs = vectors.adjoint() * state;
        for k in 0..4 {
            let phase = -2.0 * PI * values[k] * dt;
            coeffs[k] *= Complex64::new(phase.cos(), phase.sin());
        }
        state = vectors * coeffs;

        if record {
            times.push((i + 1) as f64 * dt);
            freqs.push(match sweep.direction() {
                SweepDirection::Up => sweep.start_frequency() + (i + 1) as f64 * sweep.step_effective(),
                SweepDirection::Down => sweep.start_frequency() - (i + 1) as f64 * sweep.step_effective(),
            });
            dressed.push(labeled_populations(&chain_vectors, &perm, &state));
            bare.push(bare_populations(&state));
        }
    }

    // Chain once more onto the exact end frequency.
    let end_h = build_hamiltonian(sweep.end_frequency(), cond, hf);
    let (end_values, end_vectors) = sorted_eigensystem(&end_h);
    let (_, step_perm, _) = continuity_assignment(&chain_vectors, &end_vectors);
    let mut end_perm = [0usize; 4];
    for k in 0..4 {
        end_perm[k] = step_perm[perm[k]];
    }
    let mut freqs_out = [0.0; 4];
    let mut cols = Matrix4::zeros();
    for k in 0..4 {
        freqs_out[k] = end_values[end_perm[k]];
        cols.set_column(k, &end_vectors.column(end_perm[k]));
    }
    let final_spectrum = DressedSpectrum::from_parts(freqs_out, cols, sweep.end_frequency());

    Ok(SweepTrajectory {
        times_s: times,
        frequencies_hz: freqs,
        dressed_populations: dressed,
        bare_populations: bare,
        final_state: QuantumState(state),
        final_spectrum,
    })
}

fn labeled_populations(
    vectors: &Matrix4<Complex64>,
    perm: &[usize; 4],
    state: &Vector4<Complex64>,
) -> [f64; 4] {
    let coeffs = vectors.adjoint() * state;
    [
        coeffs[perm[0]].norm_sqr(),
        coeffs[perm[1]].norm_sqr(),
        coeffs[perm[2]].norm_sqr(),
        coeffs[perm[3]].norm_sqr(),
    ]
}

fn bare_populations(state: &Vector4<Complex64>) -> [f64; 4] {
    [
        state[0].norm_sqr(),
        state[1].norm_sqr(),
        state[2].norm_sqr(),
        state[3].norm_sqr(),
    ]
}

/// An ordered pair of dressed labels (j -> k).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopPair {
    pub from: DressedLabel,
    pub to: DressedLabel,
}

impl HopPair {
    pub fn new(from: usize, to: usize) -> Result<Self> {
        let mk = |n: usize, name: &'static str| {
            DressedLabel::from_number(n).ok_or_else(|| CoreError::InvalidParameter {
                name,
                message: format!("dressed labels are 1..=4, got {n}"),
            })
        };
        Ok(Self {
            from: mk(from, "from")?,
            to: mk(to, "to")?,
        })
    }
}

/// Check that both sweep endpoints are far detuned from the NV transition:
/// at least ten times the largest of the Rabi frequency, |Azz| and fn.
fn check_far_detuned_window(
    sweep: &SweepProtocol,
    cond: &ExperimentConditions,
    hf: &HyperfineCoupling,
) -> Result<()> {
    let required = 10.0 * cond.rabi().max(hf.a_zz().abs()).max(cond.f_n());
    let margin = (sweep.start_frequency() - cond.f_plus())
        .abs()
        .min((sweep.end_frequency() - cond.f_plus()).abs());
    if margin < required {
        return Err(CoreError::WindowTooNarrow {
            margin_hz: margin,
            required_hz: required,
        });
    }
    Ok(())
}

/// Diabatic hopping probability between dressed labels over a sweep.
///
/// The bare state identified with label `pair.from` at the sweep start is
/// propagated through the sweep and projected onto label `pair.to` at the
/// sweep end (labels chained by overlap continuity).
pub fn hop_probability(
    pair: HopPair,
    sweep: &SweepProtocol,
    cond: &ExperimentConditions,
    hf: &HyperfineCoupling,
) -> Result<f64> {
    check_far_detuned_window(sweep, cond, hf)?;

    let start_h = build_hamiltonian(sweep.start_frequency(), cond, hf);
    let (_, start_vectors) = sorted_eigensystem(&start_h);
    let j = pair.from.index();
    let mut bare_index = 0usize;
    let mut overlap_sq = 0.0f64;
    for i in 0..4 {
        let w = start_vectors[(i, j)].norm_sqr();
        if w > overlap_sq {
            overlap_sq = w;
            bare_index = i;
        }
    }
    if overlap_sq <= FAR_DETUNED_OVERLAP {
        return Err(CoreError::FarDetunedIdentification {
            label: pair.from.number(),
            overlap_sq,
        });
    }

    let initial = QuantumState::bare(BareState::from_index(bare_index).unwrap());
    let trajectory = propagate_sweep(&initial, sweep, cond, hf, false)?;
    let target = trajectory.final_spectrum.vector(pair.to);
    let amplitude = target.dotc(trajectory.final_state.amplitudes());
    Ok(amplitude.norm_sqr())
}

/// Analytic Landau-Zener estimate `exp(-pi^2 gap^2 / |rate|)`.
pub fn analytic_hop_probability(gap_hz: f64, rate_hz_per_s: f64) -> Result<f64> {
    if rate_hz_per_s == 0.0 {
        return Err(CoreError::ZeroSweepRate);
    }
    Ok((-PI * PI * gap_hz * gap_hz / rate_hz_per_s.abs()).exp())
}

/// Parameter varied along a 1D hopping-probability map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Transverse hyperfine Azx (Hz).
    AZx,
    /// Axial hyperfine Azz (Hz).
    AZz,
    /// Rabi frequency (Hz).
    Rabi,
    /// Static field (T); recenters the sweep on the new NV transition.
    B0,
    /// Sweep rate magnitude (Hz/s); adjusts the sweep duration.
    Rate,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::AZx => "a_zx",
            SweepAxis::AZz => "a_zz",
            SweepAxis::Rabi => "rabi",
            SweepAxis::B0 => "b0",
            SweepAxis::Rate => "rate",
        }
    }
}

/// Baseline parameter set a map is varied around.
#[derive(Debug, Clone)]
pub struct MapBaseline {
    pub cond: ExperimentConditions,
    pub hf: HyperfineCoupling,
    pub sweep: SweepProtocol,
}

impl MapBaseline {
    fn apply_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut cell = self.clone();
        match axis {
            SweepAxis::AZx => {
                cell.hf = HyperfineCoupling::new(self.hf.a_zz(), value);
            }
            SweepAxis::AZz => {
                cell.hf = HyperfineCoupling::new(value, self.hf.a_zx());
            }
            SweepAxis::Rabi => {
                cell.cond = self.cond.with_rabi(value)?;
            }
            SweepAxis::B0 => {
                cell.cond = self.cond.with_b0(value)?;
                cell.sweep = cell.sweep.with_center(cell.cond.f_plus())?;
            }
            SweepAxis::Rate => {
                if !(value > 0.0) {
                    return Err(CoreError::InvalidParameter {
                        name: "rate",
                        message: format!("rate grid values must be positive, got {value}"),
                    });
                }
                cell.sweep = cell.sweep.with_duration(cell.sweep.span() / value)?;
            }
        }
        Ok(cell)
    }
}

/// Simulated and analytic hopping probabilities along one parameter axis.
#[derive(Debug, Clone)]
pub struct Curve1d {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub simulated: Vec<f64>,
    /// Eq.-(2)-style estimate from the scanned avoided-crossing gap.
    pub analytic: Vec<f64>,
}

/// Hopping probability versus one swept parameter, with the analytic
/// Landau-Zener companion curve computed from the scanned gap.
///
/// Cells are evaluated independently; the output order is fixed by the
/// grid regardless of scheduling.
pub fn sweep_map_1d(
    axis: SweepAxis,
    grid: &[f64],
    base: &MapBaseline,
    pair: HopPair,
) -> Result<Curve1d> {
    if grid.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            message: "grid must be non-empty".into(),
        });
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            message: "grid must be strictly increasing".into(),
        });
    }

    let cells: Result<Vec<(f64, f64)>> = grid
        .par_iter()
        .map(|&value| {
            let cell = base.apply_axis(axis, value)?;
            let simulated = hop_probability(pair, &cell.sweep, &cell.cond, &cell.hf)?;
            let window = (
                cell.sweep.center() - cell.sweep.span() / 2.0,
                cell.sweep.center() + cell.sweep.span() / 2.0,
            );
            let gap = crate::spinpair::avoided_crossing_gap(
                pair.from, pair.to, &cell.cond, &cell.hf, window,
            )?;
            let analytic = analytic_hop_probability(gap.gap_hz, cell.sweep.rate())?;
            Ok((simulated, analytic))
        })
        .collect();
    let cells = cells?;

    Ok(Curve1d {
        axis,
        values: grid.to_vec(),
        simulated: cells.iter().map(|c| c.0).collect(),
        analytic: cells.iter().map(|c| c.1).collect(),
    })
}

/// Second axis of a 2D map over (theta, .).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapSecondAxis {
    B0,
    Rabi,
    Rate,
}

impl MapSecondAxis {
    pub fn name(&self) -> &'static str {
        match self {
            MapSecondAxis::B0 => "b0",
            MapSecondAxis::Rabi => "rabi",
            MapSecondAxis::Rate => "rate",
        }
    }

    fn as_axis(&self) -> SweepAxis {
        match self {
            MapSecondAxis::B0 => SweepAxis::B0,
            MapSecondAxis::Rabi => SweepAxis::Rabi,
            MapSecondAxis::Rate => SweepAxis::Rate,
        }
    }
}

/// Hopping probability over a (theta, second-parameter) grid at fixed
/// dipolar magnitude A0.
#[derive(Debug, Clone)]
pub struct Map2d {
    pub a0_hz: f64,
    pub theta_rad: Vec<f64>,
    pub second: MapSecondAxis,
    pub second_values: Vec<f64>,
    /// Row-major probabilities, row = theta index, column = second index.
    pub probabilities: Vec<f64>,
}

impl Map2d {
    pub fn at(&self, theta_index: usize, second_index: usize) -> f64 {
        self.probabilities[theta_index * self.second_values.len() + second_index]
    }

    /// Maximum probability over theta for a fixed second-axis index.
    pub fn max_over_theta(&self, second_index: usize) -> f64 {
        (0..self.theta_rad.len())
            .map(|t| self.at(t, second_index))
            .fold(0.0, f64::max)
    }
}

/// Full 2D grid of hopping probabilities over polar angle and one further
/// parameter. Couplings are rebuilt from `(a0_hz, theta)` per cell.
pub fn sweep_map_2d(
    a0_hz: f64,
    theta_grid: &[f64],
    second: MapSecondAxis,
    second_grid: &[f64],
    base: &MapBaseline,
    pair: HopPair,
) -> Result<Map2d> {
    if theta_grid.is_empty() || second_grid.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            message: "grids must be non-empty".into(),
        });
    }

    let n2 = second_grid.len();
    let cells: Result<Vec<f64>> = (0..theta_grid.len() * n2)
        .into_par_iter()
        .map(|idx| {
            let theta = theta_grid[idx / n2];
            let value = second_grid[idx % n2];
            let mut cell = base.clone();
            cell.hf = HyperfineCoupling::from_magnitude(a0_hz, theta)?;
            let cell = cell.apply_axis(second.as_axis(), value)?;
            hop_probability(pair, &cell.sweep, &cell.cond, &cell.hf)
        })
        .collect();

    Ok(Map2d {
        a0_hz,
        theta_rad: theta_grid.to_vec(),
        second,
        second_values: second_grid.to_vec(),
        probabilities: cells?,
    })
}
