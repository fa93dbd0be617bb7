//! Experiment runners: validate a params block, run the computation, and
//! write artifacts.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;

use odnmr_core::analysis::{analyze_interferogram, DEFAULT_PEAK_REGION};
use odnmr_core::budget::{coil_fidelity, coil_precision, coil_snr, odnmr_budget, CoilBudgetInputs, OdnmrBudgetInputs};
use odnmr_core::constants::GAMMA_NUC_HZ_PER_T;
use odnmr_core::ensemble::{
    ensemble_hop_statistics, hyperfine_histogram, sample_sphere, shell_count_analytic,
};
use odnmr_core::fitkit::{
    fit_damped_cosine, fit_polarization_buildup, fit_stretched_exponential, EnvelopeVariant,
};
use odnmr_core::presets;
use odnmr_core::signal::{
    ramsey_interferogram, synthesize_readout_trace, EnvelopeModel, Interferogram,
    InterferogramMode, RamseyModel, SynthesisConfig, TraceConfig, DEFAULT_WINDOW_S,
};
use odnmr_core::spinpair::{build_hamiltonian, dressed_states, DressedLabel};
use odnmr_core::sweepsim::{
    propagate_sweep, sweep_map_1d, sweep_map_2d, MapBaseline, MapSecondAxis, QuantumState,
    SweepAxis, SweepProtocol,
};

use crate::config::{params_block, ConditionsSpec, CouplingSpec, GridSpec, SweepSpec};
use crate::error::CliError;
use crate::output::{fmt, read_csv_columns, write_json, CsvWriter};
use crate::plot;
use crate::units::{parse_quantity, Dimension};

/// Table serialization selected with --format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub plot: bool,
    pub format: TableFormat,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Write a column table as CSV or JSON per --format; returns the path.
    fn write_table(&self, name: &str, writer: &CsvWriter) -> Result<PathBuf, CliError> {
        match self.format {
            TableFormat::Csv => {
                let path = self.path(&format!("{name}.csv"));
                writer.write(&path)?;
                Ok(path)
            }
            TableFormat::Json => {
                let path = self.path(&format!("{name}.json"));
                let content = writer.content();
                let mut lines = content.lines();
                let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
                let rows: Vec<Vec<&str>> = lines
                    .filter(|l| !l.is_empty())
                    .map(|l| l.split(',').collect())
                    .collect();
                write_json(
                    &path,
                    &serde_json::to_string_pretty(&json!({
                        "columns": header,
                        "rows": rows,
                    }))
                    .expect("table serializes"),
                )?;
                Ok(path)
            }
        }
    }
}

pub fn run_experiment(
    experiment: &str,
    params: &serde_json::Value,
    ctx: &RunContext,
) -> Result<String, CliError> {
    match experiment {
        "dressed" => run_dressed(params, ctx),
        "sweep" => run_sweep(params, ctx),
        "map1d" => run_map1d(params, ctx),
        "map2d" => run_map2d(params, ctx),
        "ensemble" => run_ensemble(params, ctx),
        "ramsey-synth" => run_ramsey_synth(params, ctx),
        "ramsey-fit" => run_ramsey_fit(params, ctx),
        "spectrum" => run_spectrum(params, ctx),
        "envelope-fit" => run_envelope_fit(params, ctx),
        "buildup-fit" => run_buildup_fit(params, ctx),
        "budget" => run_budget(params, ctx),
        other => Err(CliError::validation_field(
            "experiment",
            format!("unknown experiment kind \"{other}\""),
        )),
    }
}

// ---------------------------------------------------------------------------
// dressed
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DressedParams {
    conditions: ConditionsSpec,
    coupling: CouplingSpec,
    /// Grid of drive-frequency detunings from the NV transition.
    detuning: GridSpec,
}

fn run_dressed(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: DressedParams = params_block(params)?;
    let cond = p.conditions.build()?;
    let hf = p.coupling.build()?;
    let detunings = p.detuning.build("detuning", Dimension::Frequency)?;

    let mut writer = CsvWriter::new(&[
        "frequency (Hz)",
        "nu1 (Hz)",
        "nu2 (Hz)",
        "nu3 (Hz)",
        "nu4 (Hz)",
    ]);
    let mut prev = None;
    let mut table: Vec<[f64; 4]> = Vec::with_capacity(detunings.len());
    for &d in &detunings {
        let f = cond.f_plus() + d;
        let spectrum = dressed_states(&build_hamiltonian(f, &cond, &hf), prev.as_ref())?;
        let nus = *spectrum.frequencies();
        writer.row(&[f, nus[0], nus[1], nus[2], nus[3]]);
        table.push(nus);
        prev = Some(spectrum);
    }
    let path = ctx.write_table("dressed", &writer)?;

    if ctx.plot {
        let series: Vec<Vec<f64>> = (0..4)
            .map(|k| table.iter().map(|row| row[k]).collect())
            .collect();
        let svg = plot::line_plot(
            "dressed-state frequencies",
            "drive detuning (Hz)",
            "eigenfrequency (Hz)",
            &detunings,
            &[
                ("psi1", &series[0]),
                ("psi2", &series[1]),
                ("psi3", &series[2]),
                ("psi4", &series[3]),
            ],
        );
        crate::output::write_text(&ctx.path("dressed.svg"), &svg)?;
    }
    Ok(format!(
        "dressed: {} points over [{}, {}] Hz detuning -> {}",
        detunings.len(),
        fmt(detunings[0]),
        fmt(*detunings.last().unwrap()),
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepParams {
    conditions: ConditionsSpec,
    coupling: CouplingSpec,
    sweep: SweepSpec,
    /// Dressed label whose sweep-start bare state is propagated
    /// ("psi1" .. "psi4"); defaults to psi2.
    #[serde(default)]
    initial: Option<String>,
}

fn parse_label(raw: &str) -> Result<DressedLabel, CliError> {
    let n = match raw {
        "psi1" => 1,
        "psi2" => 2,
        "psi3" => 3,
        "psi4" => 4,
        other => {
            return Err(CliError::validation_field(
                "initial",
                format!("expected psi1..psi4, got \"{other}\""),
            ))
        }
    };
    Ok(DressedLabel::from_number(n).unwrap())
}

fn run_sweep(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: SweepParams = params_block(params)?;
    let cond = p.conditions.build()?;
    let hf = p.coupling.build()?;
    let sweep = p.sweep.build(cond.f_plus())?;
    let label = parse_label(p.initial.as_deref().unwrap_or("psi2"))?;

    // identify the bare state carrying the requested label at sweep start
    let start = dressed_states(&build_hamiltonian(sweep.start_frequency(), &cond, &hf), None)?;
    let (bare, overlap_sq) = start.bare_identities()[label.index()];
    if overlap_sq <= 0.99 {
        return Err(CliError::Numerical {
            message: format!(
                "label {} is not far detuned at the sweep start (overlap^2 = {overlap_sq:.4})",
                label.number()
            ),
        });
    }

    let trajectory = propagate_sweep(&QuantumState::bare(bare), &sweep, &cond, &hf, true)?;
    let mut writer = CsvWriter::new(&[
        "time (s)",
        "frequency (Hz)",
        "p_psi1",
        "p_psi2",
        "p_psi3",
        "p_psi4",
        "p_0up",
        "p_0down",
        "p_1up",
        "p_1down",
    ]);
    for i in 0..trajectory.times_s.len() {
        let d = trajectory.dressed_populations[i];
        let b = trajectory.bare_populations[i];
        writer.row(&[
            trajectory.times_s[i],
            trajectory.frequencies_hz[i],
            d[0],
            d[1],
            d[2],
            d[3],
            b[0],
            b[1],
            b[2],
            b[3],
        ]);
    }
    let path = ctx.write_table("trajectory", &writer)?;

    let final_dressed = trajectory.dressed_populations.last().unwrap();
    write_json(
        &ctx.path("sweep_summary.json"),
        &serde_json::to_string_pretty(&json!({
            "initial_label": label.number(),
            "initial_bare_state": bare.label(),
            "final_dressed_populations": final_dressed,
            "final_bare_populations": trajectory.bare_populations.last().unwrap(),
            "norm_drift": (trajectory.final_state.norm() - 1.0).abs(),
        }))
        .expect("summary serializes"),
    )?;

    if ctx.plot {
        let series: Vec<Vec<f64>> = (0..4)
            .map(|k| trajectory.dressed_populations.iter().map(|r| r[k]).collect())
            .collect();
        let svg = plot::line_plot(
            "dressed populations during the sweep",
            "time (s)",
            "population",
            &trajectory.times_s,
            &[
                ("psi1", &series[0]),
                ("psi2", &series[1]),
                ("psi3", &series[2]),
                ("psi4", &series[3]),
            ],
        );
        crate::output::write_text(&ctx.path("trajectory.svg"), &svg)?;
    }

    Ok(format!(
        "sweep: psi{} from {} -> final populations [{}] -> {}",
        label.number(),
        bare.label(),
        final_dressed.map(|p| format!("{p:.4}")).join(", "),
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// map1d
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Map1dParams {
    conditions: ConditionsSpec,
    coupling: CouplingSpec,
    sweep: SweepSpec,
    axis: String,
    grid: GridSpec,
    pair: Vec<usize>,
}

fn parse_axis(raw: &str) -> Result<(SweepAxis, Dimension, &'static str), CliError> {
    match raw {
        "a_zx" => Ok((SweepAxis::AZx, Dimension::Frequency, "a_zx (Hz)")),
        "a_zz" => Ok((SweepAxis::AZz, Dimension::Frequency, "a_zz (Hz)")),
        "rabi" => Ok((SweepAxis::Rabi, Dimension::Frequency, "rabi (Hz)")),
        "b0" => Ok((SweepAxis::B0, Dimension::Field, "b0 (T)")),
        "rate" => Ok((SweepAxis::Rate, Dimension::SweepRate, "rate (Hz/s)")),
        other => Err(CliError::validation_field(
            "axis",
            format!("unknown map axis \"{other}\""),
        )),
    }
}

fn run_map1d(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: Map1dParams = params_block(params)?;
    let (axis, dim, column) = parse_axis(&p.axis)?;
    let cond = p.conditions.build()?;
    let base = MapBaseline {
        hf: p.coupling.build()?,
        sweep: p.sweep.build(cond.f_plus())?,
        cond,
    };
    let grid = p.grid.build("grid", dim)?;
    let pair = crate::config::parse_pair(&p.pair)?;

    let curve = sweep_map_1d(axis, &grid, &base, pair)?;
    let mut writer = CsvWriter::new(&[column, "p_simulated", "p_analytic"]);
    for i in 0..grid.len() {
        writer.row(&[curve.values[i], curve.simulated[i], curve.analytic[i]]);
    }
    let name = format!("map1d_{}", axis.name());
    let path = ctx.write_table(&name, &writer)?;

    if ctx.plot {
        let svg = plot::line_plot(
            &format!("hopping probability vs {}", axis.name()),
            column,
            "probability",
            &curve.values,
            &[
                ("simulated", &curve.simulated),
                ("analytic", &curve.analytic),
            ],
        );
        crate::output::write_text(&ctx.path(&format!("{name}.svg")), &svg)?;
    }
    let max = curve.simulated.iter().cloned().fold(0.0f64, f64::max);
    Ok(format!(
        "map1d[{}]: {} cells, max P{}{} = {max:.4} -> {}",
        axis.name(),
        grid.len(),
        pair.from.number(),
        pair.to.number(),
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// map2d
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Map2dParams {
    conditions: ConditionsSpec,
    a0: String,
    theta: GridSpec,
    second_axis: String,
    second: GridSpec,
    sweep: SweepSpec,
    pair: Vec<usize>,
}

fn parse_second_axis(raw: &str) -> Result<(MapSecondAxis, Dimension, &'static str), CliError> {
    match raw {
        "b0" => Ok((MapSecondAxis::B0, Dimension::Field, "b0 (T)")),
        "rabi" => Ok((MapSecondAxis::Rabi, Dimension::Frequency, "rabi (Hz)")),
        "rate" => Ok((MapSecondAxis::Rate, Dimension::SweepRate, "rate (Hz/s)")),
        other => Err(CliError::validation_field(
            "second_axis",
            format!("unknown second axis \"{other}\""),
        )),
    }
}

/// Matrix CSV: one row per second-axis value, one column per theta.
fn write_map2d(
    ctx: &RunContext,
    name: &str,
    row_label: &str,
    map: &odnmr_core::sweepsim::Map2d,
) -> Result<PathBuf, CliError> {
    let mut header: Vec<String> = vec![format!("{row_label}\\theta (rad)")];
    header.extend(map.theta_rad.iter().map(|&t| fmt(t)));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut writer = CsvWriter::new(&header_refs);
    for (si, &sv) in map.second_values.iter().enumerate() {
        let mut cells = vec![fmt(sv)];
        for ti in 0..map.theta_rad.len() {
            cells.push(fmt(map.at(ti, si)));
        }
        writer.row_cells(&cells);
    }
    ctx.write_table(name, &writer)
}

fn run_map2d(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: Map2dParams = params_block(params)?;
    let (second, dim, row_label) = parse_second_axis(&p.second_axis)?;
    let a0 = parse_quantity("a0", &p.a0, Dimension::Frequency)?;
    let theta = p.theta.build("theta", Dimension::Angle)?;
    let second_grid = p.second.build("second", dim)?;
    let cond = p.conditions.build()?;
    let base = MapBaseline {
        hf: presets::baseline_coupling(),
        sweep: p.sweep.build(cond.f_plus())?,
        cond,
    };
    let pair = crate::config::parse_pair(&p.pair)?;

    let map = sweep_map_2d(a0, &theta, second, &second_grid, &base, pair)?;
    let name = format!("map2d_theta_{}", second.name());
    let path = write_map2d(ctx, &name, row_label, &map)?;

    if ctx.plot {
        let rows: Vec<Vec<f64>> = (0..second_grid.len())
            .map(|si| (0..theta.len()).map(|ti| map.at(ti, si)).collect())
            .collect();
        let svg = plot::heatmap(
            &format!("P{}{} at A0 = {a0:.3e} Hz", pair.from.number(), pair.to.number()),
            "theta (rad)",
            row_label,
            &theta,
            &second_grid,
            &rows,
        );
        crate::output::write_text(&ctx.path(&format!("{name}.svg")), &svg)?;
    }

    let max = map.probabilities.iter().cloned().fold(0.0f64, f64::max);
    Ok(format!(
        "map2d[theta x {}]: {}x{} cells at A0 = {} Hz, max = {max:.4} -> {}",
        second.name(),
        theta.len(),
        second_grid.len(),
        fmt(a0),
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleParams {
    runs: u32,
    radius: String,
    density: String,
    bin_width: String,
    a0_max: String,
    #[serde(default)]
    hops: Option<EnsembleHopsSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleHopsSpec {
    conditions: ConditionsSpec,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    pair: Vec<usize>,
    #[serde(default)]
    threshold: Option<f64>,
}

fn run_ensemble(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: EnsembleParams = params_block(params)?;
    let radius = parse_quantity("radius", &p.radius, Dimension::Length)?;
    let density = parse_quantity("density", &p.density, Dimension::NumberDensity)?;
    let bin_width = parse_quantity("bin_width", &p.bin_width, Dimension::Frequency)?;
    let a0_max = parse_quantity("a0_max", &p.a0_max, Dimension::Frequency)?;

    let hist = hyperfine_histogram(p.runs, ctx.seed, radius, density, bin_width, a0_max)?;
    let mut writer = CsvWriter::new(&["bin_center (Hz)", "mean_count", "analytic_count"]);
    for k in 0..hist.n_bins() {
        let center = hist.bin_center(k);
        let analytic = shell_count_analytic(center.max(bin_width / 2.0), bin_width, density)
            .unwrap_or(0.0);
        writer.row(&[center, hist.mean_counts[k], analytic]);
    }
    let path = ctx.write_table("histogram", &writer)?;
    let slope = hist.log_log_slope(1.0);

    let mut summary = json!({
        "runs": p.runs,
        "spins_per_run": odnmr_core::ensemble::expected_spin_count(radius, density),
        "log_log_slope": slope,
    });

    let mut hop_note = String::new();
    if let Some(hops) = &p.hops {
        let cond = hops.conditions.build()?;
        let sweep = match &hops.sweep {
            Some(s) => s.build(cond.f_plus())?,
            None => SweepProtocol::baseline(&cond),
        };
        let pair = crate::config::parse_pair(&hops.pair)?;
        let threshold = hops.threshold.unwrap_or(0.1);
        let sample = sample_sphere(ctx.seed, radius, density)?;
        let stats = ensemble_hop_statistics(&sample, &sweep, &cond, pair, threshold)?;

        let mut spins = CsvWriter::new(&["a0 (Hz)", "theta (rad)", "probability"]);
        for spin in &stats.per_spin {
            if let Some(prob) = spin.probability {
                spins.row(&[spin.a0_hz, spin.theta_rad, prob]);
            }
        }
        ctx.write_table("ensemble_hops", &spins)?;
        summary["hops"] = json!({
            "evaluated": stats.evaluated,
            "skipped": stats.skipped,
            "mean_probability": stats.mean,
            "threshold": stats.threshold,
            "count_above_threshold": stats.count_above,
        });
        hop_note = format!(
            ", {} of {} spins above P = {}",
            stats.count_above, stats.evaluated, threshold
        );
    }
    write_json(
        &ctx.path("ensemble_summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;

    Ok(format!(
        "ensemble: {} runs, log-log slope {}{} -> {}",
        p.runs,
        slope.map_or("n/a".to_string(), |s| format!("{s:.3}")),
        hop_note,
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// ramsey-synth / ramsey-fit / spectrum
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RamseySynthParams {
    visibility: String,
    detuning: String,
    t2_star: String,
    #[serde(default)]
    offset: Option<String>,
    tau: GridSpec,
    /// "analytic" or "synthesis".
    mode: String,
    #[serde(default)]
    synthesis: Option<SynthesisSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthesisSpec {
    t_e2: String,
    #[serde(default)]
    stretch: Option<f64>,
    #[serde(default)]
    dt: Option<String>,
    #[serde(default)]
    duration: Option<String>,
    #[serde(default)]
    noise_sigma: Option<String>,
    #[serde(default)]
    window: Option<String>,
}

impl SynthesisSpec {
    fn build(&self, seed: u64) -> Result<SynthesisConfig, CliError> {
        let stretch = self.stretch.unwrap_or(0.3);
        let t_e2 = parse_quantity("synthesis.t_e2", &self.t_e2, Dimension::Time)?;
        let decay_time = t_e2 / 2f64.powf(1.0 / stretch);
        let shape = EnvelopeModel::new(1.0, decay_time, stretch)
            .map_err(|e| CliError::validation_field("synthesis", e.to_string()))?;
        let dt = match &self.dt {
            Some(s) => parse_quantity("synthesis.dt", s, Dimension::Time)?,
            None => 1e-3,
        };
        let duration = match &self.duration {
            Some(s) => parse_quantity("synthesis.duration", s, Dimension::Time)?,
            None => 0.4,
        };
        let noise_sigma = match &self.noise_sigma {
            Some(s) => parse_quantity("synthesis.noise_sigma", s, Dimension::Fraction)?,
            None => 0.0,
        };
        let window = match &self.window {
            Some(s) => parse_quantity("synthesis.window", s, Dimension::Time)?,
            None => DEFAULT_WINDOW_S,
        };
        Ok(SynthesisConfig {
            shape,
            trace: TraceConfig {
                dt_s: dt,
                n_samples: (duration / dt).round() as usize,
                noise_sigma,
                seed,
            },
            window_s: window,
        })
    }
}

fn write_interferogram(
    ctx: &RunContext,
    name: &str,
    ifg: &Interferogram,
) -> Result<PathBuf, CliError> {
    let mut writer = CsvWriter::new(&["tau (s)", "amplitude (frac)"]);
    for (t, a) in ifg.tau_s.iter().zip(ifg.amplitude.iter()) {
        writer.row(&[*t, *a]);
    }
    ctx.write_table(name, &writer)
}

fn run_ramsey_synth(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: RamseySynthParams = params_block(params)?;
    let model = RamseyModel::new(
        parse_quantity("visibility", &p.visibility, Dimension::Fraction)?,
        parse_quantity("detuning", &p.detuning, Dimension::Frequency)?,
        parse_quantity("t2_star", &p.t2_star, Dimension::Time)?,
        match &p.offset {
            Some(s) => parse_quantity("offset", s, Dimension::Fraction)?,
            None => 0.0,
        },
    )
    .map_err(|e| CliError::validation_field("t2_star", e.to_string()))?;
    let tau = p.tau.build("tau", Dimension::Time)?;

    let mode = match p.mode.as_str() {
        "analytic" => InterferogramMode::Analytic,
        "synthesis" => {
            let spec = p.synthesis.as_ref().ok_or_else(|| {
                CliError::validation_field("synthesis", "required when mode = \"synthesis\"")
            })?;
            InterferogramMode::Synthesis(spec.build(ctx.seed)?)
        }
        other => {
            return Err(CliError::validation_field(
                "mode",
                format!("expected \"analytic\" or \"synthesis\", got \"{other}\""),
            ))
        }
    };

    let ifg = ramsey_interferogram(&tau, &model, &mode)?;
    let path = write_interferogram(ctx, "interferogram", &ifg)?;
    if ctx.plot {
        let svg = plot::line_plot(
            "Ramsey interferogram",
            "tau (s)",
            "amplitude (frac)",
            &ifg.tau_s,
            &[("amplitude", &ifg.amplitude)],
        );
        crate::output::write_text(&ctx.path("interferogram.svg"), &svg)?;
    }
    Ok(format!(
        "ramsey-synth: {} points ({} mode) -> {}",
        tau.len(),
        p.mode,
        path.display()
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RamseyFitParams {
    input: String,
    #[serde(default)]
    with_offset: Option<bool>,
}

fn load_interferogram(path: &Path) -> Result<Interferogram, CliError> {
    let cols = read_csv_columns(path, 2)?;
    Ok(Interferogram {
        tau_s: cols[0].clone(),
        amplitude: cols[1].clone(),
    })
}

fn check_converged(fit: &odnmr_core::fitkit::FitResult) -> Result<(), CliError> {
    if fit.converged {
        Ok(())
    } else {
        Err(CliError::Numerical {
            message: format!("fit `{}` did not converge: {}", fit.model, fit.message),
        })
    }
}

fn run_ramsey_fit(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: RamseyFitParams = params_block(params)?;
    let ifg = load_interferogram(Path::new(&p.input))?;
    let fit = fit_damped_cosine(&ifg.tau_s, &ifg.amplitude, p.with_offset.unwrap_or(true))?;
    check_converged(&fit)?;
    let path = ctx.path("ramsey_fit.json");
    write_json(&path, &fit.to_json())?;
    Ok(format!(
        "ramsey-fit: |A| = {:.4e}, delta = {:.2} Hz, T2* = {:.4e} s -> {}",
        fit.value("visibility").unwrap_or(f64::NAN).abs(),
        fit.value("detuning_hz").unwrap_or(f64::NAN),
        fit.value("t2_star_s").unwrap_or(f64::NAN),
        path.display()
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumParams {
    input: String,
    #[serde(default)]
    carrier: Option<String>,
    #[serde(default)]
    region_halfwidths: Option<f64>,
}

fn run_spectrum(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: SpectrumParams = params_block(params)?;
    let carrier = match &p.carrier {
        Some(s) => parse_quantity("carrier", s, Dimension::Frequency)?,
        None => 0.0,
    };
    let ifg = load_interferogram(Path::new(&p.input))?;
    let analysis =
        analyze_interferogram(&ifg, p.region_halfwidths.unwrap_or(DEFAULT_PEAK_REGION))?;
    check_converged(&analysis.ramsey)?;
    check_converged(&analysis.lorentzian)?;

    let mut writer = CsvWriter::new(&["frequency (Hz)", "real", "imag"]);
    for k in 0..analysis.spectrum.frequencies_hz.len() {
        writer.row(&[
            carrier + analysis.spectrum.frequencies_hz[k],
            analysis.spectrum.real[k],
            analysis.spectrum.imag[k],
        ]);
    }
    let spec_path = ctx.write_table("spectrum", &writer)?;

    let center = analysis.lorentzian.value("center_hz").unwrap_or(f64::NAN);
    let report = json!({
        "carrier_hz": carrier,
        "nmr_frequency_hz": carrier + center,
        "phase_rad": analysis.spectrum.phase_rad,
        "ramsey_fit": serde_json::from_str::<serde_json::Value>(&analysis.ramsey.to_json()).unwrap(),
        "lorentzian_fit": serde_json::from_str::<serde_json::Value>(&analysis.lorentzian.to_json()).unwrap(),
    });
    write_json(
        &ctx.path("spectrum_fit.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    if ctx.plot {
        let svg = plot::line_plot(
            "NMR spectrum",
            "frequency (Hz)",
            "phased amplitude",
            &analysis.spectrum.frequencies_hz,
            &[
                ("real", &analysis.spectrum.real),
                ("imag", &analysis.spectrum.imag),
            ],
        );
        crate::output::write_text(&ctx.path("spectrum.svg"), &svg)?;
    }
    Ok(format!(
        "spectrum: center = {} Hz, FWHM = {:.2} Hz -> {}",
        fmt(carrier + center),
        analysis.lorentzian.value("fwhm_hz").unwrap_or(f64::NAN),
        spec_path.display()
    ))
}

// ---------------------------------------------------------------------------
// envelope-fit / buildup-fit
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeFitParams {
    #[serde(default)]
    input: Option<String>,
    #[serde(default)]
    synth: Option<EnvelopeSynthSpec>,
    variant: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeSynthSpec {
    amplitude: f64,
    t_e2: String,
    #[serde(default)]
    stretch: Option<f64>,
    #[serde(default)]
    noise_sigma: Option<f64>,
    #[serde(default)]
    dt: Option<String>,
    #[serde(default)]
    duration: Option<String>,
}

fn run_envelope_fit(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: EnvelopeFitParams = params_block(params)?;
    let variant = match p.variant.as_str() {
        "f1" => EnvelopeVariant::F1,
        "f2" => EnvelopeVariant::F2,
        "f3" => EnvelopeVariant::F3,
        other => {
            return Err(CliError::validation_field(
                "variant",
                format!("expected f1, f2, or f3, got \"{other}\""),
            ))
        }
    };

    let (times, magnitudes) = match (&p.input, &p.synth) {
        (Some(input), None) => {
            let cols = read_csv_columns(Path::new(input), 2)?;
            (cols[0].clone(), cols[1].clone())
        }
        (None, Some(synth)) => {
            let stretch = synth.stretch.unwrap_or(0.3);
            let t_e2 = parse_quantity("synth.t_e2", &synth.t_e2, Dimension::Time)?;
            let env = EnvelopeModel::new(synth.amplitude, t_e2 / 2f64.powf(1.0 / stretch), stretch)
                .map_err(|e| CliError::validation_field("synth", e.to_string()))?;
            let dt = match &synth.dt {
                Some(s) => parse_quantity("synth.dt", s, Dimension::Time)?,
                None => 1e-3,
            };
            let duration = match &synth.duration {
                Some(s) => parse_quantity("synth.duration", s, Dimension::Time)?,
                None => 0.4,
            };
            let cfg = TraceConfig {
                dt_s: dt,
                n_samples: (duration / dt).round() as usize,
                noise_sigma: synth.noise_sigma.unwrap_or(0.0),
                seed: ctx.seed,
            };
            let trace = synthesize_readout_trace(1.0, &env, &cfg)?;
            let (t, m) = odnmr_core::signal::extract_envelope(&trace)?;
            let mut writer = CsvWriter::new(&["time (s)", "magnitude"]);
            for (ti, mi) in t.iter().zip(m.iter()) {
                writer.row(&[*ti, *mi]);
            }
            ctx.write_table("envelope", &writer)?;
            (t, m)
        }
        _ => {
            return Err(CliError::validation_field(
                "input",
                "give exactly one of `input` (CSV path) or `synth`",
            ))
        }
    };

    let fit = fit_stretched_exponential(&times, &magnitudes, variant)?;
    check_converged(&fit)?;
    let path = ctx.path("envelope_fit.json");
    write_json(&path, &fit.to_json())?;
    Ok(format!(
        "envelope-fit[{}]: a = {:.4}, T_e2 = {:.4e} s -> {}",
        variant.name(),
        fit.value("amplitude").unwrap_or(f64::NAN),
        fit.value("t_e2_s").unwrap_or(f64::NAN),
        path.display()
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildupFitParams {
    #[serde(default)]
    input: Option<String>,
    #[serde(default)]
    synth: Option<BuildupSynthSpec>,
    #[serde(default)]
    fix_beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildupSynthSpec {
    a_sat: String,
    t_pol: String,
    beta: f64,
    t: GridSpec,
    #[serde(default)]
    noise_sigma: Option<String>,
}

fn run_buildup_fit(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: BuildupFitParams = params_block(params)?;
    let (times, visibility) = match (&p.input, &p.synth) {
        (Some(input), None) => {
            let cols = read_csv_columns(Path::new(input), 2)?;
            (cols[0].clone(), cols[1].clone())
        }
        (None, Some(synth)) => {
            let a_sat = parse_quantity("synth.a_sat", &synth.a_sat, Dimension::Fraction)?;
            let t_pol = parse_quantity("synth.t_pol", &synth.t_pol, Dimension::Time)?;
            let t_p = t_pol / 2f64.powf(1.0 / synth.beta);
            let noise = match &synth.noise_sigma {
                Some(s) => parse_quantity("synth.noise_sigma", s, Dimension::Fraction)?,
                None => 0.0,
            };
            let t = synth.t.build("synth.t", Dimension::Time)?;
            let mut y: Vec<f64> = t
                .iter()
                .map(|&ti| a_sat * (1.0 - (-(ti / t_p).powf(synth.beta)).exp()))
                .collect();
            odnmr_core::signal::add_gaussian_noise(&mut y, noise, ctx.seed)
                .map_err(|e| CliError::validation_field("synth.noise_sigma", e.to_string()))?;
            let mut writer = CsvWriter::new(&["time (s)", "visibility (frac)"]);
            for (ti, yi) in t.iter().zip(y.iter()) {
                writer.row(&[*ti, *yi]);
            }
            ctx.write_table("buildup", &writer)?;
            (t, y)
        }
        _ => {
            return Err(CliError::validation_field(
                "input",
                "give exactly one of `input` (CSV path) or `synth`",
            ))
        }
    };

    let fit = fit_polarization_buildup(&times, &visibility, p.fix_beta)?;
    check_converged(&fit)?;
    let path = ctx.path("buildup_fit.json");
    write_json(&path, &fit.to_json())?;
    Ok(format!(
        "buildup-fit: A_sat = {:.4e}, T_pol = {:.4e} s -> {}",
        fit.value("a_sat").unwrap_or(f64::NAN),
        fit.value("t_pol_s").unwrap_or(f64::NAN),
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// budget
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetParams {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    odnmr: Option<OdnmrSpec>,
    #[serde(default)]
    coil: Option<CoilSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdnmrSpec {
    visibility: String,
    photons_per_spin: f64,
    n_nv: f64,
    n_rep: f64,
    t2_star: String,
    t_pol: String,
    t_read: String,
    total_time: String,
}

impl OdnmrSpec {
    fn build(&self) -> Result<OdnmrBudgetInputs, CliError> {
        Ok(OdnmrBudgetInputs {
            visibility: parse_quantity("odnmr.visibility", &self.visibility, Dimension::Fraction)?,
            photons_per_spin: self.photons_per_spin,
            n_nv: self.n_nv,
            n_rep: self.n_rep,
            t2_star_s: parse_quantity("odnmr.t2_star", &self.t2_star, Dimension::Time)?,
            t_pol_s: parse_quantity("odnmr.t_pol", &self.t_pol, Dimension::Time)?,
            t_read_s: parse_quantity("odnmr.t_read", &self.t_read, Dimension::Time)?,
            total_time_s: parse_quantity("odnmr.total_time", &self.total_time, Dimension::Time)?,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoilSpec {
    #[serde(default)]
    geometry_factor: Option<f64>,
    #[serde(default)]
    fill_factor: Option<f64>,
    quality: f64,
    coil_temp: String,
    bandwidth: String,
    b0: String,
    rho_nuc: String,
    #[serde(default)]
    gamma_nuc: Option<String>,
    coil_volume: String,
    t2_star: String,
}

impl CoilSpec {
    fn build(&self) -> Result<(CoilBudgetInputs, f64), CliError> {
        let gamma = match &self.gamma_nuc {
            Some(s) => {
                parse_quantity("coil.gamma_nuc", s, Dimension::SweepRate)? // Hz/T shares the Hz-per-x table
            }
            None => GAMMA_NUC_HZ_PER_T,
        };
        let inputs = CoilBudgetInputs {
            geometry_factor: self.geometry_factor.unwrap_or(1.0),
            fill_factor: self.fill_factor.unwrap_or(1.0),
            quality: self.quality,
            coil_temp_k: parse_quantity("coil.coil_temp", &self.coil_temp, Dimension::Temperature)?,
            bandwidth_hz: parse_quantity("coil.bandwidth", &self.bandwidth, Dimension::Frequency)?,
            b0_t: parse_quantity("coil.b0", &self.b0, Dimension::Field)?,
            rho_nuc_per_m3: parse_quantity("coil.rho_nuc", &self.rho_nuc, Dimension::NumberDensity)?
                * 1e27,
            gamma_nuc_hz_per_t: gamma,
            coil_volume_m3: parse_quantity("coil.coil_volume", &self.coil_volume, Dimension::Volume)?,
        };
        let t2 = parse_quantity("coil.t2_star", &self.t2_star, Dimension::Time)?;
        Ok((inputs, t2))
    }
}

fn run_budget(params: &serde_json::Value, ctx: &RunContext) -> Result<String, CliError> {
    let p: BudgetParams = params_block(params)?;
    let odnmr_inputs = match (&p.preset, &p.odnmr) {
        (Some(name), None) => {
            if name == presets::DISCUSSION_BUDGET_NAME {
                Some(presets::discussion_budget())
            } else {
                return Err(CliError::validation_field(
                    "preset",
                    format!(
                        "unknown preset \"{name}\" (available: {})",
                        presets::DISCUSSION_BUDGET_NAME
                    ),
                ));
            }
        }
        (None, Some(spec)) => Some(spec.build()?),
        (None, None) => None,
        (Some(_), Some(_)) => {
            return Err(CliError::validation_field(
                "preset",
                "give either a preset or explicit odnmr inputs, not both",
            ))
        }
    };

    let mut report = json!({});
    let mut notes = Vec::new();
    if let Some(inputs) = &odnmr_inputs {
        let budget = odnmr_budget(inputs)?;
        report["odnmr"] =
            serde_json::from_str(&budget.to_json()).expect("budget report round-trips");
        notes.push(format!(
            "delta_f = {:.3e} Hz, ARW = {:.3} deg/sqrt(s)",
            budget.delta_f_hz, budget.arw_deg_per_sqrt_s
        ));
    }
    if let Some(coil) = &p.coil {
        let (inputs, t2) = coil.build()?;
        let snr = coil_snr(&inputs)?;
        let fidelity = coil_fidelity(&inputs)?;
        report["coil"] = json!({
            "inputs": inputs,
            "magnetization_a_per_m": odnmr_core::budget::coil_magnetization(
                inputs.rho_nuc_per_m3,
                inputs.gamma_nuc_hz_per_t
            ),
            "snr": snr,
            "fidelity": fidelity,
            "delta_f_hz": coil_precision(snr, t2)?,
            "t2_star_s": t2,
        });
        notes.push(format!("coil fidelity = {fidelity:.3e}"));
    }
    if odnmr_inputs.is_none() && p.coil.is_none() {
        return Err(CliError::validation_field(
            "params",
            "budget needs a preset, odnmr inputs, or coil inputs",
        ));
    }

    let path = ctx.path("budget.json");
    write_json(
        &path,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(format!("budget: {} -> {}", notes.join("; "), path.display()))
}
