//! Run configuration: JSON with mandatory unit suffixes and strict field
//! checking. Unknown keys are rejected at every level.

use serde::Deserialize;

use odnmr_core::spinpair::{ExperimentConditions, HyperfineCoupling};
use odnmr_core::sweepsim::{SweepDirection, SweepProtocol};

use crate::error::CliError;
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// One of: dressed, sweep, map1d, map2d, ensemble, ramsey-synth,
    /// ramsey-fit, spectrum, envelope-fit, buildup-fit, budget.
    pub experiment: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory; overridden by --out.
    #[serde(default)]
    pub output: Option<String>,
    /// Emit SVG plots alongside tables.
    #[serde(default)]
    pub plot: bool,
    pub params: serde_json::Value,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }
}

/// Deserialize an experiment's params block, surfacing serde's message
/// (which names unknown/missing fields) as a validation error.
pub fn params_block<T: serde::de::DeserializeOwned>(
    value: &serde_json::Value,
) -> Result<T, CliError> {
    serde_json::from_value(value.clone())
        .map_err(|e| CliError::validation_field("params", e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSpec {
    pub b0: String,
    pub rabi: String,
    #[serde(default)]
    pub f_plus: Option<String>,
}

impl ConditionsSpec {
    pub fn build(&self) -> Result<ExperimentConditions, CliError> {
        let b0 = parse_quantity("b0", &self.b0, Dimension::Field)?;
        let rabi = parse_quantity("rabi", &self.rabi, Dimension::Frequency)?;
        let mut cond = ExperimentConditions::new(b0, rabi)
            .map_err(|e| CliError::validation_field("b0/rabi", e.to_string()))?;
        if let Some(f_plus) = &self.f_plus {
            let f = parse_quantity("f_plus", f_plus, Dimension::Frequency)?;
            cond = cond
                .with_f_plus(f)
                .map_err(|e| CliError::validation_field("f_plus", e.to_string()))?;
        }
        Ok(cond)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(default)]
    pub a_zz: Option<String>,
    #[serde(default)]
    pub a_zx: Option<String>,
    #[serde(default)]
    pub a0: Option<String>,
    #[serde(default)]
    pub r: Option<String>,
    #[serde(default)]
    pub theta: Option<String>,
}

impl CouplingSpec {
    pub fn build(&self) -> Result<HyperfineCoupling, CliError> {
        match (&self.a_zz, &self.a_zx, &self.a0, &self.r, &self.theta) {
            (Some(azz), Some(azx), None, None, None) => {
                let azz = parse_quantity("coupling.a_zz", azz, Dimension::Frequency)?;
                let azx = parse_quantity("coupling.a_zx", azx, Dimension::Frequency)?;
                Ok(HyperfineCoupling::new(azz, azx))
            }
            (None, None, Some(a0), None, Some(theta)) => {
                let a0 = parse_quantity("coupling.a0", a0, Dimension::Frequency)?;
                let theta = parse_quantity("coupling.theta", theta, Dimension::Angle)?;
                HyperfineCoupling::from_magnitude(a0, theta)
                    .map_err(|e| CliError::validation_field("coupling.a0", e.to_string()))
            }
            (None, None, None, Some(r), Some(theta)) => {
                let r = parse_quantity("coupling.r", r, Dimension::Length)?;
                let theta = parse_quantity("coupling.theta", theta, Dimension::Angle)?;
                HyperfineCoupling::from_distance(r, theta)
                    .map_err(|e| CliError::validation_field("coupling.r", e.to_string()))
            }
            _ => Err(CliError::validation_field(
                "coupling",
                "give either {a_zz, a_zx}, {a0, theta}, or {r, theta}",
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub center: Option<String>,
    pub span: String,
    pub duration: String,
    #[serde(default)]
    pub step: Option<String>,
    #[serde(default)]
    pub direction: Option<String>,
}

impl SweepSpec {
    /// Build against a default center (the NV transition frequency).
    pub fn build(&self, default_center_hz: f64) -> Result<SweepProtocol, CliError> {
        let center = match &self.center {
            Some(c) => parse_quantity("sweep.center", c, Dimension::Frequency)?,
            None => default_center_hz,
        };
        let span = parse_quantity("sweep.span", &self.span, Dimension::Frequency)?;
        let duration = parse_quantity("sweep.duration", &self.duration, Dimension::Time)?;
        let mut sweep = SweepProtocol::new(center, span, duration)
            .map_err(|e| CliError::validation_field("sweep", e.to_string()))?;
        if let Some(step) = &self.step {
            let step = parse_quantity("sweep.step", step, Dimension::Frequency)?;
            sweep = sweep
                .with_step(step)
                .map_err(|e| CliError::validation_field("sweep.step", e.to_string()))?;
        }
        if let Some(direction) = &self.direction {
            let dir = match direction.as_str() {
                "up" => SweepDirection::Up,
                "down" => SweepDirection::Down,
                other => {
                    return Err(CliError::validation_field(
                        "sweep.direction",
                        format!("expected \"up\" or \"down\", got \"{other}\""),
                    ))
                }
            };
            sweep = sweep.with_direction(dir);
        }
        Ok(sweep)
    }
}

fn default_count() -> usize {
    0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: String,
    pub stop: String,
    #[serde(default = "default_count")]
    pub count: usize,
}

impl GridSpec {
    /// Inclusive linear grid in the base unit of `dim`.
    pub fn build(&self, field: &str, dim: Dimension) -> Result<Vec<f64>, CliError> {
        if self.count == 0 {
            return Err(CliError::validation_field(
                field,
                "grid count must be at least 1 (empty grid)",
            ));
        }
        let start = parse_quantity(&format!("{field}.start"), &self.start, dim)?;
        let stop = parse_quantity(&format!("{field}.stop"), &self.stop, dim)?;
        if self.count == 1 {
            return Ok(vec![start]);
        }
        if stop <= start {
            return Err(CliError::validation_field(
                field,
                format!("grid needs stop > start, got {start} .. {stop}"),
            ));
        }
        Ok((0..self.count)
            .map(|i| start + (stop - start) * i as f64 / (self.count - 1) as f64)
            .collect())
    }
}

pub fn parse_pair(pair: &[usize]) -> Result<odnmr_core::sweepsim::HopPair, CliError> {
    if pair.len() != 2 {
        return Err(CliError::validation_field(
            "pair",
            format!("expected two dressed labels, got {}", pair.len()),
        ));
    }
    odnmr_core::sweepsim::HopPair::new(pair[0], pair[1])
        .map_err(|e| CliError::validation_field("pair", e.to_string()))
}
