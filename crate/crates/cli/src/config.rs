//! Experiment configuration: schema, parsing and parameter derivation.

use std::path::PathBuf;

use hyperent::analyzers::AnalyzerOptions;
use hyperent::device::{self, Budget, PumpParams, RingParams};
use hyperent::state::{Dof, NoiseParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub device: DeviceSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Both rings, pump and loss budget. Every sub-table defaults to the
/// nominal device.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    #[serde(default)]
    pub ring_a: RingParams,
    #[serde(default)]
    pub ring_b: RingParams,
    #[serde(default)]
    pub pump: PumpParams,
    #[serde(default)]
    pub budget: Budget,
    /// Resonance offset between the rings at the signal / idler bins, GHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_signal_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_idler_ghz: Option<f64>,
}

/// A number, or `{ derive = "<source>" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Value(f64),
    Derive(DeriveFlag),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveFlag {
    pub derive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub mu_tb: Param,
    /// derivable from `"spectral_indistinguishability"`
    pub mu_fb: Param,
    /// derivable from `"car"`
    pub p_white: Param,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Poisson-sampled counts.
    Sampled,
    /// Expectation values written as counts.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(default = "default_dofs")]
    pub dofs: Vec<Dof>,
    #[serde(default = "default_integration_time")]
    pub integration_time_s: f64,
    /// Pair rate at the chip output, Hz; derivable from `"budget"`.
    #[serde(default = "default_pair_rate")]
    pub pair_rate_hz: Param,
    #[serde(default = "default_mode")]
    pub mode: CountMode,
    #[serde(default)]
    pub realistic_efficiency: bool,
    #[serde(default = "default_filter_transmission")]
    pub filter_transmission: f64,
    #[serde(default = "default_true")]
    pub stabilizers: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        MeasurementSection {
            dofs: default_dofs(),
            integration_time_s: default_integration_time(),
            pair_rate_hz: default_pair_rate(),
            mode: default_mode(),
            realistic_efficiency: false,
            filter_transmission: default_filter_transmission(),
            stabilizers: true,
            sweep: None,
        }
    }
}

/// Two-photon fringe: signal phase stepped over `points` values in [0, 2π), idler at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_sweep_points")]
    pub points: usize,
    #[serde(default = "default_integration_time")]
    pub integration_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: default_seed(),
            resamples: default_resamples(),
            output_dir: None,
        }
    }
}

fn default_dofs() -> Vec<Dof> {
    Dof::BOTH.to_vec()
}
fn default_integration_time() -> f64 {
    10.0
}
fn default_pair_rate() -> Param {
    Param::Value(4700.0)
}
fn default_mode() -> CountMode {
    CountMode::Sampled
}
fn default_filter_transmission() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_sweep_points() -> usize {
    24
}
fn default_seed() -> u64 {
    1
}
fn default_resamples() -> usize {
    200
}

/// Numbers the pipeline actually runs with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub noise: NoiseParams,
    /// At the chip output.
    pub pair_rate_hz: f64,
    /// After facet, analyzer and detector on both photons.
    pub detected_pair_rate_hz: f64,
    pub car: f64,
    pub analyzer: AnalyzerOptions,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML rendering, used as the config echo.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let schema = |e: &dyn std::fmt::Display| CliError::Schema(e.to_string());
        self.device.ring_a.validate().map_err(|e| schema(&e))?;
        self.device.ring_b.validate().map_err(|e| schema(&e))?;
        self.device.pump.validate().map_err(|e| schema(&e))?;
        self.device.budget.validate().map_err(|e| schema(&e))?;
        let m = &self.measurement;
        if m.dofs.is_empty() {
            return Err(CliError::Schema("measurement.dofs is empty".into()));
        }
        let mut seen = m.dofs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != m.dofs.len() {
            return Err(CliError::Schema("measurement.dofs has duplicates".into()));
        }
        if !(m.integration_time_s > 0.0 && m.integration_time_s.is_finite()) {
            return Err(CliError::Schema(format!(
                "measurement.integration_time_s must be positive, got {}",
                m.integration_time_s
            )));
        }
        self.analyzer_options().validate().map_err(|e| schema(&e))?;
        if let Some(s) = &m.sweep {
            if s.points < 4 {
                return Err(CliError::Schema(format!(
                    "measurement.sweep.points must be at least 4, got {}",
                    s.points
                )));
            }
            if !(s.integration_time_s > 0.0 && s.integration_time_s.is_finite()) {
                return Err(CliError::Schema(
                    "measurement.sweep.integration_time_s must be positive".into(),
                ));
            }
        }
        if self.run.resamples < hyperent::tomo::MIN_RESAMPLES {
            return Err(CliError::Schema(format!(
                "run.resamples must be at least {}, got {}",
                hyperent::tomo::MIN_RESAMPLES,
                self.run.resamples
            )));
        }
        Ok(())
    }

    pub fn analyzer_options(&self) -> AnalyzerOptions {
        AnalyzerOptions {
            realistic_efficiency: self.measurement.realistic_efficiency,
            filter_transmission: self.measurement.filter_transmission,
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let d = &self.device;
        let mu_tb = match &self.noise.mu_tb {
            Param::Value(v) => *v,
            Param::Derive(f) => return Err(unknown_source("noise.mu_tb", &f.derive)),
        };
        let mu_fb = match &self.noise.mu_fb {
            Param::Value(v) => *v,
            Param::Derive(f) if f.derive == "spectral_indistinguishability" => {
                let (Some(ds), Some(di)) = (d.detuning_signal_ghz, d.detuning_idler_ghz) else {
                    return Err(CliError::Derive(
                        "noise.mu_fb derives from spectral_indistinguishability, which needs \
                         device.detuning_signal_ghz and device.detuning_idler_ghz"
                            .into(),
                    ));
                };
                device::spectral_indistinguishability(
                    ds,
                    di,
                    device::linewidth(&d.ring_a),
                    device::linewidth(&d.ring_b),
                )
                .map_err(|e| CliError::Derive(e.to_string()))?
            }
            Param::Derive(f) => return Err(unknown_source("noise.mu_fb", &f.derive)),
        };
        let p_white = match &self.noise.p_white {
            Param::Value(v) => *v,
            Param::Derive(f) if f.derive == "car" => device::car_to_white_noise(d.budget.car),
            Param::Derive(f) => return Err(unknown_source("noise.p_white", &f.derive)),
        };
        let noise =
            NoiseParams::new(mu_tb, mu_fb, p_white).map_err(|e| CliError::Schema(e.to_string()))?;
        let pair_rate_hz = match &self.measurement.pair_rate_hz {
            Param::Value(v) => *v,
            Param::Derive(f) if f.derive == "budget" => {
                device::pair_rate_budget(&d.pump, &d.ring_a, &d.budget).generated_hz
            }
            Param::Derive(f) => return Err(unknown_source("measurement.pair_rate_hz", &f.derive)),
        };
        if !(pair_rate_hz >= 0.0 && pair_rate_hz.is_finite()) {
            return Err(CliError::Schema(format!(
                "measurement.pair_rate_hz must be non-negative, got {pair_rate_hz}"
            )));
        }
        Ok(Resolved {
            noise,
            pair_rate_hz,
            detected_pair_rate_hz: device::detected_pair_rate(pair_rate_hz, &d.budget),
            car: d.budget.car,
            analyzer: self.analyzer_options(),
        })
    }
}

fn unknown_source(field: &str, source: &str) -> CliError {
    CliError::Derive(format!("{field} cannot be derived from \"{source}\""))
}
