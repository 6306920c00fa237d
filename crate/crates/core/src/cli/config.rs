//! Experiment configuration: one JSON document per run, SI base units,
//! mandatory `units_version`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::device::{MemristorParams, Phase, TemperatureModel};
use crate::stochastic::{NoiseConfig, Orientation};
use crate::thermal::{GtModel, ThermalGeometry, ThresholdScale};
use crate::transient::{CircuitConfig, GateSignal};

pub const UNITS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub units_version: u32,
    /// Free-form notes (which figure a fixture emulates, which values are
    /// calibrations). Ignored by the runner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupled: Option<CoupledSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vco: Option<VcoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract: Option<ExtractSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputSpec>,
}

/// Device model given inline, as bare parameters, or as a path to a
/// temperature-model JSON file (relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceSpec {
    File { file: PathBuf },
    Model(TemperatureModel),
    Params(MemristorParams),
}

impl DeviceSpec {
    fn resolve(&self, base_dir: &Path, path: &str) -> Result<TemperatureModel, CliError> {
        match self {
            DeviceSpec::Model(m) => Ok(m.clone()),
            DeviceSpec::Params(p) => Ok(TemperatureModel::constant(*p, 25.0).with_range(-273.15, 1e4)),
            DeviceSpec::File { file } => {
                let full = base_dir.join(file);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Config(format!("{path}.file: cannot read {}: {e}", full.display())))?;
                let mut de = serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(&mut de)
                    .map_err(|e| CliError::Config(format!("{path}.file ({}): {}: {}", full.display(), e.path(), e.inner())))
            }
        }
    }
}

/// A list of values or an inclusive linear range of `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range { start: f64, stop: f64, n: usize },
}

impl Values {
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            Values::List(ref v) => v.clone(),
            Values::Range { start, stop, n } => match n {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Constant bias currents replacing the circuit drive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<Values>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<Values>,
    /// Coupling resistances for `couple`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Values>,
    /// Gate signals for `vco`, each replacing the drive's gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<Vec<GateSignal>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub duration: f64,
    /// Step; defaults to `min(C_L R_m, C_L R_i) / 50`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub initial_v: f64,
    #[serde(default = "insulating")]
    pub initial_phase: Phase,
    /// Also write waveforms as JSON.
    #[serde(default)]
    pub json: bool,
}

fn insulating() -> Phase {
    Phase::Insulating
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub iterations: usize,
    /// Holding (falling) or threshold (rising) margins, one run each (V).
    pub margins: Vec<f64>,
    #[serde(default = "falling")]
    pub orientation: Orientation,
    /// Timeout in units of the relaxation time constant.
    #[serde(default = "default_timeout_taus")]
    pub timeout_taus: f64,
    /// Histogram bin width (s); automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    /// Margin grid for the median-escape curve and its offset fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_margins: Option<Values>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_iterations: Option<usize>,
}

fn falling() -> Orientation {
    Orientation::Falling
}

fn default_timeout_taus() -> f64 {
    crate::stochastic::DEFAULT_TIMEOUT_TAUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledSpec {
    /// Second device; defaults to the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_b: Option<DeviceSpec>,
    pub node_a: CircuitConfig,
    pub node_b: CircuitConfig,
    #[serde(default = "default_r_c")]
    pub r_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ss_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ss_b: Option<f64>,
    #[serde(default)]
    pub initial_a: f64,
    #[serde(default)]
    pub initial_b: f64,
    pub duration: f64,
    /// Step; defaults to the coupled resolution guard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Leading fraction of the record dropped before statistics.
    #[serde(default = "default_discard")]
    pub discard: f64,
}

fn default_r_c() -> f64 {
    343e3
}

fn default_discard() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcoSpec {
    /// Gate periods simulated per run.
    #[serde(default = "default_gate_periods")]
    pub gate_periods: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub json: bool,
}

fn default_gate_periods() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSpec {
    pub c_l: f64,
    pub i_bias: f64,
    /// Defaults to the record's mid-swing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<f64>,
    /// Frequency histogram bin width (Hz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    #[serde(default)]
    pub geometry: ThermalGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_model: Option<GtModel>,
    /// Ambient temperatures for the threshold table (°C).
    pub temperatures: Values,
    /// When set, `geometry.t_th` is replaced by `0.9 t_imt` of `gt_model`
    /// evaluated on this scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_scale: Option<ThresholdScale>,
    /// Measured `(T, G)` pairs to fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_data: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a config file, reporting the JSON path of any field error.
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.inline_devices(base)?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))?;
        if cfg.units_version != UNITS_VERSION {
            return Err(CliError::Config(format!(
                "units_version: expected {UNITS_VERSION}, got {}",
                cfg.units_version
            )));
        }
        Ok(cfg)
    }

    /// Replaces device file references by their contents so the config can
    /// be echoed and re-run on its own.
    fn inline_devices(&mut self, base: &Path) -> Result<(), CliError> {
        if let Some(d) = &self.device {
            self.device = Some(DeviceSpec::Model(d.resolve(base, "device")?));
        }
        if let Some(c) = &mut self.coupled {
            if let Some(d) = &c.device_b {
                c.device_b = Some(DeviceSpec::Model(d.resolve(base, "coupled.device_b")?));
            }
        }
        Ok(())
    }

    pub fn device(&self) -> Result<TemperatureModel, CliError> {
        match &self.device {
            Some(d) => d.resolve(Path::new("."), "device"),
            None => Err(CliError::Config("device: missing".into())),
        }
    }

    /// Second coupled device, when it differs from the first.
    pub fn device_b(&self) -> Result<Option<TemperatureModel>, CliError> {
        match self.coupled.as_ref().and_then(|c| c.device_b.as_ref()) {
            Some(d) => d.resolve(Path::new("."), "coupled.device_b").map(Some),
            None => Ok(None),
        }
    }

    pub fn circuit(&self) -> Result<&CircuitConfig, CliError> {
        self.circuit
            .as_ref()
            .ok_or_else(|| CliError::Config("circuit: missing".into()))
    }

    pub fn section<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field.as_ref().ok_or_else(|| CliError::Config(format!("{name}: section missing")))
    }
}
