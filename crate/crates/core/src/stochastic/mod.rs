//! Monte-Carlo escape-time statistics under band-limited 1/f noise, a
//! normally distributed holding voltage and a thermal-RC relaxation of that
//! holding voltage.

mod escape;
mod fit;
mod noise;

pub use escape::{
    escape_time_vs_margin, fit_margin_offset, holding_voltage_trace, monte_carlo_falling_escape,
    monte_carlo_rising_escape, EscapeRecord, EscapeRun, MarginPoint, MarginSweep, Orientation,
    DEFAULT_TIMEOUT_TAUS, DIVERGENCE_TAUS, MIN_SURVIVORS,
};
pub use fit::{fit_distribution, Candidate, DistributionFit, Family};
pub use noise::{generate_pink_noise, pink_noise_block};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("invalid noise configuration: {0}")]
    Config(String),
    #[error("record of {n} samples at dt = {dt:e} s cannot resolve f_low = {f_low} Hz")]
    BandUnresolved { n: usize, dt: f64, f_low: f64 },
    #[error("all {iterations} iterations timed out without a crossing")]
    AllCensored { iterations: usize },
    #[error("no margin kept at least {min} uncensored iterations")]
    InsufficientSurvivors { min: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Noise and holding-voltage variability for the escape-time Monte-Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// RMS of the 1/f noise record (V).
    pub pink_amplitude: f64,
    pub f_low: f64,
    pub f_high: f64,
    /// Mean of the drawn holding voltage (V). For the rising orientation the
    /// draw is centred on the threshold voltage instead.
    pub v_hl_mu: f64,
    pub v_hl_sigma: f64,
    pub tau_thermal: f64,
    /// Holding voltage at the start of the thermal relaxation. Defaults to
    /// `v_hl_mu - 3 v_hl_sigma` (falling) and its mirror image (rising).
    #[serde(default)]
    pub v_hl_start: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseConfig {
    /// Setup-noise defaults: 7 mV RMS 1/f noise in the 20 kHz to 2 MHz band, 5 mV
    /// holding-voltage spread, no thermal delay.
    fn default() -> Self {
        Self {
            pink_amplitude: 7e-3,
            f_low: 20e3,
            f_high: 2e6,
            v_hl_mu: 0.65,
            v_hl_sigma: 5e-3,
            tau_thermal: 0.0,
            v_hl_start: None,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), StochasticError> {
        let fields = [
            ("pink_amplitude", self.pink_amplitude),
            ("f_low", self.f_low),
            ("f_high", self.f_high),
            ("v_hl_mu", self.v_hl_mu),
            ("v_hl_sigma", self.v_hl_sigma),
            ("tau_thermal", self.tau_thermal),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(StochasticError::Config(format!("{name} is not finite ({v})")));
        }
        if !(self.f_low > 0.0 && self.f_low < self.f_high) {
            return Err(StochasticError::Config(format!(
                "need 0 < f_low < f_high, got {} and {}",
                self.f_low, self.f_high
            )));
        }
        for (name, v) in [
            ("pink_amplitude", self.pink_amplitude),
            ("v_hl_sigma", self.v_hl_sigma),
            ("tau_thermal", self.tau_thermal),
        ] {
            if v < 0.0 {
                return Err(StochasticError::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Same configuration without any noise or spread.
    pub fn noiseless(&self) -> Self {
        Self {
            pink_amplitude: 0.0,
            v_hl_sigma: 0.0,
            tau_thermal: 0.0,
            v_hl_start: None,
            ..self.clone()
        }
    }
}
