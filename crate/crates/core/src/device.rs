//! Two-state piecewise-affine memristor model.
//!
//! Each phase of the device is a linear resistor in series with an offset
//! voltage source, so the branch current is `(v - v_o) / r`. Switching is a
//! hysteretic state machine: insulating to metallic at `v >= v_th`, metallic to
//! insulating at `v <= v_hl`.
//!
//! Temperature enters only through [`TemperatureModel`], which evaluates each
//! of the six parameters as a first-order polynomial around a reference
//! temperature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default temperature validity interval, in degrees Celsius.
pub const DEFAULT_T_MIN: f64 = 20.0;
pub const DEFAULT_T_MAX: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("hysteresis window collapsed: v_th = {v_th} V must exceed v_hl = {v_hl} V")]
    WindowCollapsed { v_th: f64, v_hl: f64 },
    #[error("resistances out of order: require r_i ({r_i} ohm) > r_m ({r_m} ohm) > 0")]
    ResistanceOrder { r_i: f64, r_m: f64 },
    #[error("temperature {t} degC outside the validity interval [{t_min}, {t_max}]")]
    TemperatureOutOfRange { t: f64, t_min: f64, t_max: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("at {t} degC: {source}")]
    AtTemperature {
        t: f64,
        #[source]
        source: Box<ModelError>,
    },
}

/// The six affine-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorParams {
    /// Insulator to metal threshold voltage (V).
    pub v_th: f64,
    /// Metal to insulator holding voltage (V).
    pub v_hl: f64,
    /// Insulating-state affine resistance (ohm).
    pub r_i: f64,
    /// Metallic-state affine resistance (ohm).
    pub r_m: f64,
    /// Insulating offset voltage (V).
    pub v_oi: f64,
    /// Metallic offset voltage (V).
    pub v_om: f64,
}

impl MemristorParams {
    /// Builds a parameter set, checking the model invariants.
    pub fn new(
        v_th: f64,
        v_hl: f64,
        r_i: f64,
        r_m: f64,
        v_oi: f64,
        v_om: f64,
    ) -> Result<Self, ModelError> {
        let p = Self {
            v_th,
            v_hl,
            r_i,
            r_m,
            v_oi,
            v_om,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        if self.v_th <= self.v_hl {
            return Err(ModelError::WindowCollapsed {
                v_th: self.v_th,
                v_hl: self.v_hl,
            });
        }
        if !(self.r_i > self.r_m && self.r_m > 0.0) {
            return Err(ModelError::ResistanceOrder {
                r_i: self.r_i,
                r_m: self.r_m,
            });
        }
        Ok(())
    }

    /// Parameters in declaration order, tagged with their field names.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("v_th", self.v_th),
            ("v_hl", self.v_hl),
            ("r_i", self.r_i),
            ("r_m", self.r_m),
            ("v_oi", self.v_oi),
            ("v_om", self.v_om),
        ]
    }

    /// Offset voltage and resistance of the branch active in `phase`.
    #[inline]
    pub fn branch(&self, phase: Phase) -> (f64, f64) {
        match phase {
            Phase::Insulating => (self.v_oi, self.r_i),
            Phase::Metallic => (self.v_om, self.r_m),
        }
    }

    /// Reads a parameter file (`{v_th, ..., units}`); the units block is optional.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let doc: ParamsDocument = serde_json::from_str(text)?;
        Ok(doc.params)
    }

    pub fn to_json(&self) -> String {
        let doc = ParamsDocument {
            params: *self,
            units: Units::default(),
        };
        serde_json::to_string_pretty(&doc).expect("params serialize")
    }
}

/// Unit annotation carried by every serialized device document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub voltage: String,
    pub resistance: String,
    pub temperature: String,
    pub slope: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            voltage: "V".into(),
            resistance: "ohm".into(),
            temperature: "degC".into(),
            slope: "unit/degC".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsDocument {
    #[serde(flatten)]
    params: MemristorParams,
    #[serde(default)]
    units: Units,
}

/// Phase of the memristor state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Insulating,
    Metallic,
}

impl Phase {
    /// Applies the hysteretic switching rule for the voltage `v`.
    #[inline]
    pub fn next(self, params: &MemristorParams, v: f64) -> Phase {
        match self {
            Phase::Insulating if v >= params.v_th => Phase::Metallic,
            Phase::Metallic if v <= params.v_hl => Phase::Insulating,
            p => p,
        }
    }
}

/// Current through the active affine branch.
#[inline]
pub fn branch_current(params: &MemristorParams, phase: Phase, v: f64) -> f64 {
    let (v_o, r) = params.branch(phase);
    (v - v_o) / r
}

/// Per-degree coefficients, one per model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSlopes {
    pub v_th: f64,
    pub v_hl: f64,
    pub r_i: f64,
    pub r_m: f64,
    pub v_oi: f64,
    pub v_om: f64,
}

/// Linear temperature dependence of all six parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    pub base: MemristorParams,
    pub t_ref: f64,
    #[serde(default)]
    pub slopes: ParamSlopes,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub units: Units,
}

fn default_t_min() -> f64 {
    DEFAULT_T_MIN
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

impl TemperatureModel {
    /// A model with the default [20, 50] degC validity interval.
    pub fn new(base: MemristorParams, t_ref: f64, slopes: ParamSlopes) -> Self {
        Self {
            base,
            t_ref,
            slopes,
            t_min: DEFAULT_T_MIN,
            t_max: DEFAULT_T_MAX,
            units: Units::default(),
        }
    }

    /// Temperature-independent model (all slopes zero).
    pub fn constant(base: MemristorParams, t_ref: f64) -> Self {
        Self::new(base, t_ref, ParamSlopes::default())
    }

    pub fn with_range(mut self, t_min: f64, t_max: f64) -> Self {
        self.t_min = t_min;
        self.t_max = t_max;
        self
    }

    /// Evaluates the parameters at temperature `t` (degC).
    pub fn params_at(&self, t: f64) -> Result<MemristorParams, ModelError> {
        if !(t >= self.t_min && t <= self.t_max) {
            return Err(ModelError::TemperatureOutOfRange {
                t,
                t_min: self.t_min,
                t_max: self.t_max,
            });
        }
        if t == self.t_ref {
            return Ok(self.base);
        }
        let dt = t - self.t_ref;
        let (b, s) = (&self.base, &self.slopes);
        let p = MemristorParams {
            v_th: b.v_th + s.v_th * dt,
            v_hl: b.v_hl + s.v_hl * dt,
            r_i: b.r_i + s.r_i * dt,
            r_m: b.r_m + s.r_m * dt,
            v_oi: b.v_oi + s.v_oi * dt,
            v_om: b.v_om + s.v_om * dt,
        };
        p.validate().map_err(|e| ModelError::AtTemperature {
            t,
            source: Box::new(e),
        })?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("temperature model serialize")
    }
}

/// Free function form of [`TemperatureModel::params_at`].
pub fn params_at_temperature(model: &TemperatureModel, t: f64) -> Result<MemristorParams, ModelError> {
    model.params_at(t)
}

/// One sample of a quasi-static sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvPoint {
    pub v: f64,
    pub i: f64,
    pub phase: Phase,
}

/// Forward (up) and backward (down) branches of a quasi-static sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IvSweep {
    pub forward: Vec<IvPoint>,
    pub backward: Vec<IvPoint>,
    /// Index into `forward` of the first metallic sample.
    pub switch_up: Option<usize>,
    /// Index into `backward` of the first insulating sample after the return.
    pub switch_down: Option<usize>,
}

impl IvSweep {
    /// Forward then backward samples as one closed loop.
    pub fn points(&self) -> impl Iterator<Item = &IvPoint> {
        self.forward.iter().chain(self.backward.iter())
    }
}

/// Staircase voltage sweep `v_start -> v_max -> v_start` with the given step.
///
/// Thresholds are compared against the exact sample values (no
/// interpolation). The sample grid is `v_start + k * step`; a sample within
/// `1e-9 * step` of a threshold counts as reaching it, which absorbs the
/// representation error of decimal steps.
pub fn quasistatic_iv(
    params: &MemristorParams,
    v_start: f64,
    v_max: f64,
    step: f64,
) -> Result<IvSweep, ModelError> {
    if !(v_max > v_start) {
        return Err(ModelError::InvalidSweep(format!(
            "v_max ({v_max}) must exceed v_start ({v_start})"
        )));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(ModelError::InvalidSweep(format!("step must be positive, got {step}")));
    }
    if !(v_start < params.v_hl && params.v_th < v_max) {
        return Err(ModelError::InvalidSweep(format!(
            "sweep [{v_start}, {v_max}] must enclose the window [{}, {}]",
            params.v_hl, params.v_th
        )));
    }
    let eps = 1e-9 * step;
    let n = ((v_max - v_start) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| v_start + k as f64 * step).collect();

    let mut phase = Phase::Insulating;
    let mut forward = Vec::with_capacity(grid.len());
    let mut switch_up = None;
    for (k, &v) in grid.iter().enumerate() {
        if phase == Phase::Insulating && v >= params.v_th - eps {
            phase = Phase::Metallic;
            switch_up = Some(k);
        }
        forward.push(IvPoint {
            v,
            i: branch_current(params, phase, v),
            phase,
        });
    }

    let mut backward = Vec::with_capacity(grid.len());
    let mut switch_down = None;
    for (k, &v) in grid.iter().rev().enumerate() {
        if phase == Phase::Metallic && v <= params.v_hl + eps {
            phase = Phase::Insulating;
            switch_down = Some(k);
        }
        backward.push(IvPoint {
            v,
            i: branch_current(params, phase, v),
            phase,
        });
    }

    Ok(IvSweep {
        forward,
        backward,
        switch_up,
        switch_down,
    })
}
