//! Time-domain simulation of one or two 1T-1MR oscillator nodes.
//!
//! A node is the load capacitance `C_L` in parallel with the optional load
//! resistance `R_L` and the memristor, fed by a bias drive:
//!
//! ```text
//! C_L dV/dt = I_drive - (V - v_o)/r - V/R_L
//! ```
//!
//! Within one memristor phase the single node is linear, so
//! [`simulate_single`] advances it with the exact exponential solution and
//! locates threshold crossings analytically. The coupled pair adds
//! `(V_a - V_b)/r_c` to the current balance and is integrated with RK4.

mod coupled;
mod jlfet;
mod single;

pub use coupled::{simulate_coupled, CoupledConfig, CoupledRun};
pub use jlfet::{jlfet_current, JlfetModel};
pub use single::{burst_spike_counts, simulate_single, simulate_vco, SingleRun};

pub use crate::waveform::Waveform;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{MemristorParams, Phase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransientError {
    #[error("time step {dt:e} s exceeds the resolution limit {limit:e} s")]
    Resolution { dt: f64, limit: f64 },
    #[error("drive current must be positive, got {0:e} A")]
    NonPositiveDrive(f64),
    #[error("gate signal too fast: period {gate_period:e} s is under 10x the oscillation period {osc_period:e} s")]
    NotQuasiStatic { gate_period: f64, osc_period: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Node circuit: load, bias drive and operating temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    #[serde(default = "default_c_l")]
    pub c_l: f64,
    /// Load resistance; `None` disables it.
    #[serde(default = "default_r_l")]
    pub r_l: Option<f64>,
    pub drive: BiasDrive,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_c_l() -> f64 {
    70e-12
}

fn default_r_l() -> Option<f64> {
    Some(1e6)
}

fn default_temperature() -> f64 {
    25.0
}

impl CircuitConfig {
    /// Constant-current node with the default 70 pF / 1 MOhm load.
    pub fn constant_current(i: f64) -> Self {
        Self {
            c_l: default_c_l(),
            r_l: default_r_l(),
            drive: BiasDrive::ConstantCurrent { i },
            temperature: default_temperature(),
        }
    }

    pub fn without_load(mut self) -> Self {
        self.r_l = None;
        self
    }

    pub fn with_c_l(mut self, c_l: f64) -> Self {
        self.c_l = c_l;
        self
    }

    pub fn validate(&self) -> Result<(), TransientError> {
        if !(self.c_l > 0.0) || !self.c_l.is_finite() {
            return Err(TransientError::Config(format!("c_l must be positive, got {}", self.c_l)));
        }
        if let Some(r) = self.r_l {
            if !(r > 0.0) {
                return Err(TransientError::Config(format!("r_l must be positive, got {r}")));
            }
        }
        self.drive.validate()
    }

    /// Load conductance, zero when disabled.
    #[inline]
    pub(crate) fn g_load(&self) -> f64 {
        self.r_l.map_or(0.0, |r| 1.0 / r)
    }

    /// Exact-step relaxation target and time constant for `phase` at drive `i`.
    #[inline]
    pub(crate) fn thevenin(&self, params: &MemristorParams, phase: Phase, i: f64) -> (f64, f64) {
        let (v_o, r) = params.branch(phase);
        let g = 1.0 / r + self.g_load();
        ((i + v_o / r) / g, self.c_l / g)
    }

    /// The resolution guard `min(C_L R_m, C_L R_i) / divisor`.
    pub fn dt_limit(&self, params: &MemristorParams, divisor: f64) -> f64 {
        self.c_l * params.r_m.min(params.r_i) / divisor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasDrive {
    ConstantCurrent {
        i: f64,
    },
    /// Transistor current source between the supply `v_ss` and the node; the
    /// drain-source voltage magnitude is `|v_ss| - V`.
    Transistor {
        model: JlfetModel,
        gate: GateSignal,
        v_ss: f64,
    },
}

impl BiasDrive {
    pub fn validate(&self) -> Result<(), TransientError> {
        match self {
            BiasDrive::ConstantCurrent { i } => {
                if !(*i > 0.0) {
                    return Err(TransientError::NonPositiveDrive(*i));
                }
            }
            BiasDrive::Transistor { model, gate, v_ss } => {
                gate.validate()?;
                let (lo, hi) = gate.range();
                for v_g in [lo, hi] {
                    let i = jlfet_current(model, v_g, v_ss.abs());
                    if !(i > 0.0) {
                        return Err(TransientError::NonPositiveDrive(i));
                    }
                }
            }
        }
        Ok(())
    }

    /// Drive current at time `t` with node voltage `v`.
    #[inline]
    pub fn current(&self, t: f64, v: f64) -> f64 {
        match self {
            BiasDrive::ConstantCurrent { i } => *i,
            BiasDrive::Transistor { model, gate, v_ss } => {
                jlfet_current(model, gate.at(t), v_ss.abs() - v)
            }
        }
    }

    /// Same drive with the supply replaced (transistor drives only).
    pub fn with_supply(&self, supply: Option<f64>) -> BiasDrive {
        match (self, supply) {
            (BiasDrive::Transistor { model, gate, .. }, Some(v_ss)) => BiasDrive::Transistor {
                model: *model,
                gate: gate.clone(),
                v_ss,
            },
            _ => self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateSignal {
    Constant {
        v: f64,
    },
    /// Linear ramp from `v0` to `v1` over `t_total`, then held at `v1`.
    Ramp {
        v0: f64,
        v1: f64,
        t_total: f64,
    },
    Sine {
        v_mid: f64,
        v_amp: f64,
        f: f64,
    },
    /// `v_high` for the first `duty` fraction of each period, then `v_low`.
    Square {
        v_low: f64,
        v_high: f64,
        f: f64,
        #[serde(default = "default_duty")]
        duty: f64,
    },
}

fn default_duty() -> f64 {
    0.5
}

impl GateSignal {
    pub fn validate(&self) -> Result<(), TransientError> {
        let bad = |m: String| Err(TransientError::Config(m));
        match *self {
            GateSignal::Constant { .. } => Ok(()),
            GateSignal::Ramp { t_total, .. } if !(t_total > 0.0) => {
                bad(format!("ramp duration must be positive, got {t_total}"))
            }
            GateSignal::Sine { f, .. } if !(f > 0.0) => bad(format!("frequency must be positive, got {f}")),
            GateSignal::Square { f, duty, .. } if !(f > 0.0) || !(duty > 0.0 && duty < 1.0) => {
                bad(format!("square needs f > 0 and 0 < duty < 1, got f = {f}, duty = {duty}"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            GateSignal::Constant { v } => v,
            GateSignal::Ramp { v0, v1, t_total } => {
                let x = (t / t_total).clamp(0.0, 1.0);
                v0 + (v1 - v0) * x
            }
            GateSignal::Sine { v_mid, v_amp, f } => v_mid + v_amp * (std::f64::consts::TAU * f * t).sin(),
            GateSignal::Square { v_low, v_high, f, duty } => {
                let phase = (t * f).rem_euclid(1.0);
                if phase < duty {
                    v_high
                } else {
                    v_low
                }
            }
        }
    }

    /// `(min, max)` gate voltage reached by the signal.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            GateSignal::Constant { v } => (v, v),
            GateSignal::Ramp { v0, v1, .. } => (v0.min(v1), v0.max(v1)),
            GateSignal::Sine { v_mid, v_amp, .. } => (v_mid - v_amp.abs(), v_mid + v_amp.abs()),
            GateSignal::Square { v_low, v_high, .. } => (v_low.min(v_high), v_low.max(v_high)),
        }
    }

    /// Characteristic timescale of the signal: its period, or the ramp duration.
    pub fn timescale(&self) -> Option<f64> {
        match *self {
            GateSignal::Constant { .. } => None,
            GateSignal::Ramp { t_total, .. } => Some(t_total),
            GateSignal::Sine { f, .. } | GateSignal::Square { f, .. } => Some(1.0 / f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Insulator to metal (+1).
    Up,
    /// Metal to insulator (-1).
    Down,
}

impl Direction {
    pub fn sign(self) -> i8 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: f64,
    pub direction: Direction,
}

/// Writes events as CSV `t_seconds,direction` with direction +1 / -1.
pub fn write_events_csv<W: Write>(events: &[SwitchEvent], out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t_seconds", "direction"])?;
    for e in events {
        wtr.write_record([format!("{:e}", e.time), e.direction.sign().to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Mean interval between consecutive insulator-to-metal events.
pub fn mean_period(events: &[SwitchEvent]) -> Option<f64> {
    let ups: Vec<f64> = events
        .iter()
        .filter(|e| e.direction == Direction::Up)
        .map(|e| e.time)
        .collect();
    (ups.len() >= 2).then(|| (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64)
}

/// True when events strictly alternate direction.
pub fn events_alternate(events: &[SwitchEvent]) -> bool {
    events.windows(2).all(|w| w[0].direction != w[1].direction)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_signals() {
        let sq = GateSignal::Square {
            v_low: 0.0,
            v_high: 2.0,
            f: 5e3,
            duty: 0.5,
        };
        assert_eq!(sq.at(10e-6), 2.0);
        assert_eq!(sq.at(110e-6), 0.0);
        assert_eq!(sq.at(210e-6), 2.0);
        let ramp = GateSignal::Ramp {
            v0: 1.0,
            v1: 2.0,
            t_total: 1e-3,
        };
        assert_eq!(ramp.at(0.5e-3), 1.5);
        assert_eq!(ramp.at(2e-3), 2.0);
        assert!(GateSignal::Sine { v_mid: 0.0, v_amp: 1.0, f: 0.0 }.validate().is_err());
    }

    #[test]
    fn drive_validation() {
        assert!(BiasDrive::ConstantCurrent { i: 0.0 }.validate().is_err());
        let off = BiasDrive::Transistor {
            model: JlfetModel::default(),
            gate: GateSignal::Constant { v: 3.5 },
            v_ss: -10.0,
        };
        assert!(matches!(off.validate(), Err(TransientError::NonPositiveDrive(_))));
    }

    #[test]
    fn events_csv_format() {
        let ev = [
            SwitchEvent { time: 1e-6, direction: Direction::Up },
            SwitchEvent { time: 2e-6, direction: Direction::Down },
        ];
        let mut buf = Vec::new();
        write_events_csv(&ev, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t_seconds,direction");
        assert!(lines[1].ends_with(",1"));
        assert!(lines[2].ends_with(",-1"));
    }

    #[test]
    fn config_json_shape() {
        let c = CircuitConfig::constant_current(10e-6).without_load();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"r_l\":null"));
        assert!(text.contains("\"kind\":\"constant_current\""));
        let back: CircuitConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
