//! Closed-form relaxation-oscillator mathematics.
//!
//! Under an ideal current bias `I` into the load capacitance `C_L`, each
//! memristor phase relaxes exponentially toward an asymptote:
//! `V_ar = V_oi + R_i I` (insulating, rising) and `V_af = V_om + R_m I`
//! (metallic, falling), with time constants `C_L R_i` and `C_L R_m`. The
//! oscillation period is the sum of the two threshold-to-threshold segment
//! times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::MemristorParams;
use crate::waveform::Waveform;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(
        "bias does not sustain oscillation ({}): threshold margin {threshold_margin:+.4e} V, holding margin {holding_margin:+.4e} V",
        failed.join(" and ")
    )]
    NotOscillating {
        failed: Vec<&'static str>,
        threshold_margin: f64,
        holding_margin: f64,
    },
    #[error("target {v_to} V unreachable from {v_from} V with asymptote {v_a} V")]
    Unreachable { v_from: f64, v_to: f64, v_a: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Deterministic oscillation conditions at one bias point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationAssessment {
    pub oscillates: bool,
    /// Rising (insulating) asymptote.
    pub v_ar: f64,
    /// Falling (metallic) asymptote.
    pub v_af: f64,
    /// `v_th - v_ar`; negative when the rising phase reaches threshold.
    pub threshold_margin: f64,
    /// `v_af - v_hl`; negative when the falling phase reaches the holding voltage.
    pub holding_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodBreakdown {
    pub t_rise: f64,
    pub t_fall: f64,
    pub period: f64,
    pub frequency: f64,
}

pub fn assess(params: &MemristorParams, i_bias: f64) -> OscillationAssessment {
    let v_ar = params.v_oi + params.r_i * i_bias;
    let v_af = params.v_om + params.r_m * i_bias;
    let threshold_margin = params.v_th - v_ar;
    let holding_margin = v_af - params.v_hl;
    OscillationAssessment {
        oscillates: threshold_margin < 0.0 && holding_margin < 0.0,
        v_ar,
        v_af,
        threshold_margin,
        holding_margin,
    }
}

/// Oscillation period under constant current bias, ignoring any load resistance.
pub fn period(params: &MemristorParams, i_bias: f64, c_l: f64) -> Result<PeriodBreakdown, AnalyticError> {
    if !(c_l > 0.0) {
        return Err(AnalyticError::InvalidInput(format!("c_l must be positive, got {c_l}")));
    }
    let a = assess(params, i_bias);
    if !a.oscillates {
        let mut failed = Vec::new();
        if a.threshold_margin >= 0.0 {
            failed.push("rising asymptote below v_th");
        }
        if a.holding_margin >= 0.0 {
            failed.push("falling asymptote above v_hl");
        }
        return Err(AnalyticError::NotOscillating {
            failed,
            threshold_margin: a.threshold_margin,
            holding_margin: a.holding_margin,
        });
    }
    let tau_r = c_l * params.r_i;
    let tau_f = c_l * params.r_m;
    let t_rise = tau_r * ((params.v_hl - a.v_ar) / (params.v_th - a.v_ar)).ln();
    let t_fall = tau_f * ((params.v_th - a.v_af) / (params.v_hl - a.v_af)).ln();
    let period = t_rise + t_fall;
    Ok(PeriodBreakdown {
        t_rise,
        t_fall,
        period,
        frequency: 1.0 / period,
    })
}

/// Bias currents bounding the oscillation window, `(i_min, i_max)`.
///
/// Below `i_min` the rising asymptote never reaches `v_th`; above `i_max`
/// the falling asymptote stays above `v_hl`. `None` if the window is empty.
pub fn oscillation_window(params: &MemristorParams) -> Option<(f64, f64)> {
    let i_min = (params.v_th - params.v_oi) / params.r_i;
    let i_max = (params.v_hl - params.v_om) / params.r_m;
    (i_min < i_max && i_max > 0.0).then_some((i_min.max(0.0), i_max))
}

/// Time for an exponential relaxation toward `v_a` to go from `v_from` to `v_to`.
pub fn segment_time(v_from: f64, v_to: f64, v_a: f64, tau: f64) -> Result<f64, AnalyticError> {
    if !(tau > 0.0) {
        return Err(AnalyticError::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    if v_to == v_from {
        return Ok(0.0);
    }
    let num = v_from - v_a;
    let den = v_to - v_a;
    if num * den <= 0.0 || den.abs() >= num.abs() {
        return Err(AnalyticError::Unreachable { v_from, v_to, v_a });
    }
    Ok(tau * (num / den).ln())
}

/// Voltage of the relaxation `V(t) = (v0 - va) exp(-(t - t0)/tau) + va`.
#[inline]
pub fn relaxation(v0: f64, va: f64, tau: f64, t0: f64, t: f64) -> f64 {
    (v0 - va) * (-(t - t0) / tau).exp() + va
}

/// Trapezoidal integral of `v(t) * i_bias` over the segment.
pub fn energy_per_spike(segment: &Waveform, i_bias: f64) -> Result<f64, AnalyticError> {
    if segment.samples.len() < 2 {
        return Err(AnalyticError::InvalidInput("segment needs at least two samples".into()));
    }
    let s = &segment.samples;
    let interior: f64 = s[1..s.len() - 1].iter().sum();
    let integral = segment.dt * (0.5 * (s[0] + s[s.len() - 1]) + interior);
    Ok(integral * i_bias)
}
