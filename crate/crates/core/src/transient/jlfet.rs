//! Behavioral square-law model of the depletion-mode junctionless transistor
//! used as a gate-tunable current source.
//!
//! The channel conducts for gate voltages below the depletion voltage `v_t`;
//! the overdrive is `v_t - v_g`. A lumped series resistance `r_sd` sits in
//! series with the intrinsic channel, so the drain current solves
//! `I = f(v_ds - I r_sd)` where `f` is the square-law channel current.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JlfetModel {
    /// Full-depletion gate voltage (V).
    pub v_t: f64,
    /// Transconductance factor (A/V^2).
    pub k: f64,
    /// Series source/drain resistance (ohm).
    #[serde(default = "default_r_sd")]
    pub r_sd: f64,
    /// Output-conductance factor (1/V).
    #[serde(default)]
    pub lambda: f64,
}

fn default_r_sd() -> f64 {
    343e3
}

impl Default for JlfetModel {
    fn default() -> Self {
        Self {
            v_t: 3.0,
            k: 4e-6,
            r_sd: default_r_sd(),
            lambda: 0.0,
        }
    }
}

impl JlfetModel {
    /// Intrinsic channel current and its derivative with respect to `v_dsi`.
    fn channel(&self, v_ov: f64, v_dsi: f64) -> (f64, f64) {
        let clm = 1.0 + self.lambda * v_dsi;
        if v_dsi < v_ov {
            let core = v_ov * v_dsi - 0.5 * v_dsi * v_dsi;
            let i = self.k * core * clm;
            let di = self.k * ((v_ov - v_dsi) * clm + core * self.lambda);
            (i, di)
        } else {
            let core = 0.5 * v_ov * v_ov;
            (self.k * core * clm, self.k * core * self.lambda)
        }
    }

    /// Small-signal channel resistance in deep linear operation.
    pub fn channel_resistance(&self, v_g: f64) -> f64 {
        1.0 / (self.k * (self.v_t - v_g))
    }
}

/// Drain current magnitude for gate voltage `v_g` and drain-source voltage magnitude `v_ds`.
pub fn jlfet_current(model: &JlfetModel, v_g: f64, v_ds: f64) -> f64 {
    let v_ov = model.v_t - v_g;
    if v_ov <= 0.0 || v_ds <= 0.0 || model.k <= 0.0 {
        return 0.0;
    }
    let (i_open, _) = model.channel(v_ov, v_ds);
    if model.r_sd <= 0.0 {
        return i_open;
    }
    // g(I) = I - f(v_ds - I r_sd) is strictly increasing on [0, hi] with
    // g(0) < 0 <= g(hi).
    let mut lo = 0.0;
    let mut hi = i_open.min(v_ds / model.r_sd);
    let mut i = 0.5 * hi;
    for _ in 0..100 {
        let x = v_ds - i * model.r_sd;
        let (f, df) = model.channel(v_ov, x);
        let g = i - f;
        if g > 0.0 {
            hi = i;
        } else {
            lo = i;
        }
        let step = g / (1.0 + model.r_sd * df);
        let mut next = i - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - i).abs() <= 1e-15 * i.abs().max(1e-18) || hi - lo <= 1e-16 * hi {
            return next;
        }
        i = next;
    }
    i
}
