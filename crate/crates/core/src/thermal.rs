//! Quasi-static thermal surrogate of the switching device: sigmoid film
//! conductance against temperature, and closed-form Joule-heating estimates
//! of the threshold current, threshold power and spike temperature.
//!
//! Temperatures are in degrees Celsius; differences are in kelvin.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error("invalid thermal input: {0}")]
    Invalid(String),
    #[error("temperature {t} °C is not below the threshold temperature {t_th} °C")]
    AboveThreshold { t: f64, t_th: f64 },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("data do not span both sides of the transition")]
    OneSided,
    #[error("conductance fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// `G(T) = g_i + (g_m - g_i) / (1 + exp((t_imt - T) / delta_t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtModel {
    pub g_i: f64,
    pub g_m: f64,
    /// Transition temperature (°C).
    pub t_imt: f64,
    /// Transition width (K).
    pub delta_t: f64,
}

impl Default for GtModel {
    fn default() -> Self {
        Self {
            g_i: 4e-6,
            g_m: 1.2e-4,
            t_imt: 65.0,
            delta_t: 3.0,
        }
    }
}

impl GtModel {
    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.g_i > 0.0 && self.g_m > self.g_i && self.g_m.is_finite()) {
            return Err(ThermalError::Invalid(format!(
                "need 0 < g_i < g_m, got {} and {}",
                self.g_i, self.g_m
            )));
        }
        if !(self.delta_t > 0.0) || !self.t_imt.is_finite() || !self.delta_t.is_finite() {
            return Err(ThermalError::Invalid(format!(
                "need finite t_imt and delta_t > 0, got {} and {}",
                self.t_imt, self.delta_t
            )));
        }
        Ok(())
    }

    /// `G(95 °C) / G(20 °C)`.
    pub fn on_off_ratio(&self) -> f64 {
        conductance(self, 95.0) / conductance(self, 20.0)
    }
}

pub fn conductance(model: &GtModel, t: f64) -> f64 {
    let f = 1.0 / (1.0 + ((model.t_imt - t) / model.delta_t).exp());
    model.g_i + (model.g_m - model.g_i) * f
}

/// How the threshold temperature is derived from the transition temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdScale {
    /// `T_TH = 0.9 T_IMT` with both in °C.
    #[default]
    Celsius,
    /// `T_TH = 0.9 T_IMT` with both in kelvin, reported back in °C.
    Kelvin,
}

pub fn threshold_temperature(t_imt: f64, scale: ThresholdScale) -> f64 {
    match scale {
        ThresholdScale::Celsius => 0.9 * t_imt,
        ThresholdScale::Kelvin => 0.9 * (t_imt + 273.15) - 273.15,
    }
}

/// Device geometry and film constants for the threshold estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalGeometry {
    pub w_dev: f64,
    pub l_dev: f64,
    pub thickness: f64,
    /// Film footprint `A_c = W_c L_c` (m^2).
    pub a_c: f64,
    /// Conduction cross-section of the device (m^2).
    pub a_cs: f64,
    /// Specific thermal resistance (K m^2 / W).
    pub r_th0: f64,
    /// Resistivity at 20 °C (ohm m).
    pub rho_20: f64,
    /// Transition magnitude `R(20 °C) / R(95 °C)`.
    pub r_r: f64,
    /// Threshold temperature (°C).
    pub t_th: f64,
    /// Effective boundary conductance per area and effective thickness. Only
    /// their product `A_c / r_th0` is defined; they are carried for reporting.
    #[serde(default)]
    pub g_eff: Option<f64>,
    #[serde(default)]
    pub t_eff: Option<f64>,
}

impl Default for ThermalGeometry {
    /// 2 µm x 3 µm, 60 nm thick device on a 12 µm² footprint with a 1.5 MK/W
    /// thermal contact, `T_IMT = 65 °C`.
    fn default() -> Self {
        let (w, l, th) = (2e-6, 3e-6, 60e-9);
        let a_c = 12e-12;
        Self {
            w_dev: w,
            l_dev: l,
            thickness: th,
            a_c,
            a_cs: w * th,
            r_th0: 1.5e6 * a_c,
            rho_20: 1e-2,
            r_r: 30.0,
            t_th: threshold_temperature(65.0, ThresholdScale::Celsius),
            g_eff: None,
            t_eff: None,
        }
    }
}

impl ThermalGeometry {
    pub fn validate(&self) -> Result<(), ThermalError> {
        let fields = [
            ("w_dev", self.w_dev),
            ("l_dev", self.l_dev),
            ("thickness", self.thickness),
            ("a_c", self.a_c),
            ("a_cs", self.a_cs),
            ("r_th0", self.r_th0),
            ("rho_20", self.rho_20),
            ("t_th", self.t_th),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(ThermalError::Invalid(format!("{name} must be positive, got {v}")));
        }
        if !(self.r_r > 1.0) {
            return Err(ThermalError::Invalid(format!("r_r must exceed 1, got {}", self.r_r)));
        }
        if let (Some(g), Some(t)) = (self.g_eff, self.t_eff) {
            let g_th = self.thermal_conductance();
            if ((g * t) / g_th - 1.0).abs() > 1e-6 {
                return Err(ThermalError::Invalid(format!(
                    "g_eff * t_eff = {:e} W/K disagrees with a_c / r_th0 = {g_th:e} W/K",
                    g * t
                )));
            }
        }
        Ok(())
    }

    /// Checks `t_th < t_imt` of a paired conductance model.
    pub fn validate_with(&self, model: &GtModel) -> Result<(), ThermalError> {
        self.validate()?;
        if self.t_th >= model.t_imt {
            return Err(ThermalError::Invalid(format!(
                "t_th {} °C must be below t_imt {} °C",
                self.t_th, model.t_imt
            )));
        }
        Ok(())
    }

    /// `A_c / r_th0` (W/K).
    pub fn thermal_conductance(&self) -> f64 {
        self.a_c / self.r_th0
    }

    fn gap(&self, t: f64) -> Result<f64, ThermalError> {
        self.validate()?;
        if !(t < self.t_th) {
            return Err(ThermalError::AboveThreshold { t, t_th: self.t_th });
        }
        Ok(self.t_th - t)
    }
}

/// `I_TH = (1/2) sqrt(3 R_R/(R_R-1)) sqrt(1/rho_20) sqrt(A_c/R_th0)
/// sqrt(A_cs/L) (T_TH - T)^(2/3)`.
pub fn threshold_current(geom: &ThermalGeometry, t: f64) -> Result<f64, ThermalError> {
    let gap = geom.gap(t)?;
    let r = geom.r_r;
    Ok(0.5
        * (3.0 * r / (r - 1.0)).sqrt()
        * (1.0 / geom.rho_20).sqrt()
        * geom.thermal_conductance().sqrt()
        * (geom.a_cs / geom.l_dev).sqrt()
        * gap.powf(2.0 / 3.0))
}

/// `P_TH = (A_c / (2 R_th0)) (R_R/(R_R-1)) (T_TH - T)^(4/3)`.
pub fn threshold_power(geom: &ThermalGeometry, t: f64) -> Result<f64, ThermalError> {
    let gap = geom.gap(t)?;
    let r = geom.r_r;
    Ok(0.5 * geom.thermal_conductance() * r / (r - 1.0) * gap.powf(4.0 / 3.0))
}

/// `T_spk / P_TH = 2 (R_th0/A_c) (R_R - 1) (T_TH - T)^(-1/3)` (K/W).
pub fn spike_temp_power_ratio(geom: &ThermalGeometry, t: f64) -> Result<f64, ThermalError> {
    let gap = geom.gap(t)?;
    Ok(2.0 / geom.thermal_conductance() * (geom.r_r - 1.0) * gap.powf(-1.0 / 3.0))
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub t: f64,
    pub i_th: f64,
    pub p_th: f64,
    pub t_spk_per_p: f64,
}

pub fn threshold_sweep(geom: &ThermalGeometry, temperatures: &[f64]) -> Result<Vec<ThresholdPoint>, ThermalError> {
    temperatures
        .iter()
        .map(|&t| {
            Ok(ThresholdPoint {
                t,
                i_th: threshold_current(geom, t)?,
                p_th: threshold_power(geom, t)?,
                t_spk_per_p: spike_temp_power_ratio(geom, t)?,
            })
        })
        .collect()
}

const FIT_MIN_POINTS: usize = 8;

/// Least-squares sigmoid fit with residuals relative to the measured
/// conductance, so both plateaus weigh alike.
///
/// Parameters are fitted as `ln g_i`, `ln g_m`, `t_imt`, `ln delta_t`; the
/// start takes the plateaus from the data extremes and the width from the
/// 25 %/75 % crossings.
pub fn fit_gt(data: &[(f64, f64)]) -> Result<GtModel, ThermalError> {
    if data.len() < FIT_MIN_POINTS {
        return Err(ThermalError::TooFewPoints {
            need: FIT_MIN_POINTS,
            got: data.len(),
        });
    }
    if data.iter().any(|&(t, g)| !t.is_finite() || !(g > 0.0) || !g.is_finite()) {
        return Err(ThermalError::Invalid("temperatures must be finite and conductances positive".into()));
    }
    let mut pts = data.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let g_lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let g_hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !(g_hi > g_lo) {
        return Err(ThermalError::OneSided);
    }
    let level = |q: f64| {
        let target = g_lo + q * (g_hi - g_lo);
        pts.windows(2).find_map(|w| {
            let ((t0, g0), (t1, g1)) = (w[0], w[1]);
            (g0 < target && g1 >= target).then(|| t0 + (t1 - t0) * (target - g0) / (g1 - g0))
        })
    };
    let t_mid = level(0.5).ok_or(ThermalError::OneSided)?;
    let width = match (level(0.25), level(0.75)) {
        (Some(a), Some(b)) if b > a => (b - a) / (2.0 * 3f64.ln()),
        _ => (pts[pts.len() - 1].0 - pts[0].0) / 20.0,
    };
    let p0 = DVector::from_vec(vec![g_lo.ln(), g_hi.ln(), t_mid, width.max(1e-3).ln()]);

    let model = |p: &DVector<f64>| {
        let (gi, gm, ti, dt) = (p[0].exp(), p[1].exp(), p[2], p[3].exp());
        let mut r = DVector::zeros(pts.len());
        let mut j = DMatrix::zeros(pts.len(), 4);
        for (k, &(t, g)) in pts.iter().enumerate() {
            let u = (ti - t) / dt;
            let f = 1.0 / (1.0 + u.exp());
            let df_du = -f * (1.0 - f);
            let model_g = gi + (gm - gi) * f;
            r[k] = model_g / g - 1.0;
            j[(k, 0)] = gi * (1.0 - f) / g;
            j[(k, 1)] = gm * f / g;
            j[(k, 2)] = (gm - gi) * df_du / dt / g;
            j[(k, 3)] = (gm - gi) * df_du * (-u) / g;
        }
        (r, j)
    };
    let out = lm::minimize(p0, 500, 1e-12, model);
    if !out.converged {
        return Err(ThermalError::NoConvergence {
            iterations: out.iterations,
        });
    }
    let fit = GtModel {
        g_i: out.params[0].exp(),
        g_m: out.params[1].exp(),
        t_imt: out.params[2],
        delta_t: out.params[3].exp(),
    };
    let below = pts.iter().any(|p| p.0 < fit.t_imt);
    let above = pts.iter().any(|p| p.0 > fit.t_imt);
    if !(below && above) {
        return Err(ThermalError::OneSided);
    }
    fit.validate()?;
    Ok(fit)
}
