use serde::{Deserialize, Serialize};

use super::cycles::{segment_cycles, Segmentation};
use super::expfit::{fit_samples, ExpFit};
use super::AnalysisError;
use crate::device::MemristorParams;
use crate::stats;
use crate::waveform::Waveform;

const MIN_CYCLES: usize = 5;
/// Fraction of the cycle swing trimmed at both ends of each fitted branch.
const EDGE_TRIM: f64 = 0.05;

/// Per-cycle quantities behind an extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleExtraction {
    pub cycle: usize,
    pub tau_r: f64,
    pub tau_f: f64,
    pub v_ar: f64,
    pub v_af: f64,
    pub v_th: f64,
    pub v_hl: f64,
    pub r_i: f64,
    pub r_m: f64,
    pub v_oi: f64,
    pub v_om: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Self {
        let s = stats::sorted(values);
        Self {
            q1: stats::quantile_sorted(&s, 0.25),
            median: stats::quantile_sorted(&s, 0.5),
            q3: stats::quantile_sorted(&s, 0.75),
        }
    }
}

/// Spread of each extracted parameter over the cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub cycles: usize,
    pub v_th: Quartiles,
    pub v_hl: Quartiles,
    pub r_i: Quartiles,
    pub r_m: Quartiles,
    pub v_oi: Quartiles,
    pub v_om: Quartiles,
    pub tau_r: Quartiles,
    pub tau_f: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub params: MemristorParams,
    pub spread: SpreadReport,
    pub per_cycle: Vec<CycleExtraction>,
}

/// Recovers the six model parameters from an oscillation record.
///
/// Each cycle's rising and falling branches are fitted between 5 % and 95 %
/// of the cycle swing. `R_i = tau_r / c_l`, `R_m = tau_f / c_l`,
/// `V_oi = V_ar - I R_i`, `V_om = V_af - I R_m`. The switching voltages are the
/// cycle extrema, refined to the intersection of the two fitted branches
/// around each switch when the fits allow it (the node voltage is continuous
/// through a switch, so this is the extremum of the continuous trace rather
/// than of the samples). Returned parameters are per-cycle medians.
pub fn extract_model_params(
    w: &Waveform,
    c_l: f64,
    i_bias: f64,
    trigger: f64,
) -> Result<Extraction, AnalysisError> {
    if !(c_l > 0.0) || !i_bias.is_finite() {
        return Err(AnalysisError::InvalidInput(format!("need c_l > 0 and finite bias, got {c_l}, {i_bias}")));
    }
    let seg = segment_cycles(w, trigger, 0.1 * w.peak_to_peak())?;
    if seg.cycles.len() < MIN_CYCLES {
        return Err(AnalysisError::TooFewCycles {
            need: MIN_CYCLES,
            got: seg.cycles.len(),
        });
    }
    let marks = switch_marks(w, &seg);

    let mut fits = Vec::with_capacity(marks.len());
    for (k, m) in marks.iter().enumerate() {
        let wrap = |e| AnalysisError::Cycle {
            cycle: k,
            source: Box::new(e),
        };
        let rise = fit_branch(w, m.rise_from, m.peak, m.lo, m.hi).map_err(wrap)?;
        let fall = fit_branch(w, m.peak + 1, m.trough, m.lo, m.hi).map_err(wrap)?;
        fits.push((rise, fall));
    }

    let mut per_cycle = Vec::with_capacity(marks.len());
    for (k, m) in marks.iter().enumerate() {
        let (rise, fall) = &fits[k];
        let v_th = crossing(w, rise, fall, m.peak).unwrap_or(m.hi);
        let v_hl = fits
            .get(k + 1)
            .and_then(|(next_rise, _)| crossing(w, fall, next_rise, m.trough))
            .unwrap_or(m.lo);
        let r_i = rise.tau / c_l;
        let r_m = fall.tau / c_l;
        per_cycle.push(CycleExtraction {
            cycle: k,
            tau_r: rise.tau,
            tau_f: fall.tau,
            v_ar: rise.va,
            v_af: fall.va,
            v_th,
            v_hl,
            r_i,
            r_m,
            v_oi: rise.va - i_bias * r_i,
            v_om: fall.va - i_bias * r_m,
        });
    }

    let column = |f: fn(&CycleExtraction) -> f64| Quartiles::of(&per_cycle.iter().map(f).collect::<Vec<_>>());
    let spread = SpreadReport {
        cycles: per_cycle.len(),
        v_th: column(|c| c.v_th),
        v_hl: column(|c| c.v_hl),
        r_i: column(|c| c.r_i),
        r_m: column(|c| c.r_m),
        v_oi: column(|c| c.v_oi),
        v_om: column(|c| c.v_om),
        tau_r: column(|c| c.tau_r),
        tau_f: column(|c| c.tau_f),
    };
    let params = MemristorParams::new(
        spread.v_th.median,
        spread.v_hl.median,
        spread.r_i.median,
        spread.r_m.median,
        spread.v_oi.median,
        spread.v_om.median,
    )
    .map_err(|e| AnalysisError::InvalidInput(format!("extracted parameters are inconsistent: {e}")))?;
    Ok(Extraction {
        params,
        spread,
        per_cycle,
    })
}

/// Sample indices bounding one cycle's branches.
struct Marks {
    /// First sample of the rising branch that ends at `peak`.
    rise_from: usize,
    /// Last sample before the upper switch.
    peak: usize,
    /// Last sample before the lower switch.
    trough: usize,
    lo: f64,
    hi: f64,
}

fn switch_marks(w: &Waveform, seg: &Segmentation) -> Vec<Marks> {
    let s = &w.samples;
    let mut out: Vec<Marks> = Vec::with_capacity(seg.cycles.len());
    for (k, c) in seg.cycles.iter().enumerate() {
        let (a, b) = (seg.crossing_indices[k], seg.crossing_indices[k + 1]);
        let peak = argmax(&s[a..b]) + a;
        let trough = argmin(&s[peak..b]) + peak;
        let rise_from = out.last().map_or(a, |prev| prev.trough + 1);
        out.push(Marks {
            rise_from,
            peak,
            trough,
            lo: c.v_min,
            hi: c.v_max,
        });
    }
    out
}

fn argmax(x: &[f64]) -> usize {
    x.iter().enumerate().fold(0, |best, (i, &v)| if v > x[best] { i } else { best })
}

fn argmin(x: &[f64]) -> usize {
    x.iter().enumerate().fold(0, |best, (i, &v)| if v < x[best] { i } else { best })
}

/// Fits the samples in `[from, to]` whose level lies inside the trimmed swing.
fn fit_branch(w: &Waveform, from: usize, to: usize, lo: f64, hi: f64) -> Result<ExpFit, AnalysisError> {
    let swing = hi - lo;
    let (band_lo, band_hi) = (lo + EDGE_TRIM * swing, hi - EDGE_TRIM * swing);
    let inside = |i: usize| w.samples[i] >= band_lo && w.samples[i] <= band_hi;
    let to = to.min(w.len().saturating_sub(1));
    let Some(first) = (from..=to).find(|&i| inside(i)) else {
        return Err(AnalysisError::TooFewSamples { need: 8, got: 0 });
    };
    let last = (first..=to).rev().find(|&i| inside(i)).unwrap_or(first);
    fit_samples(w, first, last + 1)
}

/// Time-continuous meeting point of two consecutive branch fits between
/// sample `index` and the next one.
fn crossing(w: &Waveform, before: &ExpFit, after: &ExpFit, index: usize) -> Option<f64> {
    let (mut a, mut b) = (w.time(index), w.time(index + 1));
    let d = |t: f64| before.eval(t) - after.eval(t);
    let (da, db) = (d(a), d(b));
    if !(da * db <= 0.0) {
        return None;
    }
    let sa = da.signum();
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if d(m).signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Some(before.eval(0.5 * (a + b)))
}
