use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::analytic;
use crate::stats::{self, Histogram};
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub t_start: f64,
    pub t_end: f64,
    pub period: f64,
    pub frequency: f64,
    /// Largest sample in the cycle (dynamic threshold estimate).
    pub v_max: f64,
    /// Smallest sample in the cycle (dynamic holding estimate).
    pub v_min: f64,
    /// Energy delivered by the bias source over the cycle, when known.
    pub energy: Option<f64>,
}

/// Result of cutting a record at its rising trigger crossings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub trigger: f64,
    pub hysteresis: f64,
    /// Interpolated crossing times.
    pub crossings: Vec<f64>,
    /// Index of the first sample at or above the trigger for each crossing.
    pub crossing_indices: Vec<usize>,
    pub cycles: Vec<Cycle>,
    /// Why no cycles were found, if so.
    pub diagnostic: Option<String>,
}

impl Segmentation {
    /// Fills in per-cycle energy for a constant bias current.
    pub fn attach_energy(&mut self, w: &Waveform, i_bias: f64) {
        for (k, c) in self.cycles.iter_mut().enumerate() {
            let (a, b) = (self.crossing_indices[k], self.crossing_indices[k + 1]);
            c.energy = analytic::energy_per_spike(&w.slice(a, b + 1), i_bias).ok();
        }
    }
}

/// Splits `w` into cycles between consecutive rising crossings of `trigger`.
///
/// After a crossing the detector re-arms only once the signal has dropped
/// below `trigger - hysteresis`. Crossing times are linearly interpolated.
pub fn segment_cycles(w: &Waveform, trigger: f64, hysteresis: f64) -> Result<Segmentation, AnalysisError> {
    w.validate().map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
    let (lo, hi) = (w.min(), w.max());
    if !(trigger >= lo && trigger <= hi) {
        return Err(AnalysisError::InvalidInput(format!(
            "trigger {trigger} V outside the record range [{lo}, {hi}]"
        )));
    }
    if !(hysteresis >= 0.0) {
        return Err(AnalysisError::InvalidInput(format!("hysteresis must be nonnegative, got {hysteresis}")));
    }
    let s = &w.samples;
    let rearm = trigger - hysteresis;
    let mut armed = s[0] < rearm || (hysteresis == 0.0 && s[0] < trigger);
    let mut crossings = Vec::new();
    let mut crossing_indices = Vec::new();
    for k in 1..s.len() {
        if armed && s[k - 1] < trigger && s[k] >= trigger {
            let frac = (trigger - s[k - 1]) / (s[k] - s[k - 1]);
            crossings.push(w.time(k - 1) + frac * w.dt);
            crossing_indices.push(k);
            armed = false;
        }
        if s[k] < rearm || (hysteresis == 0.0 && s[k] < trigger) {
            armed = true;
        }
    }
    let cycles: Vec<Cycle> = crossing_indices
        .windows(2)
        .zip(crossings.windows(2))
        .map(|(idx, t)| {
            let part = &s[idx[0]..idx[1]];
            let period = t[1] - t[0];
            Cycle {
                t_start: t[0],
                t_end: t[1],
                period,
                frequency: 1.0 / period,
                v_max: part.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                v_min: part.iter().copied().fold(f64::INFINITY, f64::min),
                energy: None,
            }
        })
        .collect();
    let diagnostic = (crossings.len() < 2).then(|| {
        format!(
            "found {} rising crossing(s) of {trigger} V with {hysteresis} V hysteresis; need two per cycle",
            crossings.len()
        )
    });
    Ok(Segmentation {
        trigger,
        hysteresis,
        crossings,
        crossing_indices,
        cycles,
        diagnostic,
    })
}

/// Segmentation with the trigger at mid-swing and 10 % hysteresis.
pub fn segment_cycles_auto(w: &Waveform) -> Result<Segmentation, AnalysisError> {
    let (lo, hi) = (w.min(), w.max());
    segment_cycles(w, 0.5 * (lo + hi), 0.1 * (hi - lo))
}

/// CSV `t_start,t_end,period,frequency,v_max,v_min,energy` (energy empty if unknown).
pub fn write_cycles_csv<W: Write>(cycles: &[Cycle], out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t_start", "t_end", "period", "frequency", "v_max", "v_min", "energy"])?;
    for c in cycles {
        wtr.write_record([
            format!("{:e}", c.t_start),
            format!("{:e}", c.t_end),
            format!("{:e}", c.period),
            format!("{:e}", c.frequency),
            format!("{:e}", c.v_max),
            format!("{:e}", c.v_min),
            c.energy.map(|e| format!("{e:e}")).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation.
    pub sigma: f64,
    pub histogram: Histogram,
}

/// Descriptive statistics of per-cycle frequencies. Without `bin_width`
/// the histogram uses `ceil(sqrt(n))` bins.
pub fn frequency_stats(cycles: &[Cycle], bin_width: Option<f64>) -> Result<FrequencyStats, AnalysisError> {
    if cycles.len() < 2 {
        return Err(AnalysisError::TooFewCycles {
            need: 2,
            got: cycles.len(),
        });
    }
    let f: Vec<f64> = cycles.iter().map(|c| c.frequency).collect();
    let histogram = match bin_width {
        Some(width) => Histogram::with_width(&f, width),
        None => Histogram::auto(&f),
    };
    Ok(FrequencyStats {
        n: f.len(),
        mean: stats::mean(&f),
        median: stats::median(&f),
        sigma: stats::sample_std(&f),
        histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterPair {
    /// Spike index in the first record.
    pub index: usize,
    pub t_a: f64,
    /// `t_b - t_a` for the paired spike onsets.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterTrace {
    pub pairs: Vec<JitterPair>,
}

impl JitterTrace {
    pub fn delays(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.delay).collect()
    }

    pub fn mean_delay(&self) -> f64 {
        stats::mean(&self.delays())
    }

    pub fn delay_std(&self) -> f64 {
        stats::sample_std(&self.delays())
    }

    /// CSV `spike_index,t_a,delay`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["spike_index", "t_a", "delay"])?;
        for p in &self.pairs {
            wtr.write_record([p.index.to_string(), format!("{:e}", p.t_a), format!("{:e}", p.delay)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Delays between corresponding spike onsets of two records.
///
/// Onsets are the rising crossings of `trigger` (10 % swing hysteresis per
/// record). Pairing walks both onset lists in order and matches onsets
/// closer than half the median period of `w_a`; unmatched onsets are
/// skipped.
pub fn compute_jitter(w_a: &Waveform, w_b: &Waveform, trigger: f64) -> Result<JitterTrace, AnalysisError> {
    let seg_a = segment_cycles(w_a, trigger, 0.1 * w_a.peak_to_peak())?;
    let seg_b = segment_cycles(w_b, trigger, 0.1 * w_b.peak_to_peak())?;
    let (a, b) = (&seg_a.crossings, &seg_b.crossings);
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalysisError::Unpairable(format!(
            "{} and {} onsets, need at least two each",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if (na - nb).abs() > 0.1 * na.max(nb) {
        return Err(AnalysisError::Unpairable(format!("onset counts {} and {} differ by more than 10 %", a.len(), b.len())));
    }
    let periods: Vec<f64> = a.windows(2).map(|p| p[1] - p[0]).collect();
    let window = 0.5 * stats::median(&periods);
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let d = b[j] - a[i];
        if d.abs() <= window {
            pairs.push(JitterPair {
                index: i,
                t_a: a[i],
                delay: d,
            });
            i += 1;
            j += 1;
        } else if d < 0.0 {
            j += 1;
        } else {
            i += 1;
        }
    }
    if pairs.is_empty() {
        return Err(AnalysisError::Unpairable("no onsets within half a period of each other".into()));
    }
    Ok(JitterTrace { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sawtooth(period: f64, dt: f64, duration: f64) -> Waveform {
        let n = (duration / dt).round() as usize + 1;
        let samples = (0..n).map(|k| ((k as f64 * dt) / period).fract()).collect();
        Waveform::new(dt, 0.0, samples).unwrap()
    }

    #[test]
    fn sawtooth_cycles() {
        let dt = 10e-9;
        let w = sawtooth(10e-6, dt, 1e-3);
        let seg = segment_cycles(&w, 0.5, 0.1).unwrap();
        assert!((seg.cycles.len() as i64 - 100).abs() <= 1, "{}", seg.cycles.len());
        assert_eq!(seg.cycles.len(), seg.crossings.len() - 1);
        for c in &seg.cycles {
            assert!((c.period - 10e-6).abs() <= dt);
            assert!(c.v_max > c.v_min);
        }
    }

    #[test]
    fn constant_has_no_cycles() {
        let w = Waveform::new(1e-9, 0.0, vec![0.3; 1000]).unwrap();
        let seg = segment_cycles(&w, 0.3, 0.0).unwrap();
        assert!(seg.cycles.is_empty());
        assert!(seg.diagnostic.is_some());
    }

    #[test]
    fn trigger_outside_range_rejected() {
        let w = sawtooth(1e-6, 1e-8, 1e-5);
        assert!(segment_cycles(&w, 2.0, 0.0).is_err());
        assert!(segment_cycles(&w, 0.5, -0.1).is_err());
    }

    #[test]
    fn hysteresis_debounces_chatter() {
        // A rising edge with a small dip right after the crossing.
        let samples = vec![0.0, 0.4, 0.55, 0.45, 0.6, 1.0, 0.0, 0.4, 0.6, 1.0, 0.0];
        let w = Waveform::new(1.0, 0.0, samples).unwrap();
        assert_eq!(segment_cycles(&w, 0.5, 0.0).unwrap().crossings.len(), 3);
        assert_eq!(segment_cycles(&w, 0.5, 0.2).unwrap().crossings.len(), 2);
    }

    #[test]
    fn equal_periods_have_zero_sigma() {
        let w = sawtooth(1e-6, 1e-9, 20e-6);
        let seg = segment_cycles(&w, 0.5, 0.1).unwrap();
        let st = frequency_stats(&seg.cycles, None).unwrap();
        assert!(st.sigma < 1e-6 * st.mean);
        assert!(frequency_stats(&seg.cycles[..1], None).is_err());
    }

    #[test]
    fn jitter_of_shifted_copy() {
        let dt = 10e-9;
        let w = sawtooth(10e-6, dt, 200e-6);
        let same = compute_jitter(&w, &w, 0.5).unwrap();
        assert!(same.pairs.iter().all(|p| p.delay == 0.0));
        let late = compute_jitter(&w, &w.shifted(3e-6), 0.5).unwrap();
        assert!(late.pairs.len() >= 19);
        assert!(late.pairs.iter().all(|p| (p.delay - 3e-6).abs() <= dt));
    }

    #[test]
    fn jitter_rejects_mismatched_counts() {
        let a = sawtooth(10e-6, 10e-9, 200e-6);
        let b = sawtooth(5e-6, 10e-9, 200e-6);
        assert!(matches!(compute_jitter(&a, &b, 0.5), Err(AnalysisError::Unpairable(_))));
    }
}
