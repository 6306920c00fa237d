use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::lm;
use crate::waveform::Waveform;

const MIN_SAMPLES: usize = 8;
const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-10;

/// `V(t) = (v0 - va) exp(-(t - t0)/tau) + va` fitted to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub v0: f64,
    pub va: f64,
    pub tau: f64,
    pub t0: f64,
    pub rms_residual: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        (self.v0 - self.va) * (-(t - self.t0) / self.tau).exp() + self.va
    }
}

/// Least-squares exponential relaxation over the samples in `[t_from, t_to]`.
///
/// `t0` is the time of the first sample used. The starting point comes from
/// the one-step recurrence `v[n+1] - va = r (v[n] - va)` (exact for uniform
/// noise-free samples), falling back to a log-linear fit against the last
/// sample.
pub fn fit_exponential(w: &Waveform, t_from: f64, t_to: f64) -> Result<ExpFit, AnalysisError> {
    let (a, b) = w.index_range(t_from, t_to);
    fit_samples(w, a, b)
}

/// Same fit over sample indices `[a, b)`.
pub(crate) fn fit_samples(w: &Waveform, a: usize, b: usize) -> Result<ExpFit, AnalysisError> {
    let y = &w.samples[a..b];
    if y.len() < MIN_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            need: MIN_SAMPLES,
            got: y.len(),
        });
    }
    let t0 = w.time(a);
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = y.iter().map(|v| v.abs()).fold(1e-3, f64::max);
    if hi - lo <= 1e-12 * scale {
        return Err(AnalysisError::Flat);
    }

    // Times in units of the segment span keep the problem well scaled.
    let span = (y.len() - 1) as f64 * w.dt;
    let x: Vec<f64> = (0..y.len()).map(|k| k as f64 * w.dt / span).collect();
    let (va0, k0) = initial_guess(y, w.dt / span);
    let p0 = DVector::from_vec(vec![y[0], va0, k0]);

    let model = |p: &DVector<f64>| {
        let (v0, va, k) = (p[0], p[1], p[2]);
        let mut r = DVector::zeros(y.len());
        let mut j = DMatrix::zeros(y.len(), 3);
        for i in 0..y.len() {
            let e = (-k * x[i]).exp();
            r[i] = (v0 - va) * e + va - y[i];
            j[(i, 0)] = e;
            j[(i, 1)] = 1.0 - e;
            j[(i, 2)] = -(v0 - va) * x[i] * e;
        }
        (r, j)
    };
    let out = lm::minimize(p0, MAX_ITER, STEP_TOL, model);
    if !out.converged {
        return Err(AnalysisError::NoConvergence {
            iterations: out.iterations,
        });
    }
    let (v0, va, k) = (out.params[0], out.params[1], out.params[2]);
    if !(k > 0.0) || !k.is_finite() {
        return Err(AnalysisError::InvalidInput("segment is not a decaying exponential".into()));
    }
    Ok(ExpFit {
        v0,
        va,
        tau: span / k,
        t0,
        rms_residual: (2.0 * out.cost / y.len() as f64).sqrt(),
    })
}

/// `(va, k)` with `k` in units of the inverse segment span; `h` is one sample
/// interval in those units.
fn initial_guess(y: &[f64], h: f64) -> (f64, f64) {
    let n = (y.len() - 1) as f64;
    let (xs, ys) = (&y[..y.len() - 1], &y[1..]);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
    let r = sxy / sxx;
    if r > 0.0 && r < 1.0 && sxx > 0.0 {
        let va = (my - r * mx) / (1.0 - r);
        return (va, -r.ln() / h);
    }
    // Log-linear fallback: va just beyond the last sample.
    let last = y[y.len() - 1];
    let dir = (last - y[0]).signum();
    let va = last + dir * 0.01 * (last - y[0]).abs();
    let (mut sx, mut sl, mut sxx, mut sxl) = (0.0, 0.0, 0.0, 0.0);
    let mut m = 0.0;
    for (i, v) in y.iter().enumerate() {
        let d = (v - va).abs();
        if d > 0.0 {
            let xi = i as f64 * h;
            let l = d.ln();
            sx += xi;
            sl += l;
            sxx += xi * xi;
            sxl += xi * l;
            m += 1.0;
        }
    }
    let slope = (m * sxl - sx * sl) / (m * sxx - sx * sx);
    let k = if slope < 0.0 && slope.is_finite() { -slope } else { 1.0 };
    (va, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(v0: f64, va: f64, tau: f64, dt: f64, n: usize) -> Waveform {
        let samples = (0..n).map(|k| (v0 - va) * (-(k as f64 * dt) / tau).exp() + va).collect();
        Waveform::new(dt, 0.0, samples).unwrap()
    }

    #[test]
    fn exact_recovery() {
        let w = synthetic(1.0, 0.0, 1e-6, 20e-9, 200);
        let f = fit_exponential(&w, 0.0, 1.0).unwrap();
        assert!((f.v0 - 1.0).abs() < 1e-6);
        assert!(f.va.abs() < 1e-6);
        assert!((f.tau / 1e-6 - 1.0).abs() < 1e-6);
        assert!(f.rms_residual < 1e-9);
    }

    #[test]
    fn translation_equivariance() {
        let base = fit_exponential(&synthetic(1.0, 0.2, 2e-6, 50e-9, 100), 0.0, 1.0).unwrap();
        let moved = fit_exponential(&synthetic(1.5, 0.7, 2e-6, 50e-9, 100), 0.0, 1.0).unwrap();
        assert!((moved.va - base.va - 0.5).abs() < 1e-9);
        assert!((moved.tau / base.tau - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rising_segment_and_window() {
        let w = synthetic(0.6, 1.2, 2.8e-6, 10e-9, 500);
        let f = fit_exponential(&w, 1e-6, 4e-6).unwrap();
        assert!((f.t0 - 1e-6).abs() < 1e-15);
        assert!((f.va - 1.2).abs() < 1e-6);
        assert!((f.tau / 2.8e-6 - 1.0).abs() < 1e-6);
        assert!((f.eval(2e-6) - w.samples[200]).abs() < 1e-9);
    }

    #[test]
    fn noisy_tau_within_two_percent() {
        let mut w = synthetic(1.0, 0.0, 1e-6, 10e-9, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.01).unwrap();
        w.samples.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        let f = fit_exponential(&w, 0.0, 1.0).unwrap();
        assert!((f.tau / 1e-6 - 1.0).abs() < 0.02, "{}", f.tau);
    }

    #[test]
    fn degenerate_inputs() {
        let flat = Waveform::new(1e-9, 0.0, vec![0.5; 50]).unwrap();
        assert_eq!(fit_exponential(&flat, 0.0, 1.0), Err(AnalysisError::Flat));
        let short = synthetic(1.0, 0.0, 1e-6, 1e-7, 5);
        assert!(matches!(fit_exponential(&short, 0.0, 1.0), Err(AnalysisError::TooFewSamples { .. })));
    }
}
